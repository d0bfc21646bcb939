#pragma once

// Dense square matrices, permutations, conjugation sigma(M) and corner/block
// extraction. Indices are 0-based in code; messages report 1-based indices.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "exspec/error.hpp"

namespace exspec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Immutable dense n x n real matrix. The zero-diagonal tag is validated on
/// construction and carried through structure-preserving operations.
class SquareMatrix {
 public:
  explicit SquareMatrix(Matrix entries, bool zero_diagonal = false)
      : entries_(std::move(entries)), zero_diagonal_(zero_diagonal) {
    if (entries_.rows() != entries_.cols())
      throw DimensionError("matrix is " + std::to_string(entries_.rows()) + "x" +
                           std::to_string(entries_.cols()) + ", expected square");
    if (entries_.rows() < 1) throw DimensionError("matrix dimension must be >= 1");
    if (!entries_.allFinite()) throw DomainError("matrix has non-finite entries");
    if (zero_diagonal_) {
      for (Index i = 0; i < n(); ++i)
        if (entries_(i, i) != 0.0)
          throw DomainError("zero-diagonal matrix has nonzero entry at (" +
                            std::to_string(i + 1) + "," + std::to_string(i + 1) + ")");
    }
  }

  static SquareMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows,
                                bool zero_diagonal = false) {
    const auto n = static_cast<Index>(rows.size());
    Matrix m(n, n);
    Index i = 0;
    for (const auto& row : rows) {
      if (static_cast<Index>(row.size()) != n)
        throw DimensionError("row " + std::to_string(i + 1) + " has " +
                             std::to_string(row.size()) + " entries, expected " +
                             std::to_string(n));
      Index j = 0;
      for (double x : row) m(i, j++) = x;
      ++i;
    }
    return SquareMatrix(std::move(m), zero_diagonal);
  }

  static SquareMatrix identity(Index n) { return SquareMatrix(Matrix::Identity(n, n)); }
  static SquareMatrix zeros(Index n) { return SquareMatrix(Matrix::Zero(n, n), true); }

  Index n() const noexcept { return entries_.rows(); }
  bool zero_diagonal() const noexcept { return zero_diagonal_; }
  double operator()(Index i, Index j) const { return entries_(i, j); }
  const Matrix& entries() const noexcept { return entries_; }

  /// True when every diagonal entry is exactly zero, tagged or not.
  bool has_zero_diagonal() const {
    return (entries_.diagonal().array() == 0.0).all();
  }

  friend bool operator==(const SquareMatrix& a, const SquareMatrix& b) {
    return a.zero_diagonal_ == b.zero_diagonal_ && a.entries_ == b.entries_;
  }

 private:
  Matrix entries_;
  bool zero_diagonal_;
};

/// Bijection on {0, ..., n-1}.
class Permutation {
 public:
  explicit Permutation(std::vector<Index> map) : map_(std::move(map)) {
    std::vector<char> seen(map_.size(), 0);
    for (std::size_t i = 0; i < map_.size(); ++i) {
      const Index v = map_[i];
      if (v < 0 || v >= static_cast<Index>(map_.size()) || seen[static_cast<std::size_t>(v)])
        throw DomainError("not a permutation: position " + std::to_string(i + 1) +
                          " maps to " + std::to_string(v + 1));
      seen[static_cast<std::size_t>(v)] = 1;
    }
  }

  static Permutation identity(Index n) {
    std::vector<Index> m(static_cast<std::size_t>(n));
    std::iota(m.begin(), m.end(), Index{0});
    return Permutation(std::move(m));
  }

  /// Swap of two positions (0-based).
  static Permutation transposition(Index n, Index a, Index b) {
    auto p = identity(n).map_;
    std::swap(p[static_cast<std::size_t>(a)], p[static_cast<std::size_t>(b)]);
    return Permutation(std::move(p));
  }

  Index n() const noexcept { return static_cast<Index>(map_.size()); }
  Index operator()(Index i) const { return map_[static_cast<std::size_t>(i)]; }
  const std::vector<Index>& map() const noexcept { return map_; }

  Permutation inverse() const {
    std::vector<Index> inv(map_.size());
    for (std::size_t i = 0; i < map_.size(); ++i)
      inv[static_cast<std::size_t>(map_[i])] = static_cast<Index>(i);
    return Permutation(std::move(inv));
  }

  /// (this * other)(i) = this(other(i)).
  Permutation compose(const Permutation& other) const {
    if (other.n() != n()) throw DimensionError("composing permutations of different size");
    std::vector<Index> c(map_.size());
    for (std::size_t i = 0; i < map_.size(); ++i)
      c[i] = map_[static_cast<std::size_t>(other.map_[i])];
    return Permutation(std::move(c));
  }

  bool is_derangement() const {
    for (std::size_t i = 0; i < map_.size(); ++i)
      if (map_[i] == static_cast<Index>(i)) return false;
    return true;
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<Index> map_;
};

/// Rectangular block cut from a square parent. The top-right corner is always
/// square (floor(n/2) on each side); blocks of odd-n decompositions are not.
class CornerMatrix {
 public:
  CornerMatrix(Matrix entries, Index parent_n)
      : entries_(std::move(entries)), parent_n_(parent_n) {}

  Index rows() const noexcept { return entries_.rows(); }
  Index cols() const noexcept { return entries_.cols(); }
  Index m() const noexcept { return entries_.rows(); }
  Index parent_n() const noexcept { return parent_n_; }
  bool is_square() const noexcept { return rows() == cols(); }
  double operator()(Index i, Index j) const { return entries_(i, j); }
  const Matrix& entries() const noexcept { return entries_; }

 private:
  Matrix entries_;
  Index parent_n_;
};

struct BlockDecomposition {
  CornerMatrix b11, b12, b21, b22;
};

/// sigma(M): result(i, j) = M(sigma(i), sigma(j)).
inline SquareMatrix apply_permutation(const SquareMatrix& m, const Permutation& sigma) {
  if (sigma.n() != m.n())
    throw DimensionError("permutation has size " + std::to_string(sigma.n()) +
                         " but matrix is " + std::to_string(m.n()) + "x" +
                         std::to_string(m.n()));
  const Index n = m.n();
  Matrix out(n, n);
  const Matrix& a = m.entries();
  for (Index j = 0; j < n; ++j) {
    const Index sj = sigma(j);
    for (Index i = 0; i < n; ++i) out(i, j) = a(sigma(i), sj);
  }
  return SquareMatrix(std::move(out), m.zero_diagonal());
}

/// Rows 1..floor(n/2) and the last floor(n/2) columns (1-based).
inline CornerMatrix top_right_corner(const Matrix& a) {
  const Index n = a.rows();
  if (n != a.cols()) throw DimensionError("top_right_corner needs a square matrix");
  if (n < 2) throw DimensionError("top_right_corner needs n >= 2, got n = " + std::to_string(n));
  const Index m = n / 2;
  return CornerMatrix(a.block(0, n - m, m, m), n);
}

inline CornerMatrix top_right_corner(const SquareMatrix& a) {
  return top_right_corner(a.entries());
}

/// top_right_corner(apply_permutation(m, sigma)) without forming sigma(M).
inline CornerMatrix permuted_corner(const SquareMatrix& m, const Permutation& sigma) {
  const Index n = m.n();
  if (sigma.n() != n) throw DimensionError("permutation size does not match matrix");
  if (n < 2) throw DimensionError("permuted_corner needs n >= 2, got n = " + std::to_string(n));
  const Index h = n / 2;
  Matrix out(h, h);
  const Matrix& a = m.entries();
  for (Index j = 0; j < h; ++j) {
    const Index sj = sigma(n - h + j);
    for (Index i = 0; i < h; ++i) out(i, j) = a(sigma(i), sj);
  }
  return CornerMatrix(std::move(out), n);
}

/// Four blocks split at h = floor(n/2). For odd n, M^(12) is h x (n-h) and so
/// differs from top_right_corner, which stays square.
inline BlockDecomposition block_decompose(const SquareMatrix& a) {
  const Index n = a.n();
  if (n < 2) throw DimensionError("block_decompose needs n >= 2, got n = " + std::to_string(n));
  const Index h = n / 2;
  const Index r = n - h;
  const Matrix& e = a.entries();
  return {CornerMatrix(e.block(0, 0, h, h), n), CornerMatrix(e.block(0, h, h, r), n),
          CornerMatrix(e.block(h, 0, r, h), n), CornerMatrix(e.block(h, h, r, r), n)};
}

/// u_i = l1 norm of column i.
inline Vector column_sums(const Matrix& a) { return a.cwiseAbs().colwise().sum().transpose(); }
/// v_i = l1 norm of row i.
inline Vector row_sums(const Matrix& a) { return a.cwiseAbs().rowwise().sum(); }

inline Vector column_sums(const SquareMatrix& a) { return column_sums(a.entries()); }
inline Vector row_sums(const SquareMatrix& a) { return row_sums(a.entries()); }
inline Vector column_sums(const CornerMatrix& a) { return column_sums(a.entries()); }
inline Vector row_sums(const CornerMatrix& a) { return row_sums(a.entries()); }

inline bool is_nonnegative(const Matrix& a) { return (a.array() >= 0.0).all(); }

/// Sum of the permutation matrices P_k with P_k(i, p_k(i)) = 1.
inline SquareMatrix permutation_matrix_sum(const std::vector<Permutation>& perms) {
  if (perms.empty()) throw DomainError("need at least one permutation");
  const Index n = perms.front().n();
  Matrix a = Matrix::Zero(n, n);
  bool zero_diag = true;
  for (const auto& p : perms) {
    if (p.n() != n) throw DimensionError("permutations of different size");
    for (Index i = 0; i < n; ++i) a(i, p(i)) += 1.0;
    zero_diag = zero_diag && p.is_derangement();
  }
  return SquareMatrix(std::move(a), zero_diag);
}

/// (d/n) 1 1^t.
inline Matrix flat_matrix(Index n, double d) {
  return Matrix::Constant(n, n, d / static_cast<double>(n));
}

}  // namespace exspec
