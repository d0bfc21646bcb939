#pragma once

// Singular values, spectral norm, second singular value and the identities
// built on them for matrices with constant margins.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "exspec/error.hpp"
#include "exspec/matrix.hpp"
#include "exspec/rng.hpp"

namespace exspec {

inline constexpr double kDefaultSvdTol = 1e-10;
inline constexpr double kIdentityTol = 1e-8;
/// Above this dimension s1/s2 come from orthogonal iteration.
inline constexpr Index kFullDecompositionMax = 512;

/// Singular values in nonincreasing order, clamped at zero.
struct SingularSpectrum {
  std::vector<double> values;
  double tol = kDefaultSvdTol;

  double s1() const { return values.empty() ? 0.0 : values[0]; }
  double s2() const { return values.size() < 2 ? 0.0 : values[1]; }
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, SingularSpectrum partial, int iterations)
      : Error(what), partial_(std::move(partial)), iterations_(iterations) {}
  const SingularSpectrum& partial() const noexcept { return partial_; }
  int iterations() const noexcept { return iterations_; }

 private:
  SingularSpectrum partial_;
  int iterations_;
};

namespace detail {

inline SingularSpectrum finish_spectrum(std::vector<double> v, double tol) {
  std::sort(v.begin(), v.end(), std::greater<>());
  for (double& x : v)
    if (x < 0.0) x = 0.0;
  return {std::move(v), tol};
}

}  // namespace detail

/// Full singular spectrum by bidiagonal divide-and-conquer (values only).
inline SingularSpectrum singular_values(const Matrix& a, double tol = kDefaultSvdTol) {
  if (!(tol > 0.0)) throw DomainError("singular_values: tol must be > 0");
  if (a.size() == 0) return {{}, tol};
  Eigen::BDCSVD<Matrix> svd(a);
  const Vector s = svd.singularValues();
  std::vector<double> v(s.data(), s.data() + s.size());
  if (svd.info() != Eigen::Success)
    throw ConvergenceError("SVD did not converge", detail::finish_spectrum(v, tol), 0);
  return detail::finish_spectrum(std::move(v), tol);
}

inline SingularSpectrum singular_values(const SquareMatrix& a, double tol = kDefaultSvdTol) {
  return singular_values(a.entries(), tol);
}

/// Leading `count` singular values by block orthogonal iteration on A^t A with
/// Rayleigh-Ritz extraction. Stops when every wanted Ritz pair has residual
/// ||A^t A v - s^2 v|| <= tol * max(1, s1)^2.
inline SingularSpectrum leading_singular_values(const Matrix& a, Index count,
                                                double tol = kDefaultSvdTol,
                                                int max_iterations = 20000) {
  if (!(tol > 0.0)) throw DomainError("leading_singular_values: tol must be > 0");
  const Index c = a.cols();
  count = std::min(count, c);
  if (count <= 0) return {{}, tol};
  const Index block = std::min(c, count + 8);

  Engine eng = make_engine(0x5EED, Stream::kSolver, static_cast<std::uint64_t>(c));
  Matrix v(c, block);
  for (Index j = 0; j < block; ++j)
    for (Index i = 0; i < c; ++i) v(i, j) = standard_normal(eng);
  v = Eigen::HouseholderQR<Matrix>(v).householderQ() * Matrix::Identity(c, block);

  std::vector<double> sigma(static_cast<std::size_t>(count), 0.0);
  for (int it = 1; it <= max_iterations; ++it) {
    const Matrix z = a * v;
    Eigen::JacobiSVD<Matrix> small(z, Eigen::ComputeThinV);
    v = v * small.matrixV();
    const Vector s = small.singularValues();
    const Matrix g = a.transpose() * (a * v);
    const double scale = std::max(1.0, s(0)) * std::max(1.0, s(0));
    bool converged = true;
    for (Index i = 0; i < count; ++i) {
      sigma[static_cast<std::size_t>(i)] = s(i);
      const double res = (g.col(i) - s(i) * s(i) * v.col(i)).norm();
      if (res > tol * scale) converged = false;
    }
    if (converged) return detail::finish_spectrum(sigma, tol);
    v = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(c, block);
  }
  throw ConvergenceError("orthogonal iteration did not converge after " +
                             std::to_string(max_iterations) + " iterations",
                         detail::finish_spectrum(sigma, tol), max_iterations);
}

/// s1 and s2 (and beyond when asked) using the backend that fits the size.
inline SingularSpectrum top_singular_values(const Matrix& a, Index count = 2,
                                            double tol = kDefaultSvdTol) {
  if (std::max(a.rows(), a.cols()) <= kFullDecompositionMax) {
    auto full = singular_values(a, tol);
    if (static_cast<Index>(full.values.size()) > count) full.values.resize(static_cast<std::size_t>(count));
    return full;
  }
  return leading_singular_values(a, count, tol);
}

inline double spectral_norm(const Matrix& a, double tol = kDefaultSvdTol) {
  return top_singular_values(a, 1, tol).s1();
}
inline double second_singular(const Matrix& a, double tol = kDefaultSvdTol) {
  return top_singular_values(a, 2, tol).s2();
}
inline double spectral_norm(const SquareMatrix& a, double tol = kDefaultSvdTol) {
  return spectral_norm(a.entries(), tol);
}
inline double second_singular(const SquareMatrix& a, double tol = kDefaultSvdTol) {
  return second_singular(a.entries(), tol);
}
inline double spectral_norm(const CornerMatrix& a, double tol = kDefaultSvdTol) {
  return spectral_norm(a.entries(), tol);
}
inline double second_singular(const CornerMatrix& a, double tol = kDefaultSvdTol) {
  return second_singular(a.entries(), tol);
}

/// Throws DomainError naming the first row or column whose sum is not d.
inline void require_constant_margins(const Matrix& a, double d, double tol = kIdentityTol) {
  const double slack = tol * std::max(1.0, d);
  const Vector v = a.rowwise().sum();
  const Vector u = a.colwise().sum().transpose();
  for (Index i = 0; i < v.size(); ++i)
    if (std::abs(v(i) - d) > slack)
      throw DomainError("row " + std::to_string(i + 1) + " sums to " + std::to_string(v(i)) +
                        ", expected d = " + std::to_string(d));
  for (Index i = 0; i < u.size(); ++i)
    if (std::abs(u(i) - d) > slack)
      throw DomainError("column " + std::to_string(i + 1) + " sums to " + std::to_string(u(i)) +
                        ", expected d = " + std::to_string(d));
}

/// ||A - (d/n) 1 1^t||, which equals s2(A) for A with all margins d.
inline double s2_via_centering(const Matrix& a, double d, double svd_tol = kDefaultSvdTol,
                               double margin_tol = kIdentityTol) {
  if (a.rows() != a.cols()) throw DimensionError("s2_via_centering needs a square matrix");
  require_constant_margins(a, d, margin_tol);
  return spectral_norm(a - flat_matrix(a.rows(), d), svd_tol);
}

inline double s2_via_centering(const SquareMatrix& a, double d, double svd_tol = kDefaultSvdTol,
                               double margin_tol = kIdentityTol) {
  return s2_via_centering(a.entries(), d, svd_tol, margin_tol);
}

/// B = A - (d/n) 1 1^t - Diag(A - (d/n) 1 1^t).
inline SquareMatrix centered_offdiag(const SquareMatrix& a, double d) {
  Matrix b = a.entries() - flat_matrix(a.n(), d);
  b.diagonal().setZero();
  return SquareMatrix(std::move(b), true);
}

/// Largest |lambda| over the (complex) eigenvalues.
inline double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("spectral_radius needs a square matrix");
  Eigen::EigenSolver<Matrix> es(m, false);
  if (es.info() != Eigen::Success) throw ConvergenceError("eigenvalue solver failed", {}, 0);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct PerronCheck {
  double rho = 0.0;
  double residual = 0.0;  // ||Mx - rho x||_2 / ||x||_2
  double radius = 0.0;    // spectral radius by eigenvalue computation
  bool is_eigen = false;
  bool matches_radius = false;
};

/// For nonnegative M and positive x: is x an eigenvector, and is its
/// eigenvalue the spectral radius? rho is the median of (Mx)_i / x_i.
inline PerronCheck perron_check(const Matrix& m, const Vector& x, double tol = kIdentityTol) {
  if (m.rows() != m.cols() || m.rows() != x.size())
    throw DimensionError("perron_check: matrix and vector sizes differ");
  if (!is_nonnegative(m)) throw DomainError("perron_check: matrix has a negative entry");
  for (Index i = 0; i < x.size(); ++i)
    if (!(x(i) > 0.0))
      throw DomainError("perron_check: coordinate " + std::to_string(i + 1) + " of x is not positive");

  const Vector y = m * x;
  std::vector<double> ratios(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) ratios[static_cast<std::size_t>(i)] = y(i) / x(i);
  std::sort(ratios.begin(), ratios.end());
  const std::size_t h = ratios.size() / 2;
  PerronCheck out;
  out.rho = ratios.size() % 2 ? ratios[h] : 0.5 * (ratios[h - 1] + ratios[h]);
  out.residual = (y - out.rho * x).norm() / x.norm();
  out.is_eigen = out.residual <= tol;
  out.radius = spectral_radius(m);
  out.matches_radius = out.is_eigen && std::abs(out.rho - out.radius) <= tol * std::max(1.0, out.rho);
  return out;
}

}  // namespace exspec
