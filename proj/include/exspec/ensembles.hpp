#pragma once

// Seeded matrix ensembles. sample(spec, index) is a pure function of its
// arguments, so trials can be generated in parallel and reproduced exactly.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "exspec/error.hpp"
#include "exspec/matrix.hpp"
#include "exspec/matrix_io.hpp"
#include "exspec/rng.hpp"

namespace exspec {

enum class EnsembleKind { kPermutedBase, kSeparatelyExchangeable, kPermSumRegular, kRegularDigraph };

inline std::string to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::kPermutedBase: return "PermutedBase";
    case EnsembleKind::kSeparatelyExchangeable: return "SeparatelyExchangeable";
    case EnsembleKind::kPermSumRegular: return "PermSumRegular";
    case EnsembleKind::kRegularDigraph: return "RegularDigraph";
  }
  return "?";
}

inline EnsembleKind ensemble_kind_from_string(const std::string& s) {
  for (auto k : {EnsembleKind::kPermutedBase, EnsembleKind::kSeparatelyExchangeable,
                 EnsembleKind::kPermSumRegular, EnsembleKind::kRegularDigraph})
    if (s == to_string(k)) return k;
  throw DomainError("unknown ensemble '" + s +
                    "' (expected PermutedBase, SeparatelyExchangeable, PermSumRegular or RegularDigraph)");
}

inline bool is_regular_kind(EnsembleKind k) {
  return k == EnsembleKind::kPermSumRegular || k == EnsembleKind::kRegularDigraph;
}

/// Without a base, PermutedBase and SeparatelyExchangeable draw a fresh base
/// per sample: i.i.d. standard normal entries times a log-normal scale
/// exp(Z/2), so that norms vary across samples. zero_diagonal clears the
/// base diagonal.
struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::kPermSumRegular;
  Index n = 0;
  int d = 0;
  bool zero_diagonal = true;
  std::uint64_t seed = 0;
  std::optional<SquareMatrix> base;

  void validate() const {
    if (n < 1) throw DomainError("ensemble dimension n must be >= 1");
    if (is_regular_kind(kind)) {
      if (d < 1 || d >= n)
        throw DomainError("ensemble " + to_string(kind) + " needs 1 <= d < n, got d = " +
                          std::to_string(d) + ", n = " + std::to_string(n));
      if (kind == EnsembleKind::kRegularDigraph && !zero_diagonal)
        throw DomainError("RegularDigraph samples always have zero diagonal");
    }
    if (base && base->n() != n)
      throw DimensionError("base matrix is " + std::to_string(base->n()) + "x" +
                           std::to_string(base->n()) + " but n = " + std::to_string(n));
    if (base && kind == EnsembleKind::kPermutedBase && zero_diagonal && !base->has_zero_diagonal())
      throw DomainError("zero_diagonal ensemble with a base that has a nonzero diagonal");
  }
};

inline Permutation random_permutation(Index n, Engine& eng) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(uniform_below(eng, static_cast<std::uint64_t>(i + 1)));
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  }
  return Permutation(std::move(p));
}

/// Uniform derangement by rejection from uniform permutations.
inline Permutation random_derangement(Index n, Engine& eng) {
  if (n < 2) throw DomainError("no derangement of a single element");
  for (;;) {
    auto p = random_permutation(n, eng);
    if (p.is_derangement()) return p;
  }
}

/// Uniform permutation of {0..n-1}, pure in (seed, index).
inline Permutation uniform_permutation(Index n, std::uint64_t seed, std::uint64_t index) {
  if (n < 1) throw DomainError("uniform_permutation needs n >= 1");
  Engine eng = make_engine(seed, Stream::kPermutation, index);
  return random_permutation(n, eng);
}

namespace detail {

inline SquareMatrix random_base(Index n, bool zero_diagonal, Engine& eng) {
  const double scale = std::exp(0.5 * standard_normal(eng));
  Matrix b(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) b(i, j) = scale * standard_normal(eng);
  if (zero_diagonal) b.diagonal().setZero();
  return SquareMatrix(std::move(b), zero_diagonal);
}

/// Kuhn augmenting path from row r over allowed (i, j) with adj(i, j) == 0, i != j.
inline bool augment(Index r, const Matrix& adj, const std::vector<std::vector<Index>>& order,
                    std::vector<Index>& col_owner, std::vector<char>& visited) {
  for (Index c : order[static_cast<std::size_t>(r)]) {
    if (visited[static_cast<std::size_t>(c)]) continue;
    visited[static_cast<std::size_t>(c)] = 1;
    const Index owner = col_owner[static_cast<std::size_t>(c)];
    if (owner < 0 || augment(owner, adj, order, col_owner, visited)) {
      col_owner[static_cast<std::size_t>(c)] = r;
      return true;
    }
  }
  return false;
}

/// One more 0/1 layer: a permutation avoiding the diagonal and existing
/// edges. Random greedy assignment, then augmenting paths for the rows the
/// greedy pass left unmatched. The complement of a (j+1)-regular bipartite
/// graph is regular, so a perfect matching exists whenever j + 1 < n.
inline std::optional<std::vector<Index>> sample_layer(const Matrix& adj, Engine& eng) {
  const Index n = adj.rows();
  std::vector<std::vector<Index>> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    auto& o = order[static_cast<std::size_t>(i)];
    for (Index j = 0; j < n; ++j)
      if (j != i && adj(i, j) == 0.0) o.push_back(j);
    for (std::size_t k = o.size(); k > 1; --k)
      std::swap(o[k - 1], o[static_cast<std::size_t>(uniform_below(eng, k))]);
  }
  std::vector<Index> col_owner(static_cast<std::size_t>(n), -1);
  std::vector<Index> rows;
  for (Index i = 0; i < n; ++i) rows.push_back(i);
  for (std::size_t k = rows.size(); k > 1; --k)
    std::swap(rows[k - 1], rows[static_cast<std::size_t>(uniform_below(eng, k))]);
  std::vector<Index> unmatched;
  for (Index r : rows) {
    bool placed = false;
    for (Index c : order[static_cast<std::size_t>(r)])
      if (col_owner[static_cast<std::size_t>(c)] < 0) {
        col_owner[static_cast<std::size_t>(c)] = r;
        placed = true;
        break;
      }
    if (!placed) unmatched.push_back(r);
  }
  for (Index r : unmatched) {
    std::vector<char> visited(static_cast<std::size_t>(n), 0);
    if (!augment(r, adj, order, col_owner, visited)) return std::nullopt;
  }
  std::vector<Index> p(static_cast<std::size_t>(n));
  for (Index c = 0; c < n; ++c) p[static_cast<std::size_t>(col_owner[static_cast<std::size_t>(c)])] = c;
  return p;
}

inline constexpr int kLayerRetryCap = 1000;

inline SquareMatrix sample_regular_digraph(Index n, int d, Engine& eng) {
  Matrix adj = Matrix::Zero(n, n);
  for (int layer = 0; layer < d; ++layer) {
    std::optional<std::vector<Index>> p;
    for (int attempt = 0; attempt < kLayerRetryCap && !p; ++attempt) p = sample_layer(adj, eng);
    if (!p)
      throw GenerationError("RegularDigraph: layer " + std::to_string(layer + 1) + " failed after " +
                            std::to_string(kLayerRetryCap) + " attempts; use a larger gap between n and d");
    for (Index i = 0; i < n; ++i) adj(i, (*p)[static_cast<std::size_t>(i)]) = 1.0;
  }
  const auto sigma = random_permutation(n, eng);
  return apply_permutation(SquareMatrix(std::move(adj), true), sigma);
}

}  // namespace detail

inline SquareMatrix sample(const EnsembleSpec& spec, std::uint64_t index) {
  spec.validate();
  Engine eng = make_engine(spec.seed, Stream::kEnsemble, index);
  const Index n = spec.n;
  switch (spec.kind) {
    case EnsembleKind::kPermutedBase: {
      const SquareMatrix base = spec.base ? *spec.base : detail::random_base(n, spec.zero_diagonal, eng);
      return apply_permutation(base, random_permutation(n, eng));
    }
    case EnsembleKind::kSeparatelyExchangeable: {
      const SquareMatrix base = spec.base ? *spec.base : detail::random_base(n, false, eng);
      const auto rows = random_permutation(n, eng);
      const auto cols = random_permutation(n, eng);
      Matrix out(n, n);
      for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) out(i, j) = base(rows(i), cols(j));
      return SquareMatrix(std::move(out));
    }
    case EnsembleKind::kPermSumRegular: {
      std::vector<Permutation> perms;
      perms.reserve(static_cast<std::size_t>(spec.d));
      for (int k = 0; k < spec.d; ++k)
        perms.push_back(spec.zero_diagonal ? random_derangement(n, eng) : random_permutation(n, eng));
      return permutation_matrix_sum(perms);
    }
    case EnsembleKind::kRegularDigraph:
      return detail::sample_regular_digraph(n, spec.d, eng);
  }
  throw DomainError("unknown ensemble kind");
}

/// Row and column sums all equal to d within tol * max(1, d).
inline bool has_constant_margins(const Matrix& a, double d, double tol = 1e-8) {
  const double slack = tol * std::max(1.0, d);
  return ((a.rowwise().sum().array() - d).abs() <= slack).all() &&
         ((a.colwise().sum().array() - d).abs() <= slack).all();
}

inline void to_json(nlohmann::json& j, const EnsembleSpec& s) {
  j = {{"kind", to_string(s.kind)}, {"n", s.n},   {"d", s.d},
       {"zero_diagonal", s.zero_diagonal}, {"seed", s.seed}};
  j["base"] = s.base ? to_json_envelope(*s.base) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, EnsembleSpec& s) {
  s.kind = ensemble_kind_from_string(j.at("kind").get<std::string>());
  s.n = j.at("n").get<Index>();
  s.d = j.value("d", 0);
  s.zero_diagonal = j.value("zero_diagonal", true);
  s.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("base") && !j.at("base").is_null()) s.base = from_json_envelope(j.at("base"));
  else s.base.reset();
}

}  // namespace exspec
