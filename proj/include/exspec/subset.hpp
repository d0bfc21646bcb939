#pragma once

// Statistics of sum_{i in S} a_i for S a uniform random k-subset of [m]:
// closed-form second moment, the four-term fourth-moment bound, exhaustive
// enumeration, and seeded Monte Carlo estimates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "exspec/error.hpp"
#include "exspec/parallel.hpp"
#include "exspec/rng.hpp"
#include "exspec/stats.hpp"

namespace exspec {

inline constexpr double kMaxEnumeration = 1e6;

class SubsetSumProblem {
 public:
  SubsetSumProblem(std::vector<double> a, std::size_t k) : a_(std::move(a)), k_(k) {
    if (a_.empty()) throw DomainError("subset problem needs m >= 1");
    if (k_ < 1 || k_ > a_.size())
      throw DomainError("subset size k = " + std::to_string(k_) + " outside 1.." +
                        std::to_string(a_.size()));
    for (double x : a_)
      if (!std::isfinite(x)) throw DomainError("subset problem has a non-finite weight");
  }

  std::span<const double> a() const noexcept { return a_; }
  std::size_t m() const noexcept { return a_.size(); }
  std::size_t k() const noexcept { return k_; }

  /// k > ceil(m/2): the closed forms still apply but the lemmas do not.
  bool beyond_lemma_range() const noexcept { return k_ > (m() + 1) / 2; }

  double sum() const { return std::accumulate(a_.begin(), a_.end(), 0.0); }
  double sum_squares() const {
    return std::inner_product(a_.begin(), a_.end(), a_.begin(), 0.0);
  }
  /// (k/m) sum a, evaluated as k*sum/m so that integer data stays exact.
  double mean() const { return static_cast<double>(k_) * sum() / static_cast<double>(m()); }

 private:
  std::vector<double> a_;
  std::size_t k_;
};

/// t_u = P{[u] subset S} = k(k-1)..(k-u+1) / (m(m-1)..(m-u+1)), u = 1..4.
inline std::array<double, 4> inclusion_probabilities(std::size_t m, std::size_t k) {
  std::array<double, 4> t{};
  double p = 1.0;
  for (std::size_t u = 0; u < 4; ++u) {
    if (k <= u) {
      p = 0.0;
    } else {
      p *= static_cast<double>(k - u) / static_cast<double>(m - u);
    }
    t[u] = p;
  }
  return t;
}

/// E(sum_S a)^2 = t2 (sum a)^2 + (t1 - t2) sum a^2.
inline double second_moment_exact(const SubsetSumProblem& p) {
  const auto t = inclusion_probabilities(p.m(), p.k());
  const double s = p.sum();
  return t[1] * s * s + (t[0] - t[1]) * p.sum_squares();
}

/// Upper bound on E(sum_S a)^4 obtained from t_u <= (k/m)^u.
inline double fourth_moment_bound(const SubsetSumProblem& p) {
  const double r = static_cast<double>(p.k()) / static_cast<double>(p.m());
  const double s = p.sum();
  const double q = p.sum_squares();
  return r * r * r * r * s * s * s * s + 6.0 * r * r * r * q * s * s + 7.0 * r * q * q +
         12.0 * r * r * std::pow(q, 1.5) * std::abs(s);
}

inline double binomial(std::size_t m, std::size_t k) {
  if (k > m) return 0.0;
  k = std::min(k, m - k);
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(m - k + i) / static_cast<double>(i);
  return std::round(c);
}

/// Calls f(indices) for every k-subset of {0..m-1} in lexicographic order.
template <class F>
void for_each_subset(std::size_t m, std::size_t k, F&& f) {
  if (k > m) return;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (;;) {
    f(std::span<const std::size_t>(idx));
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == m - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

/// Exact E g(sum_S a) by iterating all C(m, k) subsets.
template <class G>
double enumerate_expectation(const SubsetSumProblem& p, G&& g) {
  const double count = binomial(p.m(), p.k());
  if (count > kMaxEnumeration)
    throw CombinatorialError("C(" + std::to_string(p.m()) + "," + std::to_string(p.k()) +
                             ") exceeds the enumeration limit; use the Monte Carlo estimators");
  const auto a = p.a();
  double total = 0.0;
  for_each_subset(p.m(), p.k(), [&](std::span<const std::size_t> s) {
    double x = 0.0;
    for (auto i : s) x += a[i];
    total += g(x);
  });
  return total / count;
}

namespace subset_statistic {
/// E(sum_S a)^r, r in {1, 2, 4}.
struct Moment {
  int r;
};
/// P{|sum_S a - (k/m) sum a| >= t}.
struct Tail {
  double t;
};
/// P{|sum_S a| >= (c k / m) |sum a|}.
struct AntiConcentration {
  double c;
};
}  // namespace subset_statistic

using SubsetStatistic =
    std::variant<subset_statistic::Moment, subset_statistic::Tail, subset_statistic::AntiConcentration>;

inline double anticoncentration_threshold(const SubsetSumProblem& p, double c) {
  return c * static_cast<double>(p.k()) * std::abs(p.sum()) / static_cast<double>(p.m());
}

inline double enumerate_exact(const SubsetSumProblem& p, const SubsetStatistic& stat) {
  using namespace subset_statistic;
  if (const auto* mo = std::get_if<Moment>(&stat)) {
    const int r = mo->r;
    if (r != 1 && r != 2 && r != 4) throw DomainError("moment order must be 1, 2 or 4");
    return enumerate_expectation(p, [r](double x) {
      const double x2 = x * x;
      return r == 1 ? x : (r == 2 ? x2 : x2 * x2);
    });
  }
  if (const auto* tail = std::get_if<Tail>(&stat)) {
    const double mean = p.mean();
    const double t = tail->t;
    return enumerate_expectation(p, [=](double x) { return std::abs(x - mean) >= t ? 1.0 : 0.0; });
  }
  const double thr = anticoncentration_threshold(p, std::get<AntiConcentration>(stat).c);
  return enumerate_expectation(p, [=](double x) { return std::abs(x) >= thr ? 1.0 : 0.0; });
}

struct SubsetMomentReport {
  double second_moment_exact = 0.0;
  double fourth_moment_bound = 0.0;
  std::optional<double> fourth_moment_exact;
  std::array<double, 4> t_u{};
  double mean = 0.0;
  bool beyond_lemma_range = false;
};

inline SubsetMomentReport moment_report(const SubsetSumProblem& p) {
  SubsetMomentReport r;
  r.second_moment_exact = second_moment_exact(p);
  r.fourth_moment_bound = fourth_moment_bound(p);
  if (binomial(p.m(), p.k()) <= kMaxEnumeration)
    r.fourth_moment_exact = enumerate_exact(p, subset_statistic::Moment{4});
  r.t_u = inclusion_probabilities(p.m(), p.k());
  r.mean = p.mean();
  r.beyond_lemma_range = p.beyond_lemma_range();
  return r;
}

/// Sum over a uniform k-subset drawn by partial Fisher-Yates from `eng`.
/// `scratch` must have size m; its contents are reset on every call.
inline double sample_subset_sum(const SubsetSumProblem& p, Engine& eng,
                                std::vector<std::size_t>& scratch) {
  const std::size_t m = p.m();
  std::iota(scratch.begin(), scratch.end(), std::size_t{0});
  const auto a = p.a();
  double x = 0.0;
  for (std::size_t i = 0; i < p.k(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(eng, m - i));
    std::swap(scratch[i], scratch[j]);
    x += a[scratch[i]];
  }
  return x;
}

/// Monte Carlo frequency of pred(sum_S a); trial j uses its own seeded stream.
template <class Pred>
Proportion monte_carlo_subset(const SubsetSumProblem& p, Pred pred, std::size_t trials,
                              std::uint64_t seed, std::size_t workers = 0) {
  if (trials < 1) throw DomainError("trials must be >= 1");
  const auto hits = parallel_map(trials, workers, [&](std::size_t j) {
    thread_local std::vector<std::size_t> scratch;
    scratch.resize(p.m());
    Engine eng = make_engine(seed, Stream::kSubset, j);
    return pred(sample_subset_sum(p, eng, scratch)) ? 1 : 0;
  });
  std::size_t count = 0;
  for (int h : hits) count += static_cast<std::size_t>(h);
  return Proportion{count, trials};
}

struct MonteCarloEstimate {
  double p_hat = 0.0;
  double ci_halfwidth = 0.0;
};

/// p_hat of P{|sum_S a| >= (c k/m)|sum a|} with a 95% normal half-width
/// floored at 1/trials.
inline MonteCarloEstimate anticoncentration_probability(const SubsetSumProblem& p, double c,
                                                        std::size_t trials, std::uint64_t seed,
                                                        std::size_t workers = 0) {
  if (!(c > 0.0)) throw DomainError("anticoncentration_probability: c must be > 0");
  const double thr = anticoncentration_threshold(p, c);
  const auto prop = monte_carlo_subset(p, [thr](double x) { return std::abs(x) >= thr; },
                                       trials, seed, workers);
  return {prop.estimate(), normal_halfwidth(prop)};
}

inline double hoeffding_bound(double t, double a_l2_squared) {
  if (a_l2_squared == 0.0) return t > 0.0 ? 0.0 : 2.0;
  return 2.0 * std::exp(-2.0 * t * t / a_l2_squared);
}

struct HoeffdingCheck {
  double p_hat = 0.0;
  double ci_halfwidth = 0.0;
  double bound = 0.0;
  bool satisfied = false;
};

inline HoeffdingCheck hoeffding_tail_check(const SubsetSumProblem& p, double t, std::size_t trials,
                                           std::uint64_t seed, std::size_t workers = 0) {
  if (!(t >= 0.0)) throw DomainError("hoeffding_tail_check: t must be >= 0");
  const double mean = p.mean();
  const auto prop = monte_carlo_subset(
      p, [=](double x) { return std::abs(x - mean) >= t; }, trials, seed, workers);
  HoeffdingCheck out;
  out.p_hat = prop.estimate();
  out.ci_halfwidth = normal_halfwidth(prop);
  out.bound = hoeffding_bound(t, p.sum_squares());
  out.satisfied = out.p_hat <= out.bound + 3.0 * out.ci_halfwidth;
  return out;
}

/// FNV-1a over the IEEE bit patterns of a; identifies a weight vector in reports.
inline std::string weights_hash(std::span<const double> a) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : a) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &x, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xF];
  return out;
}

/// {0.01, 0.02, ..., 1.00}.
inline std::vector<double> default_anticoncentration_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 100; ++i) g.push_back(i / 100.0);
  return g;
}

struct AntiConcentrationSweep {
  double best_c = 0.0;  // largest grid c with P >= c k/m on every case (0 if none)
  std::vector<double> c_grid;
  std::vector<double> worst_margin;  // min over cases of P(c) - c k/m
  std::size_t cases = 0;
  bool exact = true;
};

/// Empirical constant for the anti-concentration lemma. Uses enumeration when
/// C(m,k) allows it, otherwise `trials` Monte Carlo draws per case.
inline AntiConcentrationSweep sweep_anticoncentration(const std::vector<SubsetSumProblem>& cases,
                                                      std::vector<double> c_grid,
                                                      std::size_t trials, std::uint64_t seed) {
  std::sort(c_grid.begin(), c_grid.end());
  AntiConcentrationSweep out;
  out.c_grid = c_grid;
  out.cases = cases.size();
  out.worst_margin.assign(c_grid.size(), 1.0);
  for (std::size_t ci = 0; ci < c_grid.size(); ++ci) {
    const double c = c_grid[ci];
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto& p = cases[i];
      double prob;
      if (binomial(p.m(), p.k()) <= kMaxEnumeration) {
        prob = enumerate_exact(p, subset_statistic::AntiConcentration{c});
      } else {
        out.exact = false;
        prob = anticoncentration_probability(p, c, trials, seed + i).p_hat;
      }
      const double margin = prob - c * static_cast<double>(p.k()) / static_cast<double>(p.m());
      out.worst_margin[ci] = std::min(out.worst_margin[ci], margin);
    }
  }
  for (std::size_t ci = 0; ci < c_grid.size(); ++ci)
    if (out.worst_margin[ci] >= 0.0) out.best_c = c_grid[ci];
  return out;
}

}  // namespace exspec
