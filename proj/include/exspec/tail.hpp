#pragma once

// Monte Carlo harness for the norm-versus-corner comparisons. Every
// experiment draws trial j from streams keyed by (seed, j), keeps per-trial
// statistics, and aggregates them afterwards; results do not depend on the
// worker count. The unnamed universal constants are measured, never assumed:
// each curve reports the largest grid constant consistent with the data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "exspec/degree.hpp"
#include "exspec/ensembles.hpp"
#include "exspec/error.hpp"
#include "exspec/matrix.hpp"
#include "exspec/matrix_io.hpp"
#include "exspec/parallel.hpp"
#include "exspec/spectra.hpp"
#include "exspec/stats.hpp"

namespace exspec {

/// Relative slack for threshold comparisons (x >= t is tested as
/// x >= t - 1e-9 |t|) so exact ties survive SVD round-off.
inline constexpr double kCompareRelTol = 1e-9;

/// {0.01, 0.02, ..., 1.00}.
inline std::vector<double> default_c_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 100; ++i) g.push_back(i / 100.0);
  return g;
}

/// Tail probabilities for both sides of P_left(x) <= factor * P_right(x).
struct TailCurve {
  std::string experiment;
  std::string threshold_name = "tau";
  std::vector<double> thresholds;
  std::vector<double> p_left, ci_left, p_right, ci_right;
  std::vector<int> holds;  // Wilson lower(left) <= factor * Wilson upper(right)
  double c = 0.0;
  double factor = 1.0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;

  bool all_hold() const {
    return std::all_of(holds.begin(), holds.end(), [](int h) { return h != 0; });
  }
  bool is_antitone() const {
    for (std::size_t i = 1; i < thresholds.size(); ++i)
      if (p_left[i] > p_left[i - 1] || p_right[i] > p_right[i - 1]) return false;
    return true;
  }
};

struct ConstantEstimate {
  std::string name;
  double value = 0.0;
  std::string method;
  std::size_t trials = 0;
};

namespace detail {

/// |{j : x_j >= t}| with the relative comparison slack.
inline std::size_t count_at_least(const std::vector<double>& x, double t) {
  const double cut = t - kCompareRelTol * std::abs(t);
  return static_cast<std::size_t>(std::count_if(x.begin(), x.end(), [cut](double v) { return v >= cut; }));
}

inline bool holds_with_slack(const Proportion& left, const Proportion& right, double factor) {
  return wilson_interval(left).lo <= factor * wilson_interval(right).hi;
}

/// Sorted positive deciles (q = 0.1..0.9) of `x`; {1} when none is positive.
/// Deciles equal up to the comparison slack collapse to one threshold, so a
/// deterministic statistic (||A|| = d on constant margins) gives a single point.
inline std::vector<double> decile_thresholds(const std::vector<double>& x) {
  std::vector<double> t;
  for (int q = 1; q <= 9; ++q) {
    const double v = quantile(x, q / 10.0);
    if (v > 0.0 && (t.empty() || v > t.back() * (1.0 + 1e3 * kCompareRelTol))) t.push_back(v);
  }
  if (t.empty()) t.push_back(1.0);
  return t;
}

/// right_stat[j] counts at threshold x when event[j] and right_stat[j] >= scale * x.
inline TailCurve build_curve(std::string experiment, const std::vector<double>& left_stat,
                             const std::vector<double>& right_stat, const std::vector<int>& event,
                             std::vector<double> thresholds, double right_scale, double factor,
                             std::uint64_t seed) {
  std::sort(thresholds.begin(), thresholds.end());
  TailCurve curve;
  curve.experiment = std::move(experiment);
  curve.thresholds = thresholds;
  curve.factor = factor;
  curve.trials = left_stat.size();
  curve.seed = seed;
  const std::size_t n = left_stat.size();
  for (double t : thresholds) {
    const Proportion left{count_at_least(left_stat, t), n};
    std::size_t r = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (event[j] && right_stat[j] >= right_scale * t - kCompareRelTol * std::abs(right_scale * t)) ++r;
    const Proportion right{r, n};
    curve.p_left.push_back(left.estimate());
    curve.ci_left.push_back(wilson_interval(left).halfwidth());
    curve.p_right.push_back(right.estimate());
    curve.ci_right.push_back(wilson_interval(right).halfwidth());
    curve.holds.push_back(holds_with_slack(left, right, factor) ? 1 : 0);
  }
  return curve;
}

/// Largest grid c for which P_left(x) <= (1/c) P_right(c x) holds at every threshold.
inline double best_constant(const std::vector<double>& left_stat, const std::vector<double>& right_stat,
                            const std::vector<int>& event, const std::vector<double>& thresholds,
                            const std::vector<double>& c_grid, double right_base_scale = 1.0) {
  double best = 0.0;
  for (double c : c_grid) {
    const auto curve = build_curve("", left_stat, right_stat, event, thresholds,
                                   right_base_scale * c, 1.0 / c, 0);
    if (curve.all_hold()) best = std::max(best, c);
  }
  return best;
}

inline void require_zero_diagonal(const SquareMatrix& m) {
  if (!m.has_zero_diagonal()) throw DomainError("experiment needs zero-diagonal matrices");
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct Lemma31Result {
  double norm_m = 0.0;
  std::vector<double> c_grid;
  std::vector<double> p_hat;  // P{||T|| >= c ||M||}
  std::vector<double> ci;     // Wilson half-widths
  std::vector<double> corner_norms;
  double best_c = 0.0;  // max grid c with p_hat + ci >= c
  std::size_t trials = 0;
};

/// Distribution of ||T(sigma)|| / ||M|| over fresh uniform sigma for one fixed
/// zero-diagonal M with n >= 8.
inline Lemma31Result lemma31_fraction(const SquareMatrix& m, std::size_t trials, std::uint64_t seed,
                                      std::size_t workers = 0,
                                      std::vector<double> c_grid = default_c_grid()) {
  if (m.n() < 8) throw DomainError("lemma31_fraction needs n >= 8, got n = " + std::to_string(m.n()));
  detail::require_zero_diagonal(m);
  if (trials < 1) throw DomainError("trials must be >= 1");
  Lemma31Result r;
  r.norm_m = spectral_norm(m);
  r.trials = trials;
  std::sort(c_grid.begin(), c_grid.end());
  r.c_grid = c_grid;
  r.corner_norms = parallel_map(trials, workers, [&](std::size_t j) {
    return spectral_norm(permuted_corner(m, uniform_permutation(m.n(), seed, j)));
  });
  for (double c : c_grid) {
    const Proportion p{detail::count_at_least(r.corner_norms, c * r.norm_m), trials};
    r.p_hat.push_back(p.estimate());
    r.ci.push_back(wilson_interval(p).halfwidth());
    if (p.estimate() + r.ci.back() >= c) r.best_c = c;
  }
  return r;
}

// ---------------------------------------------------------------------------

/// Conditioning event for the corner comparison.
struct CornerEvent {
  enum class Kind { kNone, kNearConstantMargins } kind = Kind::kNone;
  double d = 0.0;
  double delta = 0.0;

  static CornerEvent none() { return {}; }
  static CornerEvent near_constant_margins(double d, double delta) {
    RegularityParams check(d, delta);
    return {Kind::kNearConstantMargins, check.d, check.delta};
  }
};

struct Theorem1Result {
  TailCurve curve;
  double best_c = 0.0;
  double event_rate = 0.0;
  std::vector<double> norms_m;
  std::vector<double> norms_t;
};

namespace detail {
struct CornerTrial {
  double norm_m = 0.0;
  double norm_t = 0.0;
  int event = 1;
};
}  // namespace detail

/// P{||M|| >= tau} against (1/c) P{||T|| >= c tau AND event}, T the top-right
/// corner of sigma(M) for sigma independent of M. Empty `thresholds` means
/// the deciles of the observed ||M||.
inline Theorem1Result theorem1_curve(const EnsembleSpec& spec, double c, std::vector<double> thresholds,
                                     std::size_t trials, std::uint64_t seed,
                                     CornerEvent event = CornerEvent::none(), std::size_t workers = 0) {
  spec.validate();
  if (spec.n < 8) throw DomainError("theorem1_curve needs n >= 8");
  if (!(c > 0.0 && c <= 1.0)) throw DomainError("theorem1_curve needs c in (0, 1]");
  if (trials < 1) throw DomainError("trials must be >= 1");
  const auto rows = parallel_map(trials, workers, [&](std::size_t j) {
    const SquareMatrix m = sample(spec, j);
    detail::require_zero_diagonal(m);
    const CornerMatrix t = permuted_corner(m, uniform_permutation(spec.n, seed, j));
    detail::CornerTrial r;
    r.norm_m = spectral_norm(m);
    r.norm_t = spectral_norm(t);
    if (event.kind == CornerEvent::Kind::kNearConstantMargins) {
      if (!has_constant_margins(m.entries(), event.d))
        throw DomainError("near-constant-margin event needs samples with all margins d");
      r.event = corner_event_E(t, RegularityParams(event.d, event.delta), spec.n) ? 1 : 0;
    }
    return r;
  });
  Theorem1Result out;
  std::vector<int> ev;
  for (const auto& r : rows) {
    out.norms_m.push_back(r.norm_m);
    out.norms_t.push_back(r.norm_t);
    ev.push_back(r.event);
  }
  if (thresholds.empty()) thresholds = detail::decile_thresholds(out.norms_m);
  out.curve = detail::build_curve("theorem1", out.norms_m, out.norms_t, ev, thresholds, c, 1.0 / c, seed);
  out.curve.c = c;
  out.best_c = detail::best_constant(out.norms_m, out.norms_t, ev, out.curve.thresholds, default_c_grid());
  out.event_rate = static_cast<double>(std::count(ev.begin(), ev.end(), 1)) / static_cast<double>(trials);
  return out;
}

/// P{||M|| >= t} <= 4 P{||M^(12)|| >= t/4} on separately exchangeable samples.
inline TailCurve separately_exchangeable_curve(const EnsembleSpec& spec, std::vector<double> thresholds,
                                               std::size_t trials, std::uint64_t seed,
                                               std::size_t workers = 0) {
  spec.validate();
  if (spec.kind != EnsembleKind::kSeparatelyExchangeable)
    throw DomainError("separately_exchangeable_curve needs a SeparatelyExchangeable ensemble");
  if (trials < 1) throw DomainError("trials must be >= 1");
  const auto rows = parallel_map(trials, workers, [&](std::size_t j) {
    const SquareMatrix m = sample(spec, j);
    return std::pair<double, double>(spectral_norm(m), spectral_norm(block_decompose(m).b12));
  });
  std::vector<double> left, right;
  for (const auto& [a, b] : rows) {
    left.push_back(a);
    right.push_back(b);
  }
  if (thresholds.empty()) thresholds = detail::decile_thresholds(left);
  auto curve = detail::build_curve("separately_exchangeable", left, right, std::vector<int>(trials, 1),
                                   thresholds, 0.25, 4.0, seed);
  curve.c = 0.25;
  return curve;
}

// ---------------------------------------------------------------------------

struct Lemma41Result {
  double p_e = 0.0;
  double ci = 0.0;  // Wilson half-width
  std::size_t trials = 0;
  double hypothesis_fraction = 0.0;  // samples with C||row_i||_2, C||col_i||_2 <= delta
  double hypothesis_c = 1.0;
  bool large_degree = false;  // d / sqrt(ln n) >= 100 delta
  std::size_t inf_bound_violations = 0;  // E and large_degree, yet ||u - d/2||_inf > d/6
  std::size_t l2_bound_violations = 0;   // E, yet ||u - d/2||_2 > 4 delta sqrt(n)
};

inline Lemma41Result lemma41_frequency(const EnsembleSpec& spec, double d, double delta,
                                       std::size_t trials, std::uint64_t seed, double hypothesis_c = 1.0,
                                       std::size_t workers = 0) {
  spec.validate();
  const RegularityParams params(d, delta);
  if (trials < 1) throw DomainError("trials must be >= 1");
  const Index n = spec.n;
  const bool large_degree = params.large_degree_hypothesis(n, 100.0);
  struct Row {
    int event = 0, hyp = 0, inf_bad = 0, l2_bad = 0;
  };
  const auto rows = parallel_map(trials, workers, [&](std::size_t j) {
    const SquareMatrix a = sample(spec, j);
    if (!has_constant_margins(a.entries(), d))
      throw DomainError("lemma41_frequency needs samples with all margins d");
    Row r;
    const double max_l2 = std::max(a.entries().rowwise().norm().maxCoeff(),
                                   a.entries().colwise().norm().maxCoeff());
    r.hyp = hypothesis_c * max_l2 <= delta ? 1 : 0;
    const CornerMatrix t = permuted_corner(a, uniform_permutation(n, seed, j));
    r.event = corner_event_E(t, params, n) ? 1 : 0;
    if (r.event) {
      const double half = d / 2.0;
      for (const Vector& x : {column_sums(t), row_sums(t)}) {
        const Vector dev = x.array() - half;
        if (large_degree && dev.lpNorm<Eigen::Infinity>() > d / 6.0) r.inf_bad = 1;
        if (dev.norm() > 4.0 * delta * std::sqrt(static_cast<double>(n))) r.l2_bad = 1;
      }
    }
    return r;
  });
  Lemma41Result out;
  out.trials = trials;
  out.hypothesis_c = hypothesis_c;
  out.large_degree = large_degree;
  std::size_t events = 0, hyp = 0;
  for (const auto& r : rows) {
    events += static_cast<std::size_t>(r.event);
    hyp += static_cast<std::size_t>(r.hyp);
    out.inf_bound_violations += static_cast<std::size_t>(r.inf_bad);
    out.l2_bound_violations += static_cast<std::size_t>(r.l2_bad);
  }
  const Proportion p{events, trials};
  out.p_e = p.estimate();
  out.ci = wilson_interval(p).halfwidth();
  out.hypothesis_fraction = static_cast<double>(hyp) / static_cast<double>(trials);
  return out;
}

// ---------------------------------------------------------------------------

struct Theorem2Result {
  TailCurve curve;  // thresholds are L; sides P{s2(A) >= L delta}, P{s2(T) >= c L delta AND Deg}
  double best_c = 0.0;
  double degree_ratio = 0.0;  // d / (delta sqrt(ln n))
  double hypothesis_c = 1.0;
  bool hypothesis_ok = false;
  double member_rate = 0.0;
  std::vector<double> s2_a;
  std::vector<double> s2_t;
  // Proof-step checks (populated when proof_checks is on).
  double max_relabel_gap = 0.0;           // max |s2(A) - s2(sigma(A))|
  std::size_t row_chain_violations = 0;   // s2(A) > max_i ||row_i(A)||_2 + ||B||
  std::size_t delta_chain_violations = 0; // s2(A) > delta + ||B|| where max_i ||row_i||_2 <= delta
  std::size_t delta_chain_applicable = 0;
};

inline Theorem2Result theorem2_curve(const EnsembleSpec& spec, double d, double delta,
                                     std::vector<double> l_grid, std::size_t trials, std::uint64_t seed,
                                     double c = 0.01, double hypothesis_c = 1.0, bool proof_checks = true,
                                     std::size_t workers = 0) {
  spec.validate();
  const RegularityParams params(d, delta);
  if (spec.n < 2) throw DomainError("theorem2_curve needs n >= 2");
  if (!(c > 0.0 && c <= 1.0)) throw DomainError("theorem2_curve needs c in (0, 1]");
  if (trials < 1) throw DomainError("trials must be >= 1");
  const Index n = spec.n;
  const RegularityParams half(d / 2.0, delta);
  struct Row {
    double s2_a = 0.0, s2_t = 0.0, gap = 0.0;
    int member = 0, row_bad = 0, delta_bad = 0, delta_app = 0;
  };
  const auto rows = parallel_map(trials, workers, [&](std::size_t j) {
    const SquareMatrix a = sample(spec, j);
    if (!has_constant_margins(a.entries(), d))
      throw DomainError("theorem2_curve needs samples with all margins d");
    Row r;
    r.s2_a = second_singular(a);
    const CornerMatrix t = top_right_corner(a);
    r.s2_t = second_singular(t);
    r.member = deg_membership(DegreeProfile::of(t.entries()), half).member ? 1 : 0;
    if (proof_checks) {
      const SquareMatrix relabeled = apply_permutation(a, uniform_permutation(n, seed, j));
      r.gap = std::abs(second_singular(relabeled) - r.s2_a);
      const double b_norm = spectral_norm(centered_offdiag(a, d));
      const double max_row = a.entries().rowwise().norm().maxCoeff();
      const double slack = kIdentityTol * std::max(1.0, d);
      r.row_bad = r.s2_a > max_row + b_norm + slack ? 1 : 0;
      if (max_row <= delta) {
        r.delta_app = 1;
        r.delta_bad = r.s2_a > delta + b_norm + slack ? 1 : 0;
      }
    }
    return r;
  });
  Theorem2Result out;
  out.hypothesis_c = hypothesis_c;
  out.degree_ratio = params.degree_ratio(n);
  out.hypothesis_ok = params.large_degree_hypothesis(n, hypothesis_c);
  std::vector<int> member;
  std::vector<double> left_l, right_l;
  for (const auto& r : rows) {
    out.s2_a.push_back(r.s2_a);
    out.s2_t.push_back(r.s2_t);
    left_l.push_back(r.s2_a / delta);
    right_l.push_back(r.s2_t / delta);
    member.push_back(r.member);
    out.max_relabel_gap = std::max(out.max_relabel_gap, r.gap);
    out.row_chain_violations += static_cast<std::size_t>(r.row_bad);
    out.delta_chain_violations += static_cast<std::size_t>(r.delta_bad);
    out.delta_chain_applicable += static_cast<std::size_t>(r.delta_app);
  }
  out.member_rate = static_cast<double>(std::count(member.begin(), member.end(), 1)) / static_cast<double>(trials);
  if (l_grid.empty()) l_grid = detail::decile_thresholds(left_l);
  out.curve = detail::build_curve("theorem2", left_l, right_l, member, l_grid, c, 1.0 / c, seed);
  out.curve.threshold_name = "L";
  out.curve.c = c;
  out.best_c = detail::best_constant(left_l, right_l, member, out.curve.thresholds, default_c_grid());
  return out;
}

// ---------------------------------------------------------------------------
// Equidistribution shadows. Each compared sample is drawn from its own
// ensemble indices so the two-sample KS critical values apply.

struct KsComparison {
  std::string name;
  double statistic = 0.0;
  double critical = 0.0;  // 1% level
  bool passed() const { return statistic < critical; }
};

inline KsComparison ks_compare(std::string name, std::vector<double> a, std::vector<double> b) {
  KsComparison k;
  k.name = std::move(name);
  k.critical = ks_critical_value(a.size(), b.size(), 0.01);
  k.statistic = ks_statistic(std::move(a), std::move(b));
  return k;
}

/// {s2(A) vs s2(pi(A'))} and {s2(T) vs s2(T_s)}, T the corner of A and T_s the
/// corner of sigma(A') for independent draws A, A'.
inline std::vector<KsComparison> relabeling_shadows(const EnsembleSpec& spec, std::size_t samples,
                                                    std::uint64_t seed, std::size_t workers = 0) {
  spec.validate();
  struct Row {
    double s2_a = 0.0, s2_pa = 0.0, s2_t = 0.0, s2_ts = 0.0;
  };
  const auto rows = parallel_map(samples, workers, [&](std::size_t j) {
    const SquareMatrix a = sample(spec, 2 * j);
    const SquareMatrix b = sample(spec, 2 * j + 1);
    const SquareMatrix pb = apply_permutation(b, uniform_permutation(spec.n, seed, j));
    Row r;
    r.s2_a = second_singular(a);
    r.s2_pa = second_singular(pb);
    r.s2_t = second_singular(top_right_corner(a));
    r.s2_ts = second_singular(top_right_corner(pb));
    return r;
  });
  std::vector<double> sa, spa, st, sts;
  for (const auto& r : rows) {
    sa.push_back(r.s2_a);
    spa.push_back(r.s2_pa);
    st.push_back(r.s2_t);
    sts.push_back(r.s2_ts);
  }
  return {ks_compare("s2(A) vs s2(sigma(A))", sa, spa), ks_compare("s2(T) vs s2(T_s)", st, sts)};
}

/// Pairwise KS of the four block norms of a separately exchangeable ensemble.
inline std::vector<KsComparison> block_shadows(const EnsembleSpec& spec, std::size_t samples,
                                               std::size_t workers = 0) {
  spec.validate();
  if (spec.kind != EnsembleKind::kSeparatelyExchangeable)
    throw DomainError("block_shadows needs a SeparatelyExchangeable ensemble");
  const auto rows = parallel_map(samples, workers, [&](std::size_t j) {
    std::array<double, 4> norms{};
    for (std::size_t b = 0; b < 4; ++b) {
      const auto blocks = block_decompose(sample(spec, 4 * j + b));
      const CornerMatrix* pick[4] = {&blocks.b11, &blocks.b12, &blocks.b21, &blocks.b22};
      norms[b] = spectral_norm(*pick[b]);
    }
    return norms;
  });
  std::array<std::vector<double>, 4> cols;
  for (const auto& r : rows)
    for (std::size_t b = 0; b < 4; ++b) cols[b].push_back(r[b]);
  static const char* names[4] = {"M11", "M12", "M21", "M22"};
  std::vector<KsComparison> out;
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b)
      out.push_back(ks_compare(std::string(names[a]) + " vs " + names[b], cols[a], cols[b]));
  return out;
}

// ---------------------------------------------------------------------------

/// One row per threshold: tau,p_left,ci_left,p_right,ci_right.
inline std::string to_csv(const TailCurve& c) {
  std::string out = c.threshold_name + ",p_left,ci_left,p_right,ci_right\n";
  for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
    out += format_double(c.thresholds[i]) + ',' + format_double(c.p_left[i]) + ',' +
           format_double(c.ci_left[i]) + ',' + format_double(c.p_right[i]) + ',' +
           format_double(c.ci_right[i]) + '\n';
  }
  return out;
}

inline void to_json(nlohmann::json& j, const TailCurve& c) {
  j = {{"experiment", c.experiment}, {"threshold_name", c.threshold_name},
       {"thresholds", c.thresholds}, {"p_left", c.p_left},
       {"ci_left", c.ci_left},       {"p_right", c.p_right},
       {"ci_right", c.ci_right},     {"holds", c.holds},
       {"c", c.c},                   {"factor", c.factor},
       {"trials", c.trials},         {"seed", c.seed}};
}

inline void to_json(nlohmann::json& j, const ConstantEstimate& c) {
  j = {{"name", c.name}, {"value", c.value}, {"method", c.method}, {"trials", c.trials}};
}

inline void to_json(nlohmann::json& j, const KsComparison& k) {
  j = {{"name", k.name}, {"statistic", k.statistic}, {"critical", k.critical}, {"passed", k.passed()}};
}

}  // namespace exspec
