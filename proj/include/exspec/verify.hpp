#pragma once

// Seeded invariant batteries behind `exspec verify`. Each check aggregates a
// family of cases into one pass/fail line with a short numeric detail.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "exspec/degree.hpp"
#include "exspec/ensembles.hpp"
#include "exspec/error.hpp"
#include "exspec/matrix_io.hpp"
#include "exspec/rng.hpp"
#include "exspec/scaling.hpp"
#include "exspec/spectra.hpp"
#include "exspec/subset.hpp"

namespace exspec {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
      if (!c.passed) out.push_back(c.name);
    return out;
  }
};

inline const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names{"subset", "scaling", "perron", "deg"};
  return names;
}

/// Random weights for (m, k) drawn from `eng`: half the cases use small
/// integers (exact arithmetic), the rest heavy-ish reals.
inline SubsetSumProblem random_subset_problem(Engine& eng, std::size_t max_m) {
  const std::size_t m = 1 + static_cast<std::size_t>(uniform_below(eng, max_m));
  const std::size_t k = 1 + static_cast<std::size_t>(uniform_below(eng, m));
  std::vector<double> a(m);
  const bool integer = uniform_below(eng, 2) == 0;
  for (auto& x : a) {
    if (integer) {
      x = static_cast<double>(static_cast<int>(uniform_below(eng, 11)) - 5);
    } else {
      x = standard_normal(eng) * std::exp(standard_normal(eng));
    }
  }
  return SubsetSumProblem(std::move(a), k);
}

/// Nonnegative x Perron vector of nonnegative m by power iteration on (I + M).
inline Vector power_iteration_vector(const Matrix& m, int iterations = 20000, double tol = 1e-15) {
  const Index n = m.rows();
  Vector x = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  for (int it = 0; it < iterations; ++it) {
    Vector y = x + m * x;
    y /= y.norm();
    const double change = (y - x).norm();
    x = std::move(y);
    if (change < tol) break;
  }
  return x;
}

namespace detail {

inline std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

inline void verify_subset(VerifyReport& rep) {
  const std::uint64_t seed = rep.seed;
  std::vector<SubsetSumProblem> corpus;
  for (std::uint64_t i = 0; i < 200; ++i) {
    Engine eng = make_engine(seed, Stream::kCorpus, i);
    corpus.push_back(random_subset_problem(eng, 12));
  }
  double worst2 = 0.0;
  std::size_t bad4 = 0;
  for (const auto& p : corpus) {
    const double exact = enumerate_exact(p, subset_statistic::Moment{2});
    worst2 = std::max(worst2, std::abs(second_moment_exact(p) - exact) / std::max(1.0, std::abs(exact)));
    const double e4 = enumerate_exact(p, subset_statistic::Moment{4});
    if (e4 > fourth_moment_bound(p) * (1.0 + 1e-12)) ++bad4;
  }
  rep.checks.push_back({"second moment closed form vs enumeration", worst2 <= 1e-12,
                        "200 cases, worst relative error " + sci(worst2)});
  rep.checks.push_back({"fourth moment bound dominates enumeration", bad4 == 0,
                        std::to_string(bad4) + " of 200 cases above the bound"});

  std::size_t bad_t = 0;
  for (const auto& p : corpus) {
    const auto t = inclusion_probabilities(p.m(), p.k());
    if (!(t[0] >= t[1] && t[1] >= t[2] && t[2] >= t[3] && t[3] >= 0.0)) ++bad_t;
  }
  rep.checks.push_back({"inclusion probabilities nonincreasing", bad_t == 0,
                        std::to_string(bad_t) + " violations"});

  const double fixed2 = second_moment_exact(SubsetSumProblem({1, 2, 3}, 2));
  const double fixed4 = fourth_moment_bound(SubsetSumProblem({1, 1, 1, 1}, 2));
  rep.checks.push_back({"reference values 50/3 and 216",
                        std::abs(fixed2 - 50.0 / 3.0) <= 1e-12 * 50.0 && std::abs(fixed4 - 216.0) <= 1e-9,
                        "second moment " + format_double(fixed2) + ", bound " + format_double(fixed4)});

  std::size_t cases = 0, bad_h = 0;
  for (std::uint64_t i = 0; i < 60; ++i) {
    Engine eng = make_engine(seed, Stream::kCorpus, 1000 + i);
    const auto p = random_subset_problem(eng, 14);
    const double l2 = std::sqrt(p.sum_squares());
    for (double f : {0.25, 0.5, 1.0, 2.0}) {
      ++cases;
      const double t = f * l2;
      if (t == 0.0) continue;
      if (enumerate_exact(p, subset_statistic::Tail{t}) > hoeffding_bound(t, p.sum_squares()) + 1e-12) ++bad_h;
    }
  }
  rep.checks.push_back({"exact tail below Hoeffding bound", bad_h == 0,
                        std::to_string(bad_h) + " of " + std::to_string(cases) + " (case, t) pairs above"});

  std::size_t mc_bad = 0;
  for (std::uint64_t i = 0; i < 5; ++i) {
    const auto& p = corpus[static_cast<std::size_t>(i)];
    const double t = 0.5 * std::sqrt(p.sum_squares());
    if (!hoeffding_tail_check(p, t, 4000, seed + i, 1).satisfied) ++mc_bad;
  }
  rep.checks.push_back({"Monte Carlo tail consistent with Hoeffding", mc_bad == 0,
                        std::to_string(mc_bad) + " of 5 cases inconsistent"});

  std::vector<SubsetSumProblem> in_range;
  for (const auto& p : corpus)
    if (!p.beyond_lemma_range()) in_range.push_back(p);
  const auto sweep = sweep_anticoncentration(in_range, default_anticoncentration_grid(), 2000, seed);
  rep.checks.push_back({"anti-concentration constant positive", sweep.best_c > 0.0,
                        "best c " + format_double(sweep.best_c) + " over " + std::to_string(in_range.size()) +
                            " cases"});
}

inline void verify_scaling(VerifyReport& rep) {
  const std::uint64_t seed = rep.seed;
  std::size_t used = 0, skipped = 0, bad_bound = 0, bad_beta = 0, bad_s1 = 0, bad_perron = 0, bad_id = 0,
              bad_dense = 0;
  for (std::uint64_t i = 0; i < 60; ++i) {
    const Index m = 8 + static_cast<Index>(i % 5) * 10;
    const int d = 3 + static_cast<int>(i % 4) * 2;
    const auto s = margin_perturbed_sample(m, d, 0.3, 0.08 * d, seed, i);
    const double delta = std::max(s.delta_min, 1e-6);
    const auto r = scaling_reduction(s.a, s.d, delta);
    if (!r.hypotheses_ok) {
      ++skipped;
      continue;
    }
    ++used;
    bad_bound += !r.conclusion_holds();
    bad_beta += !r.beta_within_bound();
    bad_s1 += std::abs(r.scaled_s1 - 1.0) > 1e-8;
    bad_perron += !r.gram_perron.matches_radius;
    bad_id += !r.svd_identity_holds();
    bad_dense += std::abs(r.beta - r.beta_dense) > 1e-9 * std::max(1.0, r.beta);
  }
  const std::string of = " of " + std::to_string(used) + " (" + std::to_string(skipped) + " skipped)";
  rep.checks.push_back({"norm bound 2 s2 + 6 delta", used > 0 && bad_bound == 0, std::to_string(bad_bound) + of});
  rep.checks.push_back({"beta <= 6 delta", used > 0 && bad_beta == 0, std::to_string(bad_beta) + of});
  rep.checks.push_back({"scaled matrix has s1 = 1", used > 0 && bad_s1 == 0, std::to_string(bad_s1) + of});
  rep.checks.push_back({"positive eigenvector gives the top eigenvalue", used > 0 && bad_perron == 0,
                        std::to_string(bad_perron) + of});
  rep.checks.push_back({"s2 of scaled matrix equals deflated norm", used > 0 && bad_id == 0,
                        std::to_string(bad_id) + of});
  rep.checks.push_back({"beta closed form vs dense", used > 0 && bad_dense == 0, std::to_string(bad_dense) + of});

  double worst = 0.0;
  for (std::uint64_t i = 0; i < 30; ++i) {
    EnsembleSpec spec;
    spec.kind = EnsembleKind::kPermSumRegular;
    spec.n = 16 + static_cast<Index>(i % 3) * 24;
    spec.d = 2 + static_cast<int>(i % 4);
    spec.seed = seed;
    const auto a = sample(spec, i);
    worst = std::max(worst, std::abs(s2_via_centering(a, spec.d) - second_singular(a)) / std::max(1.0, 1.0 * spec.d));
  }
  rep.checks.push_back({"centering identity on regular samples", worst <= 1e-8, "worst gap " + sci(worst)});
}

inline void verify_perron(VerifyReport& rep) {
  const std::uint64_t seed = rep.seed;
  std::size_t bad = 0;
  for (std::uint64_t i = 0; i < 40; ++i) {
    Engine eng = make_engine(seed, Stream::kCorpus, 2000 + i);
    Matrix m(8, 8);
    for (Index j = 0; j < 8; ++j)
      for (Index r = 0; r < 8; ++r) m(r, j) = uniform01(eng);
    const auto p = perron_check(m, power_iteration_vector(m));
    bad += !p.matches_radius;
  }
  rep.checks.push_back({"power-iteration vector is Perron", bad == 0, std::to_string(bad) + " of 40 failed"});

  std::size_t bad_reg = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    EnsembleSpec spec;
    spec.kind = i % 2 ? EnsembleKind::kRegularDigraph : EnsembleKind::kPermSumRegular;
    spec.n = 12 + static_cast<Index>(i);
    spec.d = 3;
    spec.seed = seed;
    const auto a = sample(spec, i);
    const auto p = perron_check(a.entries(), Vector::Ones(spec.n));
    bad_reg += !(p.matches_radius && std::abs(p.rho - 3.0) <= 1e-12);
  }
  rep.checks.push_back({"ones vector on d-regular samples", bad_reg == 0, std::to_string(bad_reg) + " of 20 failed"});

  const auto flat = perron_check(Matrix::Ones(3, 3), Vector::Ones(3));
  rep.checks.push_back({"all-ones 3x3", flat.matches_radius && std::abs(flat.rho - 3.0) <= 1e-12,
                        "rho " + format_double(flat.rho)});

  Matrix cyc = Matrix::Zero(4, 4);
  for (Index i = 0; i < 4; ++i) cyc(i, (i + 1) % 4) = 1.0;
  Vector skew(4);
  skew << 1.0, 2.0, 1.0, 2.0;
  const auto off = perron_check(cyc, skew);
  rep.checks.push_back({"non-eigenvector rejected", !off.is_eigen, "residual " + sci(off.residual)});
}

inline void verify_deg(VerifyReport& rep) {
  const std::uint64_t seed = rep.seed;
  const RegularityParams p(4.0, 1.0);
  const DegreeProfile flat(Vector::Constant(8, 4.0), Vector::Constant(8, 4.0));
  rep.checks.push_back({"constant profile is a member", deg_membership(flat, p).member, ""});

  Vector u = Vector::Constant(8, 4.0);
  u(0) += 10.0;
  Vector v = Vector::Constant(8, 4.0);
  v(1) += 10.0;
  const auto big = deg_membership(DegreeProfile(u, v), p);
  rep.checks.push_back({"one far coordinate violates level 2", !big.member && big.worst_k == 2,
                        "worst_k " + std::to_string(big.worst_k)});

  Vector w = Vector::Constant(8, 4.0);
  w(0) += 1.0;
  const auto mass = deg_membership(DegreeProfile(w, Vector::Constant(8, 4.0)), p);
  rep.checks.push_back({"unequal masses rejected", !mass.member, "l1 gap " + format_double(mass.l1_gap)});

  // Exactness of the finite level range on random profiles.
  std::size_t mismatch = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    Engine eng = make_engine(seed, Stream::kCorpus, 3000 + i);
    const Index m = 2 + static_cast<Index>(uniform_below(eng, 40));
    Vector x(m);
    for (Index j = 0; j < m; ++j) x(j) = 5.0 + 2.0 * standard_normal(eng);
    const double scale = static_cast<double>(m);
    bool all = true;
    for (int k = 1; k <= 60; ++k) {
      const auto count = static_cast<double>(((x.array() - 5.0).abs() > k * 0.7).count());
      if (count > scale * std::exp(-static_cast<double>(k) * k)) {
        all = false;
        break;
      }
    }
    mismatch += all != (first_violated_level(x, 5.0, 0.7, scale) == 0);
  }
  rep.checks.push_back({"finite level range matches levels 1..60", mismatch == 0,
                        std::to_string(mismatch) + " of 200 disagree"});

  // Corner event implications on regular samples.
  std::size_t events = 0, bad_inf = 0, bad_l2 = 0;
  EnsembleSpec spec;
  spec.kind = EnsembleKind::kRegularDigraph;
  spec.n = 64;
  spec.d = 8;
  spec.seed = seed;
  const double d = 8.0;
  for (std::uint64_t i = 0; i < 40; ++i) {
    const auto a = sample(spec, i);
    const auto t = permuted_corner(a, uniform_permutation(spec.n, seed, i));
    for (double delta : {0.01, 0.5, 2.0, std::sqrt(d)}) {
      const RegularityParams r(d, delta);
      if (!corner_event_E(t, r, spec.n)) continue;
      ++events;
      for (const Vector& x : {column_sums(t), row_sums(t)}) {
        const Vector dev = x.array() - d / 2.0;
        if (r.large_degree_hypothesis(spec.n, 100.0) && dev.lpNorm<Eigen::Infinity>() > d / 6.0) ++bad_inf;
        if (dev.norm() > 4.0 * delta * std::sqrt(static_cast<double>(spec.n))) ++bad_l2;
      }
    }
  }
  rep.checks.push_back({"corner event implies l2 deviation bound", bad_l2 == 0,
                        std::to_string(bad_l2) + " violations in " + std::to_string(events) + " events"});
  rep.checks.push_back({"corner event implies sup deviation bound", bad_inf == 0,
                        std::to_string(bad_inf) + " violations"});

  // Monotone in delta on fixed samples, and vanishing as delta -> 0.
  std::size_t non_monotone = 0, at_tiny = 0;
  for (std::uint64_t i = 0; i < 40; ++i) {
    const auto a = sample(spec, 100 + i);
    const auto t = permuted_corner(a, uniform_permutation(spec.n, seed, 100 + i));
    bool prev = false;
    for (double delta : {1e-3, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      const bool e = corner_event_E(t, RegularityParams(d, delta), spec.n);
      if (prev && !e) ++non_monotone;
      prev = e;
    }
    at_tiny += corner_event_E(t, RegularityParams(d, 1e-3), spec.n);
  }
  rep.checks.push_back({"corner event monotone in delta", non_monotone == 0, std::to_string(non_monotone) + " drops"});
  rep.checks.push_back({"corner event vanishes as delta -> 0", at_tiny == 0,
                        std::to_string(at_tiny) + " of 40 at delta = 1e-3"});
}

}  // namespace detail

/// suite in {subset, scaling, perron, deg, all}.
inline VerifyReport run_verify(const std::string& suite, std::uint64_t seed) {
  VerifyReport rep;
  rep.suite = suite;
  rep.seed = seed;
  const bool all = suite == "all";
  if (!all && std::find(verify_suites().begin(), verify_suites().end(), suite) == verify_suites().end())
    throw DomainError("unknown verify suite '" + suite + "' (expected subset, scaling, perron, deg or all)");
  if (all || suite == "subset") detail::verify_subset(rep);
  if (all || suite == "scaling") detail::verify_scaling(rep);
  if (all || suite == "perron") detail::verify_perron(rep);
  if (all || suite == "deg") detail::verify_deg(rep);
  return rep;
}

inline void to_json(nlohmann::json& j, const VerifyReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j = {{"suite", r.suite}, {"seed", r.seed}, {"passed", r.passed()}, {"checks", checks}, {"failures", r.failures()}};
}

}  // namespace exspec
