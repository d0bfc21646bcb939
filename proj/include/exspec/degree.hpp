#pragma once

// Degree-profile tests: membership in Deg_m(d, delta) and the near-constant
// corner-margin event. Both reduce to one exceedance-count kernel
//   |{i : |x_i - target| > k delta}| <= scale * exp(-k^2)  for all k >= 1,
// with (target, scale) = (d, m) for Deg and (d/2, n_parent) for the event.

#include <algorithm>
#include <cmath>
#include <string>

#include "exspec/error.hpp"
#include "exspec/matrix.hpp"

namespace exspec {

struct RegularityParams {
  double d;
  double delta;

  RegularityParams(double d_, double delta_) : d(d_), delta(delta_) {
    if (!(d > 0.0)) throw DomainError("regularity parameter d must be > 0");
    if (!(delta > 0.0)) throw DomainError("regularity parameter delta must be > 0");
  }

  /// d / (delta sqrt(ln n)); the large-degree hypothesis asks for >= C.
  double degree_ratio(Index n) const {
    return d / (delta * std::sqrt(std::log(static_cast<double>(n))));
  }
  bool large_degree_hypothesis(Index n, double c_const) const {
    return degree_ratio(n) >= c_const;
  }
};

struct DegreeProfile {
  Vector u;  // column sums
  Vector v;  // row sums

  DegreeProfile(Vector u_, Vector v_) : u(std::move(u_)), v(std::move(v_)) {
    if (u.size() != v.size())
      throw DimensionError("degree profile: u has length " + std::to_string(u.size()) +
                           " but v has length " + std::to_string(v.size()));
    if (u.size() < 1) throw DimensionError("degree profile must have length >= 1");
  }

  static DegreeProfile of(const Matrix& a) { return {column_sums(a), row_sums(a)}; }
  Index m() const { return u.size(); }
};

/// ceil(sqrt(ln scale)) + 1. One past this level scale*exp(-k^2) < 1, so the
/// condition there means "no exceedances", and all higher levels follow.
inline int exceedance_k_max(double scale) {
  return static_cast<int>(std::ceil(std::sqrt(std::max(0.0, std::log(scale))))) + 1;
}

/// Smallest k in 1..k_max whose count condition fails; 0 if none does.
/// Checking up to k_max is equivalent to checking every k in N.
inline int first_violated_level(const Vector& x, double target, double delta, double scale) {
  const int k_max = exceedance_k_max(scale);
  const Vector dev = (x.array() - target).abs();
  for (int k = 1; k <= k_max; ++k) {
    const double level = k * delta;
    const auto count = static_cast<double>((dev.array() > level).count());
    if (count > scale * std::exp(-static_cast<double>(k) * k)) return k;
  }
  return 0;
}

struct DegMembership {
  bool member = false;
  int worst_k = 0;  // smallest violated level over u and v; 0 if the counts hold
  double l1_gap = 0.0;
  double l1_tol = 0.0;
  int k_max = 0;
  Index m = 0;
  double d = 0.0;
  double delta = 0.0;
};

/// (u, v) in Deg_m(d, delta): equal l1 masses (relative tolerance
/// 1e-8 m max(1,d)) and both exceedance families hold.
inline DegMembership deg_membership(const DegreeProfile& p, const RegularityParams& r) {
  DegMembership out;
  out.m = p.m();
  out.d = r.d;
  out.delta = r.delta;
  const double m = static_cast<double>(p.m());
  out.l1_gap = std::abs(p.u.lpNorm<1>() - p.v.lpNorm<1>());
  out.l1_tol = 1e-8 * m * std::max(1.0, r.d);
  out.k_max = exceedance_k_max(m);
  const int ku = first_violated_level(p.u, r.d, r.delta, m);
  const int kv = first_violated_level(p.v, r.d, r.delta, m);
  out.worst_k = (ku && kv) ? std::min(ku, kv) : std::max(ku, kv);
  out.member = out.l1_gap <= out.l1_tol && out.worst_k == 0;
  return out;
}

/// The corner event for a corner T of an n_parent x n_parent matrix: targets
/// d/2 and count thresholds n_parent exp(-k^2), for both u(T) and v(T).
inline bool corner_event_E(const CornerMatrix& t, const RegularityParams& r, Index n_parent) {
  const double scale = static_cast<double>(n_parent);
  const double target = r.d / 2.0;
  return first_violated_level(column_sums(t), target, r.delta, scale) == 0 &&
         first_violated_level(row_sums(t), target, r.delta, scale) == 0;
}

inline bool corner_event_E(const CornerMatrix& t, const RegularityParams& r) {
  return corner_event_E(t, r, t.parent_n());
}

}  // namespace exspec
