#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "exspec/error.hpp"

namespace exspec {

inline constexpr double kZ95 = 1.959963984540054;

struct Proportion {
  std::size_t successes = 0;
  std::size_t trials = 0;

  double estimate() const {
    return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0;
  }
};

/// 95% normal-approximation half-width, floored at 1/trials.
inline double normal_halfwidth(const Proportion& p) {
  if (p.trials == 0) return 1.0;
  const double n = static_cast<double>(p.trials);
  const double q = p.estimate();
  return std::max(kZ95 * std::sqrt(q * (1.0 - q) / n), 1.0 / n);
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double halfwidth() const { return 0.5 * (hi - lo); }
};

/// Wilson score interval.
inline Interval wilson_interval(const Proportion& p, double z = kZ95) {
  if (p.trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(p.trials);
  const double q = p.estimate();
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (q + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(q * (1.0 - q) / n + z2 / (4.0 * n * n)) / denom;
  // Endpoints are exact at 0 and n successes.
  return {p.successes == 0 ? 0.0 : std::max(0.0, center - half),
          p.successes == p.trials ? 1.0 : std::min(1.0, center + half)};
}

/// sup_x |F_a(x) - F_b(x)| over the empirical CDFs.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_statistic needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Asymptotic two-sample critical value c(alpha) sqrt((n+m)/(n m)).
inline double ks_critical_value(std::size_t n, std::size_t m, double alpha = 0.01) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  const double a = static_cast<double>(n), b = static_cast<double>(m);
  return c * std::sqrt((a + b) / (a * b));
}

/// Nearest-rank quantile, q in (0, 1].
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw DomainError("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const auto n = static_cast<double>(x.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n));
  rank = std::clamp<std::size_t>(rank, 1, x.size());
  return x[rank - 1];
}

}  // namespace exspec
