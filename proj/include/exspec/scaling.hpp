#pragma once

// Diagonal-scaling comparison for matrices with almost-constant margins:
//   ||A - (d/m) 1 1^t|| <= 2 s2(A) + 6 delta
// whenever ||u - d1||_inf, ||v - d1||_inf <= d/3 and
// ||u - d1||_2, ||v - d1||_2 <= delta sqrt(m). Every intermediate quantity of
// the argument is computed and reported so each step can be checked.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <numeric>
#include <cmath>
#include <string>

#include "exspec/error.hpp"
#include "exspec/matrix.hpp"
#include "exspec/rng.hpp"
#include "exspec/spectra.hpp"

namespace exspec {

struct MarginChecks {
  double inf_u = 0.0;  // ||u - d1||_inf
  double inf_v = 0.0;
  double l2_u = 0.0;  // ||u - d1||_2
  double l2_v = 0.0;
};

struct ScalingReport {
  Index m = 0;
  double d = 0.0;
  double delta = 0.0;
  Vector u, v;

  double lhs = 0.0;  // ||A - (d/m) 1 1^t||
  double s2 = 0.0;
  double beta = 0.0;  // rank-two closed form
  double bound = 0.0;  // 2 s2 + 6 delta
  bool hypotheses_ok = false;
  MarginChecks margin_checks;

  // D_v^{-1/2} A D_u^{-1/2}
  double scaled_s1 = 0.0;
  double scaled_s2 = 0.0;
  double scaled_deflated_norm = 0.0;  // ||S - D_v^{1/2} 1 1^t D_u^{1/2} / ||u||_1||

  double beta_dense = 0.0;
  std::array<double, 3> beta_terms{};  // triangle-inequality split of beta
  double prefactor = 0.0;  // ||D_v^{1/2}|| ||D_u^{1/2}|| ||D_v^{-1/2}|| ||D_u^{-1/2}||
  double chain_bound = 0.0;  // prefactor * s2 + beta
  double scaled_chain_bound = 0.0;  // ||D_v^{1/2}|| ||D_u^{1/2}|| scaled_s2 + beta
  PerronCheck gram_perron;  // S^t S against D_u^{1/2} 1

  double tol = kIdentityTol;

  double slack() const { return tol * std::max(1.0, d); }
  bool conclusion_holds() const { return lhs <= bound + slack(); }
  bool beta_within_bound() const { return beta <= 6.0 * delta + slack(); }
  bool svd_identity_holds() const {
    return std::abs(scaled_s2 - scaled_deflated_norm) <= tol * std::max(1.0, scaled_s1);
  }
  bool bounds_in_d() const {
    const double lo = std::min(u.minCoeff(), v.minCoeff());
    const double hi = std::max(u.maxCoeff(), v.maxCoeff());
    return 2.0 * d / 3.0 <= lo + slack() && hi <= 4.0 * d / 3.0 + slack();
  }
};

/// Largest singular value of a 2x2 matrix in closed form.
inline double norm_2x2(const Eigen::Matrix2d& k) {
  const double a = k(0, 0), b = k(0, 1), c = k(1, 0), d = k(1, 1);
  return 0.5 * (std::hypot(a + d, c - b) + std::hypot(a - d, c + b));
}

namespace detail {

inline Eigen::Matrix2d thin_r(const Eigen::Matrix<double, Eigen::Dynamic, 2>& x) {
  Eigen::HouseholderQR<Eigen::Matrix<double, Eigen::Dynamic, 2>> qr(x);
  Eigen::Matrix2d r = Eigen::Matrix2d::Zero();
  const Index rows = std::min<Index>(2, x.rows());
  r.topRows(rows) = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
  return r;
}

}  // namespace detail

/// ||v u^t / ||u||_1 - (d/m) 1 1^t|| through the rank-two factorization
/// X = [v, 1] [u/||u||_1, -(d/m) 1]^t and two thin QRs.
inline double beta_rank_two(const Vector& u, const Vector& v, double d) {
  const Index m = u.size();
  if (v.size() != m) throw DimensionError("beta_rank_two: u and v differ in length");
  Eigen::Matrix<double, Eigen::Dynamic, 2> left(m, 2), right(m, 2);
  left.col(0) = v;
  left.col(1).setOnes();
  right.col(0) = u / u.lpNorm<1>();
  right.col(1).setConstant(-d / static_cast<double>(m));
  return norm_2x2(detail::thin_r(left) * detail::thin_r(right).transpose());
}

inline double beta_dense(const Vector& u, const Vector& v, double d) {
  const Matrix x = v * u.transpose() / u.lpNorm<1>() - flat_matrix(u.size(), d);
  return spectral_norm(x);
}

/// ||y z^t|| = ||y||_2 ||z||_2.
inline double outer_product_norm(const Vector& y, const Vector& z) { return y.norm() * z.norm(); }

namespace detail {

inline void require_positive_margins(const Vector& u, const Vector& v) {
  for (Index i = 0; i < u.size(); ++i)
    if (!(u(i) > 0.0))
      throw DomainError("column " + std::to_string(i + 1) + " has zero sum; scaling is undefined");
  for (Index i = 0; i < v.size(); ++i)
    if (!(v(i) > 0.0))
      throw DomainError("row " + std::to_string(i + 1) + " has zero sum; scaling is undefined");
}

inline void require_scalable(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("scaling needs a square matrix");
  if (a.rows() < 1) throw DimensionError("scaling needs m >= 1");
  if (!is_nonnegative(a)) throw DomainError("scaling needs a nonnegative matrix");
}

}  // namespace detail

inline ScalingReport scaling_reduction(const Matrix& a, double d, double delta,
                                       double tol = kIdentityTol) {
  detail::require_scalable(a);
  if (!(d > 0.0) || !(delta > 0.0)) throw DomainError("scaling_reduction needs d > 0 and delta > 0");
  ScalingReport r;
  r.m = a.rows();
  r.d = d;
  r.delta = delta;
  r.tol = tol;
  r.u = column_sums(a);
  r.v = row_sums(a);
  detail::require_positive_margins(r.u, r.v);
  const double mass = r.u.lpNorm<1>();
  const double m = static_cast<double>(r.m);
  if (std::abs(mass - r.v.lpNorm<1>()) > 1e-8 * m * std::max(1.0, d))
    throw DomainError("margins have different l1 mass");

  const Vector du = r.u.array() - d;
  const Vector dv = r.v.array() - d;
  r.margin_checks = {du.lpNorm<Eigen::Infinity>(), dv.lpNorm<Eigen::Infinity>(), du.norm(), dv.norm()};
  const auto& mc = r.margin_checks;
  r.hypotheses_ok = mc.inf_u <= d / 3.0 && mc.inf_v <= d / 3.0 &&
                    mc.l2_u <= delta * std::sqrt(m) && mc.l2_v <= delta * std::sqrt(m);

  r.lhs = spectral_norm(a - flat_matrix(r.m, d));
  r.s2 = second_singular(a);
  r.bound = 2.0 * r.s2 + 6.0 * delta;

  const Vector su = r.u.cwiseSqrt();
  const Vector sv = r.v.cwiseSqrt();
  const Matrix scaled = sv.cwiseInverse().asDiagonal() * a * su.cwiseInverse().asDiagonal();
  const auto top = top_singular_values(scaled, 2);
  r.scaled_s1 = top.s1();
  r.scaled_s2 = top.s2();
  r.scaled_deflated_norm = spectral_norm(scaled - sv * su.transpose() / mass);

  r.beta = beta_rank_two(r.u, r.v, d);
  r.beta_dense = beta_dense(r.u, r.v, d);
  r.beta_terms = {dv.norm() * r.u.norm() / mass, d * std::sqrt(m) * du.norm() / mass,
                  d * std::abs(m * d - mass) / mass};

  const double max_u = r.u.maxCoeff(), max_v = r.v.maxCoeff();
  const double min_u = r.u.minCoeff(), min_v = r.v.minCoeff();
  r.prefactor = std::sqrt(max_u * max_v / (min_u * min_v));
  r.chain_bound = r.prefactor * r.s2 + r.beta;
  r.scaled_chain_bound = std::sqrt(max_u * max_v) * r.scaled_s2 + r.beta;

  r.gram_perron = perron_check(scaled.transpose() * scaled, su, tol);
  return r;
}

inline ScalingReport scaling_reduction(const SquareMatrix& a, double d, double delta,
                                       double tol = kIdentityTol) {
  return scaling_reduction(a.entries(), d, delta, tol);
}

struct UnitMarginFacts {
  double top_singular = 0.0;
  double right_vec_residual = 0.0;
  double left_vec_residual = 0.0;
  double mass_gap = 0.0;  // max relative gap of ||D^{1/2} 1||^2 against ||u||_1
};

/// With S = D_v^{-1/2} A D_u^{-1/2}: s1(S) = 1 with right/left singular
/// vectors D_u^{1/2} 1 and D_v^{1/2} 1. u, v must be A's own margins.
inline UnitMarginFacts unit_margin_svd_facts(const Matrix& a, const Vector& u, const Vector& v,
                                             double tol = kIdentityTol) {
  detail::require_scalable(a);
  if (u.size() != a.rows() || v.size() != a.rows())
    throw DimensionError("unit_margin_svd_facts: margin length differs from matrix size");
  detail::require_positive_margins(u, v);
  const double scale = std::max({1.0, u.maxCoeff(), v.maxCoeff()});
  if ((column_sums(a) - u).lpNorm<Eigen::Infinity>() > tol * scale ||
      (row_sums(a) - v).lpNorm<Eigen::Infinity>() > tol * scale)
    throw DomainError("unit_margin_svd_facts: (u, v) are not the margins of A");

  const Vector su = u.cwiseSqrt();
  const Vector sv = v.cwiseSqrt();
  const Matrix s = sv.cwiseInverse().asDiagonal() * a * su.cwiseInverse().asDiagonal();
  UnitMarginFacts f;
  f.top_singular = spectral_norm(s);
  f.right_vec_residual = (s * su - sv).norm() / sv.norm();
  f.left_vec_residual = (s.transpose() * sv - su).norm() / su.norm();
  const double mu = u.lpNorm<1>(), mv = v.lpNorm<1>();
  f.mass_gap = std::max(std::abs(su.squaredNorm() - mu) / mu, std::abs(sv.squaredNorm() - mv) / mv);
  return f;
}

/// Iterative proportional fitting: rescales rows and columns of a positive
/// start matrix until its margins are (u, v). Margins are met to
/// tol * max(1, max target).
inline Matrix proportional_fit(Matrix x, const Vector& u, const Vector& v, double tol = 1e-10,
                               int max_iterations = 100000) {
  if (x.rows() != x.cols() || u.size() != x.rows() || v.size() != x.rows())
    throw DimensionError("proportional_fit: sizes differ");
  detail::require_positive_margins(u, v);
  if (!is_nonnegative(x)) throw DomainError("proportional_fit needs a nonnegative start");
  if (std::abs(u.sum() - v.sum()) > 1e-12 * std::max(1.0, u.sum()))
    throw DomainError("proportional_fit: targets have different totals");
  const double scale = std::max({1.0, u.maxCoeff(), v.maxCoeff()});
  for (int it = 0; it < max_iterations; ++it) {
    const Vector rs = x.rowwise().sum();
    if ((rs.array() <= 0.0).any()) throw DomainError("proportional_fit: start has an empty row");
    x = (v.array() / rs.array()).matrix().asDiagonal() * x;
    const Vector cs = x.colwise().sum().transpose();
    if ((cs.array() <= 0.0).any()) throw DomainError("proportional_fit: start has an empty column");
    x = x * (u.array() / cs.array()).matrix().asDiagonal();
    if ((x.rowwise().sum() - v).lpNorm<Eigen::Infinity>() <= tol * scale) return x;
  }
  throw ConvergenceError("proportional_fit did not reach the target margins", {}, max_iterations);
}

/// Test instance near A_m(d): a sum of d permutation matrices plus positive
/// noise, fitted to margins d1 + jitter * (Gaussian). `delta_min` is the
/// smallest delta satisfying the l2 hypothesis.
struct MarginPerturbedSample {
  Matrix a;
  Vector u, v;
  double d = 0.0;
  double delta_min = 0.0;
};

inline MarginPerturbedSample margin_perturbed_sample(Index m, int d, double noise, double jitter,
                                                     std::uint64_t seed, std::uint64_t index) {
  if (m < 1 || d < 1) throw DomainError("margin_perturbed_sample needs m >= 1, d >= 1");
  Engine eng = make_engine(seed, Stream::kCorpus, index);
  Matrix x(m, m);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < m; ++i) x(i, j) = noise * uniform01(eng);
  std::vector<Index> p(static_cast<std::size_t>(m));
  for (int layer = 0; layer < d; ++layer) {
    std::iota(p.begin(), p.end(), Index{0});
    for (Index i = m - 1; i > 0; --i)
      std::swap(p[static_cast<std::size_t>(i)],
                p[static_cast<std::size_t>(uniform_below(eng, static_cast<std::uint64_t>(i + 1)))]);
    for (Index i = 0; i < m; ++i) x(i, p[static_cast<std::size_t>(i)]) += 1.0;
  }
  const double dd = static_cast<double>(d);
  Vector u(m), v(m);
  for (Index i = 0; i < m; ++i) u(i) = dd + jitter * standard_normal(eng);
  for (Index i = 0; i < m; ++i) v(i) = dd + jitter * standard_normal(eng);
  v.array() += (u.sum() - v.sum()) / static_cast<double>(m);
  u = u.cwiseMax(dd / 10.0);
  v = v.cwiseMax(dd / 10.0);
  v *= u.sum() / v.sum();

  MarginPerturbedSample s;
  s.a = proportional_fit(std::move(x), u, v);
  s.u = column_sums(s.a);
  s.v = row_sums(s.a);
  s.d = dd;
  s.delta_min = std::max((s.u.array() - dd).matrix().norm(), (s.v.array() - dd).matrix().norm()) /
                std::sqrt(static_cast<double>(m));
  return s;
}

}  // namespace exspec
