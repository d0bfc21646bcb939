#include <gtest/gtest.h>

#include <complex>
#include <vector>

#include "exspec/ensembles.hpp"
#include "exspec/spectra.hpp"

using namespace exspec;

namespace {

Matrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  Engine eng = make_engine(seed, Stream::kCorpus, 77);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = standard_normal(eng);
  return m;
}

// Oracle: singular values as square roots of the roots of the
// characteristic polynomial of G = M^t M. Coefficients by Faddeev-LeVerrier,
// roots by Durand-Kerner, then Newton polishing, all in long double.
std::vector<double> charpoly_singular_values(const Matrix& m) {
  using LD = long double;
  const Index n = m.cols();
  const Eigen::Matrix<LD, Eigen::Dynamic, Eigen::Dynamic> g = (m.transpose() * m).cast<LD>();
  // p(x) = x^n + c[1] x^(n-1) + ... + c[n]
  std::vector<LD> c(static_cast<std::size_t>(n) + 1, 0.0L);
  c[0] = 1.0L;
  Eigen::Matrix<LD, Eigen::Dynamic, Eigen::Dynamic> mk = Eigen::Matrix<LD, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  const auto id = Eigen::Matrix<LD, Eigen::Dynamic, Eigen::Dynamic>::Identity(n, n);
  for (Index k = 1; k <= n; ++k) {
    mk = g * mk + c[static_cast<std::size_t>(k - 1)] * id;
    c[static_cast<std::size_t>(k)] = -(g * mk).trace() / static_cast<LD>(k);
  }
  auto eval = [&](std::complex<LD> x) {
    std::complex<LD> p = 1.0L;
    for (Index k = 1; k <= n; ++k) p = p * x + c[static_cast<std::size_t>(k)];
    return p;
  };
  std::vector<std::complex<LD>> z(static_cast<std::size_t>(n));
  const LD radius = 1.0L + std::abs(c[1]);
  for (Index k = 0; k < n; ++k) z[static_cast<std::size_t>(k)] = std::polar(radius, 0.4L + 2.0L * 3.14159265358979L * k / n);
  for (int it = 0; it < 5000; ++it) {
    LD change = 0.0L;
    for (std::size_t k = 0; k < z.size(); ++k) {
      std::complex<LD> denom = 1.0L;
      for (std::size_t l = 0; l < z.size(); ++l)
        if (l != k) denom *= z[k] - z[l];
      const auto step = eval(z[k]) / denom;
      z[k] -= step;
      change = std::max(change, std::abs(step));
    }
    if (change < 1e-30L) break;
  }
  std::vector<double> s;
  for (auto root : z) {
    LD x = root.real();
    for (int it = 0; it < 50; ++it) {  // Newton on the real polynomial
      LD p = 1.0L, dp = 0.0L;
      for (Index k = 1; k <= n; ++k) {
        dp = dp * x + p;
        p = p * x + c[static_cast<std::size_t>(k)];
      }
      if (dp == 0.0L) break;
      x -= p / dp;
    }
    s.push_back(static_cast<double>(std::sqrt(std::max(x, 0.0L))));
  }
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

// Oracle: Perron vector by plain power iteration on the positive matrix.
Vector power_iteration(const Matrix& m) {
  Vector x = Vector::Ones(m.rows());
  for (int it = 0; it < 5000; ++it) {
    Vector y = m * x;
    y /= y.norm();
    if ((y - x).norm() < 1e-15) return y;
    x = y;
  }
  return x;
}

}  // namespace

TEST(SingularValues, IdentityAndDiagonal) {
  EXPECT_EQ(singular_values(SquareMatrix::identity(3)).values, (std::vector<double>{1, 1, 1}));
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 3, -2, 1;
  const auto s = singular_values(d).values;
  EXPECT_NEAR(s[0], 3, 1e-14);
  EXPECT_NEAR(s[1], 2, 1e-14);
  EXPECT_NEAR(s[2], 1, 1e-14);
}

TEST(SingularValues, MatchesCharacteristicPolynomialOracle) {
  for (std::uint64_t t = 0; t < 20; ++t) {
    const Matrix m = gaussian(6, 6, t);
    const auto got = singular_values(m).values;
    const auto want = charpoly_singular_values(m);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i)
      EXPECT_NEAR(got[i], want[i], 1e-8 * std::max(1.0, want[0])) << "case " << t << " index " << i;
  }
}

TEST(SingularValues, NonincreasingAndNonnegative) {
  const auto s = singular_values(gaussian(9, 9, 3)).values;
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end(), std::greater<>()));
  EXPECT_GE(s.back(), 0.0);
  EXPECT_EQ(s.size(), 9u);
  EXPECT_THROW(singular_values(Matrix::Identity(2, 2), 0.0), DomainError);
}

TEST(SingularValues, OrthogonalIterationAgreesWithFullDecomposition) {
  for (Index n : {40, 130}) {
    const Matrix m = gaussian(n, n, 10 + static_cast<std::uint64_t>(n));
    const auto full = singular_values(m);
    const auto lead = leading_singular_values(m, 2);
    EXPECT_NEAR(lead.s1(), full.s1(), 1e-8 * full.s1());
    EXPECT_NEAR(lead.s2(), full.s2(), 1e-8 * full.s1());
  }
}

TEST(SingularValues, LargeRegularUsesIterativeRoute) {
  EnsembleSpec spec;
  spec.kind = EnsembleKind::kPermSumRegular;
  spec.n = 600;
  spec.d = 3;
  spec.seed = 4;
  const auto a = sample(spec, 0);
  ASSERT_GT(a.n(), kFullDecompositionMax);
  EXPECT_NEAR(spectral_norm(a), 3.0, 1e-8);
  EXPECT_NEAR(second_singular(a), s2_via_centering(a, 3.0), 1e-8 * 3.0);
}

TEST(SingularValues, ConvergenceFailureCarriesPartialResult) {
  const Matrix m = gaussian(60, 60, 5);
  try {
    leading_singular_values(m, 2, 1e-14, 1);
    FAIL();
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.iterations(), 1);
    EXPECT_EQ(e.partial().values.size(), 2u);
    EXPECT_GT(e.partial().s1(), 0.0);
  }
}

TEST(SpectralNorm, RankOneAndOrthogonal) {
  Vector x(4), y(4);
  x << 1, 2, 0, -1;
  y << 3, 0, 1, 1;
  const Matrix r = x * y.transpose();
  EXPECT_NEAR(spectral_norm(r), x.norm() * y.norm(), 1e-12);
  EXPECT_NEAR(second_singular(r), 0.0, 1e-12);
  Matrix cyc = Matrix::Zero(3, 3);
  cyc(0, 1) = cyc(1, 2) = cyc(2, 0) = 1;
  EXPECT_NEAR(spectral_norm(cyc), 1.0, 1e-14);
  EXPECT_NEAR(second_singular(cyc), 1.0, 1e-14);
  EXPECT_NEAR(second_singular(Matrix(4.0 * Matrix::Identity(5, 5))), 4.0, 1e-14);
}

TEST(SpectralNorm, DominatesRandomDirections) {
  const Matrix m = gaussian(12, 12, 6);
  const double norm = spectral_norm(m);
  Engine eng = make_engine(6, Stream::kCorpus, 1);
  double best = 0.0;
  for (int t = 0; t < 200; ++t) {
    Vector x(12);
    for (Index i = 0; i < 12; ++i) x(i) = standard_normal(eng);
    best = std::max(best, (m * x.normalized()).norm());
  }
  EXPECT_LE(best, norm + 1e-9);
  EXPECT_GT(best, 0.5 * norm);
}

TEST(SpectralNorm, InvariantUnderRelabeling) {
  for (std::uint64_t t = 0; t < 20; ++t) {
    const SquareMatrix m(gaussian(15, 15, 100 + t));
    const auto sigma = uniform_permutation(15, 9, t);
    const auto a = singular_values(m).values;
    const auto b = singular_values(apply_permutation(m, sigma)).values;
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
  }
}

TEST(Centering, FlatAndScaledIdentity) {
  EXPECT_NEAR(s2_via_centering(flat_matrix(6, 2.0), 2.0), 0.0, 1e-12);
  EXPECT_NEAR(s2_via_centering(Matrix(3.0 * Matrix::Identity(5, 5)), 3.0), 3.0, 1e-12);
  EXPECT_NEAR(second_singular(Matrix(3.0 * Matrix::Identity(5, 5))), 3.0, 1e-12);
}

TEST(Centering, IdentityOnDisjointPermutationSums) {
  // Shifts by 1, 2, 3 never overlap.
  const Index n = 50;
  std::vector<Permutation> perms;
  for (Index s = 1; s <= 3; ++s) {
    std::vector<Index> p(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = (i + s) % n;
    perms.push_back(Permutation(p));
  }
  const Matrix base = permutation_matrix_sum(perms).entries();
  const auto sigma = uniform_permutation(n, 12, 0);
  const auto a = apply_permutation(SquareMatrix(base), sigma);
  EXPECT_EQ(a.entries().maxCoeff(), 1.0);
  EXPECT_NEAR(s2_via_centering(a, 3.0), second_singular(a), 1e-8);
}

TEST(Centering, RejectsNonConstantMarginsNamingTheLine) {
  Matrix a = Matrix::Identity(4, 4);
  a(2, 3) = 0.5;
  try {
    s2_via_centering(a, 1.0);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
  }
}

TEST(CenteredOffdiag, ExamplesAndZeroDiagonal) {
  EXPECT_EQ(centered_offdiag(SquareMatrix(flat_matrix(4, 2.0)), 2.0).entries().cwiseAbs().maxCoeff(), 0.0);
  const auto b = centered_offdiag(SquareMatrix(Matrix(2.0 * Matrix::Identity(4, 4))), 2.0);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(b(i, j), i == j ? 0.0 : -0.5);
  const auto r = centered_offdiag(SquareMatrix(gaussian(7, 7, 8)), 1.3);
  EXPECT_TRUE(r.zero_diagonal());
  EXPECT_TRUE(r.has_zero_diagonal());
}

TEST(CenteredOffdiag, SecondSingularChainOnRegularSamples) {
  EnsembleSpec spec;
  spec.kind = EnsembleKind::kRegularDigraph;
  spec.n = 40;
  spec.d = 5;
  spec.seed = 13;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const auto a = sample(spec, t);
    const double rows = a.entries().rowwise().norm().maxCoeff();
    EXPECT_LE(second_singular(a), rows + spectral_norm(centered_offdiag(a, 5.0)) + 1e-9);
  }
}

TEST(Perron, AllOnesAndRegular) {
  const auto p = perron_check(Matrix::Ones(3, 3), Vector::Ones(3));
  EXPECT_NEAR(p.rho, 3.0, 1e-14);
  EXPECT_TRUE(p.is_eigen);
  EXPECT_TRUE(p.matches_radius);
  EnsembleSpec spec;
  spec.kind = EnsembleKind::kPermSumRegular;
  spec.n = 20;
  spec.d = 4;
  spec.seed = 1;
  const auto q = perron_check(sample(spec, 0).entries(), Vector::Ones(20));
  EXPECT_NEAR(q.rho, 4.0, 1e-12);
  EXPECT_TRUE(q.matches_radius);
}

TEST(Perron, PowerIterationVectorMatchesRadius) {
  for (std::uint64_t t = 0; t < 20; ++t) {
    Engine eng = make_engine(t, Stream::kCorpus, 3);
    Matrix m(8, 8);
    for (Index j = 0; j < 8; ++j)
      for (Index i = 0; i < 8; ++i) m(i, j) = uniform01(eng) + 1e-3;
    const auto p = perron_check(m, power_iteration(m), 1e-8);
    EXPECT_TRUE(p.matches_radius) << "residual " << p.residual;
  }
}

TEST(Perron, NonEigenvectorAndBadInputs) {
  Matrix m(2, 2);
  m << 1, 1, 0, 1;
  EXPECT_FALSE(perron_check(m, Vector::Ones(2)).is_eigen);
  Matrix neg = Matrix::Identity(2, 2);
  neg(0, 1) = -1;
  EXPECT_THROW(perron_check(neg, Vector::Ones(2)), DomainError);
  Vector x(2);
  x << 1, 0;
  EXPECT_THROW(perron_check(Matrix::Ones(2, 2), x), DomainError);
}
