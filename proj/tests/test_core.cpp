#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>

#include "exspec/ensembles.hpp"
#include "exspec/matrix.hpp"
#include "exspec/matrix_io.hpp"
#include "exspec/parallel.hpp"
#include "exspec/rng.hpp"
#include "exspec/stats.hpp"

using namespace exspec;

namespace {

Matrix random_matrix(Index n, std::uint64_t seed, bool zero_diag = false) {
  Engine eng = make_engine(seed, Stream::kCorpus, static_cast<std::uint64_t>(n));
  Matrix m(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) m(i, j) = standard_normal(eng);
  if (zero_diag) m.diagonal().setZero();
  return m;
}

std::multiset<double> entry_multiset(const Matrix& m) {
  return std::multiset<double>(m.data(), m.data() + m.size());
}

}  // namespace

TEST(SquareMatrix, RejectsNonSquareEmptyAndNonFinite) {
  EXPECT_THROW(SquareMatrix(Matrix(2, 3)), DimensionError);
  EXPECT_THROW(SquareMatrix(Matrix(0, 0)), DimensionError);
  Matrix bad = Matrix::Zero(2, 2);
  bad(1, 0) = std::nan("");
  EXPECT_THROW(SquareMatrix{bad}, DomainError);
  bad(1, 0) = INFINITY;
  EXPECT_THROW(SquareMatrix{bad}, DomainError);
}

TEST(SquareMatrix, ZeroDiagonalTagIsValidated) {
  EXPECT_NO_THROW(SquareMatrix::from_rows({{0, 1}, {2, 0}}, true));
  try {
    SquareMatrix::from_rows({{0, 1}, {2, 5}}, true);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("(2,2)"), std::string::npos);
  }
}

TEST(Permutation, RejectsNonBijections) {
  EXPECT_THROW(Permutation({0, 0, 1}), DomainError);
  EXPECT_THROW(Permutation({0, 3, 1}), DomainError);
  EXPECT_THROW(Permutation({-1, 0}), DomainError);
}

TEST(Permutation, InverseAndCompose) {
  const Permutation p({2, 0, 3, 1});
  EXPECT_EQ(p.compose(p.inverse()), Permutation::identity(4));
  EXPECT_EQ(p.inverse().compose(p), Permutation::identity(4));
  const Permutation q({1, 0, 2, 3});
  const auto pq = p.compose(q);
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(pq(i), p(q(i)));
  EXPECT_FALSE(Permutation({0, 2, 1}).is_derangement());
  EXPECT_TRUE(Permutation({1, 2, 0}).is_derangement());
}

TEST(ApplyPermutation, IdentityLeavesMatrixUnchanged) {
  const SquareMatrix m(random_matrix(7, 1));
  EXPECT_EQ(apply_permutation(m, Permutation::identity(7)), m);
}

TEST(ApplyPermutation, SwapOnTwoByTwo) {
  const auto m = SquareMatrix::from_rows({{0, 1}, {2, 0}}, true);
  const auto out = apply_permutation(m, Permutation::transposition(2, 0, 1));
  EXPECT_EQ(out, SquareMatrix::from_rows({{0, 2}, {1, 0}}, true));
  EXPECT_TRUE(out.zero_diagonal());
}

TEST(ApplyPermutation, DimensionMismatchThrows) {
  EXPECT_THROW(apply_permutation(SquareMatrix::identity(3), Permutation::identity(4)), DimensionError);
}

TEST(ApplyPermutation, InverseUndoesOnRandomPairs) {
  for (std::uint64_t t = 0; t < 100; ++t) {
    const Index n = 1 + static_cast<Index>(t % 20);
    const SquareMatrix m(random_matrix(n, 100 + t));
    const auto sigma = uniform_permutation(n, 5, t);
    EXPECT_EQ(apply_permutation(apply_permutation(m, sigma), sigma.inverse()), m);
  }
}

TEST(ApplyPermutation, PreservesEntryAndDiagonalMultisets) {
  for (std::uint64_t t = 0; t < 30; ++t) {
    const Index n = 2 + static_cast<Index>(t % 11);
    const SquareMatrix m(random_matrix(n, 200 + t));
    const auto out = apply_permutation(m, uniform_permutation(n, 6, t));
    EXPECT_EQ(entry_multiset(out.entries()), entry_multiset(m.entries()));
    const Vector d0 = m.entries().diagonal(), d1 = out.entries().diagonal();
    EXPECT_EQ(std::multiset<double>(d0.data(), d0.data() + n), std::multiset<double>(d1.data(), d1.data() + n));
  }
}

TEST(ApplyPermutation, ZeroDiagonalStaysZero) {
  for (std::uint64_t t = 0; t < 20; ++t) {
    const SquareMatrix m(random_matrix(9, 300 + t, true), true);
    const auto out = apply_permutation(m, uniform_permutation(9, 7, t));
    EXPECT_TRUE(out.zero_diagonal());
    EXPECT_TRUE(out.has_zero_diagonal());
  }
}

TEST(TopRightCorner, IndexArithmeticN4) {
  Matrix m(4, 4);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) m(i, j) = 4.0 * i + (j + 1);
  const auto t = top_right_corner(SquareMatrix(m));
  ASSERT_EQ(t.m(), 2);
  EXPECT_EQ(t.entries(), (Matrix(2, 2) << 3, 4, 7, 8).finished());
  EXPECT_EQ(t.parent_n(), 4);
}

TEST(TopRightCorner, OddNUsesFloorRowsAndLastColumns) {
  Matrix m(5, 5);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) m(i, j) = 10.0 * (i + 1) + (j + 1);
  const auto t = top_right_corner(m);
  EXPECT_TRUE(t.is_square());
  EXPECT_EQ(t.entries(), (Matrix(2, 2) << 14, 15, 24, 25).finished());
}

TEST(TopRightCorner, TooSmallThrows) {
  EXPECT_THROW(top_right_corner(SquareMatrix::identity(1)), DimensionError);
}

TEST(TopRightCorner, NeverTouchesTheDiagonal) {
  for (Index n = 2; n <= 40; ++n) {
    Matrix marker = Matrix::Zero(n, n);
    marker.diagonal().setOnes();
    EXPECT_EQ(top_right_corner(marker).entries().sum(), 0.0) << "n = " << n;
  }
}

TEST(TopRightCorner, PermutedCornerMatchesIndexFormula) {
  for (std::uint64_t t = 0; t < 40; ++t) {
    const Index n = 2 + static_cast<Index>(t % 15);
    const SquareMatrix m(random_matrix(n, 400 + t));
    const auto sigma = uniform_permutation(n, 8, t);
    const auto via_full = top_right_corner(apply_permutation(m, sigma));
    const auto direct = permuted_corner(m, sigma);
    const Index h = n / 2;
    EXPECT_EQ(via_full.entries(), direct.entries());
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < h; ++j) EXPECT_EQ(direct(i, j), m(sigma(i), sigma(n - h + j)));
  }
}

TEST(BlockDecompose, TwoByTwo) {
  const auto b = block_decompose(SquareMatrix::from_rows({{0, 1}, {2, 0}}));
  EXPECT_EQ(b.b11(0, 0), 0.0);
  EXPECT_EQ(b.b12(0, 0), 1.0);
  EXPECT_EQ(b.b21(0, 0), 2.0);
  EXPECT_EQ(b.b22(0, 0), 0.0);
}

TEST(BlockDecompose, ReassemblesAndMatchesCorner) {
  for (Index n : {4, 6, 10}) {
    const SquareMatrix m(random_matrix(n, 500));
    const auto b = block_decompose(m);
    Matrix back(n, n);
    const Index h = n / 2;
    back << b.b11.entries(), b.b12.entries(), b.b21.entries(), b.b22.entries();
    EXPECT_EQ(back, m.entries());
    EXPECT_EQ(b.b12.entries(), top_right_corner(m).entries());
    EXPECT_EQ(b.b12.rows(), h);
  }
}

TEST(BlockDecompose, OddNBlockShapes) {
  const auto b = block_decompose(SquareMatrix(random_matrix(7, 501)));
  EXPECT_EQ(b.b11.rows(), 3);
  EXPECT_EQ(b.b12.rows(), 3);
  EXPECT_EQ(b.b12.cols(), 4);
  EXPECT_EQ(b.b22.rows(), 4);
  EXPECT_FALSE(b.b12.is_square());
}

TEST(Margins, SmallExampleAndPermutationSums) {
  const auto m = SquareMatrix::from_rows({{0, 1}, {2, 0}});
  EXPECT_EQ(column_sums(m), (Vector(2) << 2, 1).finished());
  EXPECT_EQ(row_sums(m), (Vector(2) << 1, 2).finished());
  std::vector<Permutation> perms;
  for (std::uint64_t k = 0; k < 3; ++k) perms.push_back(uniform_permutation(10, 9, k));
  const auto a = permutation_matrix_sum(perms);
  EXPECT_EQ(column_sums(a), Vector::Constant(10, 3.0));
  EXPECT_EQ(row_sums(a), Vector::Constant(10, 3.0));
}

TEST(Margins, AbsoluteValuesForSignedEntries) {
  const auto m = SquareMatrix::from_rows({{1, -2}, {-3, 4}});
  EXPECT_EQ(column_sums(m), (Vector(2) << 4, 6).finished());
  EXPECT_EQ(row_sums(m), (Vector(2) << 3, 7).finished());
}

TEST(Margins, DoubleCountingOnNonnegative) {
  for (std::uint64_t t = 0; t < 20; ++t) {
    Engine eng = make_engine(t, Stream::kCorpus, 0);
    Matrix m(12, 12);
    // Dyadic entries keep every partial sum exact.
    for (Index j = 0; j < 12; ++j)
      for (Index i = 0; i < 12; ++i) m(i, j) = static_cast<double>(uniform_below(eng, 64)) / 8.0;
    const double total = m.sum();
    EXPECT_EQ(column_sums(m).sum(), total);
    EXPECT_EQ(row_sums(m).sum(), total);
  }
}

TEST(MatrixIo, CsvRoundTripIsBitExact) {
  const SquareMatrix m(random_matrix(6, 600));
  EXPECT_EQ(from_csv(to_csv(m)), m);
}

TEST(MatrixIo, JsonRoundTripIsBitExact) {
  Matrix e = random_matrix(5, 601, true);
  e(0, 1) = 1e-300;
  e(1, 0) = -0.1;
  e(2, 3) = 1.0 / 3.0;
  const SquareMatrix m(e, true);
  const auto back = from_json_text(to_json_text(m));
  EXPECT_EQ(back, m);
  EXPECT_TRUE(back.zero_diagonal());
}

TEST(MatrixIo, CsvErrorsCarryLineNumbers) {
  try {
    from_csv("1,2\n\n3,x\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  try {
    from_csv("1,2\n3\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(from_csv(""), ParseError);
}

TEST(MatrixIo, JsonErrors) {
  EXPECT_THROW(from_json_text("{\"n\": 2,\n \"entries\": [[1,2],[3]]}"), ParseError);
  try {
    from_json_text("{\"n\": 1,\n\"entries\": [[1]]\n,,}");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(MatrixIo, ShortestFormatting) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(3.0), "3");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Rng, StreamsArePureAndDistinct) {
  Engine a = make_engine(42, Stream::kEnsemble, 3);
  Engine b = make_engine(42, Stream::kEnsemble, 3);
  Engine c = make_engine(42, Stream::kRelabel, 3);
  Engine d = make_engine(42, Stream::kEnsemble, 4);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
}

TEST(Rng, UniformBelowIsUnbiased) {
  Engine eng = make_engine(1, Stream::kCorpus, 0);
  std::vector<int> counts(6, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[uniform_below(eng, 6)];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 6.0) * (c - n / 6.0) / (n / 6.0);
  EXPECT_LT(chi2, 20.5);  // chi-square(5) 0.999 quantile
}

TEST(Rng, UniformPermutationFrequencies) {
  std::map<std::vector<Index>, int> counts;
  const int n = 24000;
  for (int i = 0; i < n; ++i) ++counts[uniform_permutation(4, 11, static_cast<std::uint64_t>(i)).map()];
  ASSERT_EQ(counts.size(), 24u);
  double chi2 = 0.0;
  for (const auto& [p, c] : counts) chi2 += (c - n / 24.0) * (c - n / 24.0) / (n / 24.0);
  EXPECT_LT(chi2, 49.7);  // chi-square(23) 0.999 quantile
}

TEST(Rng, NormalMoments) {
  Engine eng = make_engine(2, Stream::kCorpus, 0);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = standard_normal(eng);
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Parallel, ResultsIndependentOfWorkerCount) {
  auto f = [](std::size_t j) {
    Engine eng = make_engine(3, Stream::kCorpus, j);
    return standard_normal(eng);
  };
  const auto one = parallel_map(500, 1, f);
  const auto four = parallel_map(500, 4, f);
  const auto eight = parallel_map(500, 8, f);
  EXPECT_EQ(one, four);
  EXPECT_EQ(one, eight);
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_map(50, 4,
                            [](std::size_t j) -> int {
                              if (j == 17) throw DomainError("boom");
                              return 0;
                            }),
               DomainError);
}

TEST(Parallel, EnvironmentCap) {
  setenv("EXSPEC_THREADS", "3", 1);
  EXPECT_EQ(default_workers(), 3u);
  setenv("EXSPEC_THREADS", "junk", 1);
  EXPECT_GE(default_workers(), 1u);
  unsetenv("EXSPEC_THREADS");
}

TEST(Stats, WilsonAndNormalIntervals) {
  const auto w = wilson_interval({0, 100});
  EXPECT_EQ(w.lo, 0.0);
  EXPECT_GT(w.hi, 0.0);
  EXPECT_LT(w.hi, 0.05);
  const auto mid = wilson_interval({50, 100});
  EXPECT_NEAR(0.5 * (mid.lo + mid.hi), 0.5, 1e-12);
  EXPECT_NEAR(mid.halfwidth(), 0.0961, 5e-4);
  EXPECT_DOUBLE_EQ(normal_halfwidth({0, 1000}), 1e-3);
}

TEST(Stats, KsStatisticAndCritical) {
  EXPECT_EQ(ks_statistic({1, 2, 3}, {1, 2, 3}), 0.0);
  EXPECT_EQ(ks_statistic({0, 0}, {1, 1}), 1.0);
  EXPECT_NEAR(ks_statistic({1, 2, 3, 4}, {3, 4, 5, 6}), 0.5, 1e-15);
  // c(0.01) = 1.628
  EXPECT_NEAR(ks_critical_value(100, 100, 0.01), 1.6276 * std::sqrt(2.0 / 100.0), 1e-3);
}

TEST(Stats, NearestRankQuantile) {
  const std::vector<double> x{5, 1, 4, 2, 3};
  EXPECT_EQ(quantile(x, 0.0), 1.0);
  EXPECT_EQ(quantile(x, 0.5), 3.0);
  EXPECT_EQ(quantile(x, 1.0), 5.0);
}
