#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "saddlestab/numerics.hpp"
#include "saddlestab/random.hpp"
#include "test_support.hpp"

namespace saddlestab {
namespace {

using testing::expect_vector_near;
using testing::expect_vector_near_up_to_sign;

Eigen::MatrixXd to_eigen(const SymMatrix& a) {
  Eigen::MatrixXd m(a.dim(), a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) m(i, j) = a(i, j);
  return m;
}

TEST(SymEig, DiagonalMatrix) {
  const EigenPairs e = sym_eig(SymMatrix::diagonal({3.0, 1.0}));
  expect_vector_near(e.values, {3.0, 1.0}, 1e-14);
  expect_vector_near(e.vector(0), {1.0, 0.0}, 1e-14);
  expect_vector_near(e.vector(1), {0.0, 1.0}, 1e-14);
}

TEST(SymEig, TwoByTwoByHand) {
  SymMatrix a(2);
  a.set(0, 0, 2.0);
  a.set(1, 1, 2.0);
  a.set(1, 0, 1.0);
  const EigenPairs e = sym_eig(a);
  expect_vector_near(e.values, {3.0, 1.0}, 1e-14);
  const double r = 1.0 / std::sqrt(2.0);
  expect_vector_near_up_to_sign(e.vector(0), {r, r}, 1e-14);
  expect_vector_near_up_to_sign(e.vector(1), {r, -r}, 1e-14);
}

TEST(SymEig, Identity) {
  const EigenPairs e = sym_eig(SymMatrix::identity(5));
  expect_vector_near(e.values, {1, 1, 1, 1, 1}, 0.0);
}

TEST(SymEig, SignConventionLargestComponentPositive) {
  Rng rng(11);
  const EigenPairs e = sym_eig(rng.symmetric_gaussian(7));
  for (std::size_t k = 0; k < 7; ++k) {
    const Vector v = e.vector(k);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    EXPECT_GT(v[arg], 0.0);
  }
}

TEST(SymEig, RejectsNonFinite) {
  SymMatrix a(2);
  a.set(0, 1, std::nan(""));
  EXPECT_THROW(sym_eig(a), NumericsError);
}

TEST(SymEig, MatchesEigenOnRandomMatrices) {
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 2 + rng.index(30);
    const SymMatrix a = rng.symmetric_gaussian(d);
    const EigenPairs mine = sym_eig(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(to_eigen(a));
    const Eigen::VectorXd ev = ref.eigenvalues();  // ascending
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < d; ++i)
      EXPECT_NEAR(mine.values[i], ev(static_cast<Eigen::Index>(d - 1 - i)), 1e-11 * scale);
  }
}

TEST(SymEig, ReconstructionAndOrthonormality) {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + rng.index(50);
    const SymMatrix a = rng.symmetric_gaussian(d);
    const EigenPairs e = sym_eig(a);
    SymMatrix rec(d);
    for (std::size_t k = 0; k < d; ++k) rec.add_outer(e.vector(k), e.values[k]);
    EXPECT_LE(operator_norm_diff(rec, a), 1e-9 * std::max(1.0, spectral_norm(a)));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        EXPECT_NEAR(dot(e.vector(i), e.vector(j)), i == j ? 1.0 : 0.0, 1e-12);
  }
}

TEST(SymEig, ValuesDescending) {
  Rng rng(3);
  const EigenPairs e = sym_eig(rng.symmetric_gaussian(12));
  for (std::size_t i = 1; i < e.values.size(); ++i) EXPECT_GE(e.values[i - 1], e.values[i]);
}

TEST(OperatorNormDiff, Examples) {
  const SymMatrix a = SymMatrix::diagonal({1.0, 0.5});
  EXPECT_DOUBLE_EQ(operator_norm_diff(a, a), 0.0);
  EXPECT_NEAR(operator_norm_diff(SymMatrix::diagonal({1.0, 0.0}), SymMatrix::diagonal({0.0, 0.0})), 1.0,
              1e-15);
  EXPECT_NEAR(operator_norm_diff(a, SymMatrix::diagonal({0.8, 0.6})), 0.2, 1e-15);
}

TEST(OperatorNormDiff, WeylInequality) {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + rng.index(15);
    const SymMatrix a = rng.symmetric_gaussian(d);
    SymMatrix b = a;
    b += 0.1 * rng.symmetric_gaussian(d);
    const Vector la = sym_eig(a).values;
    const Vector lb = sym_eig(b).values;
    const double diff = operator_norm_diff(a, b);
    for (std::size_t i = 0; i < d; ++i) EXPECT_LE(std::abs(la[i] - lb[i]), diff + 1e-12);
  }
}

TEST(MinEigenvalue, EmptyIsInfinite) {
  EXPECT_TRUE(std::isinf(min_eigenvalue(SymMatrix(0))));
  EXPECT_NEAR(min_eigenvalue(SymMatrix::diagonal({2.0, -3.0, 1.0})), -3.0, 1e-15);
}

TEST(LeastSquaresMultipliers, Examples) {
  Matrix c(2, 1);
  c(0, 0) = 1.0;
  const Vector g = scaled(SymMatrix::diagonal({1.0, 0.5}) * Vector{1.0, 0.0}, -1.0);
  expect_vector_near(least_squares_multipliers(c, g), {1.0}, 1e-15);
  expect_vector_near(least_squares_multipliers(c, {0.0, 0.0}), {0.0}, 0.0);

  Matrix c2(3, 2);
  c2(0, 0) = 1.0;
  c2(1, 1) = 1.0;
  expect_vector_near(least_squares_multipliers(c2, {3.0, 4.0, 5.0}), {-3.0, -4.0}, 1e-14);
}

TEST(LeastSquaresMultipliers, DependentColumnsViolateLicq) {
  Matrix c(2, 2);
  c(0, 0) = 1.0;
  c(0, 1) = 2.0;
  EXPECT_THROW(least_squares_multipliers(c, {1.0, 1.0}), LicqViolation);
}

TEST(TangentBasis, Examples) {
  Matrix c(3, 1);
  c(0, 0) = 1.0;
  const Matrix b = tangent_basis(c);
  ASSERT_EQ(b.cols(), 2u);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(b(0, k), 0.0, 1e-15);

  Matrix c2(2, 1);
  c2(0, 0) = c2(1, 0) = 1.0 / std::sqrt(2.0);
  const Matrix b2 = tangent_basis(c2);
  ASSERT_EQ(b2.cols(), 1u);
  expect_vector_near_up_to_sign(b2.column(0), {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)}, 1e-14);

  const Matrix b3 = tangent_basis(Matrix(4, 0));
  ASSERT_EQ(b3.cols(), 4u);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(b3(i, j), i == j ? 1.0 : 0.0);
}

TEST(TangentBasis, CompletesOrthonormalBasis) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 3 + rng.index(8);
    const std::size_t m = 1 + rng.index(d - 1);
    Matrix c(d, m);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < m; ++j) c(i, j) = rng.normal();
    const Matrix q = orthonormalize_columns(c);
    const Matrix b = tangent_basis(c);
    ASSERT_EQ(b.cols(), d - m);
    std::vector<Vector> all;
    for (std::size_t j = 0; j < m; ++j) all.push_back(q.column(j));
    for (std::size_t j = 0; j < d - m; ++j) all.push_back(b.column(j));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        EXPECT_NEAR(dot(all[i], all[j]), i == j ? 1.0 : 0.0, 1e-12);
  }
}

TEST(SymMatrix, CongruenceAndQuadraticForm) {
  Rng rng(1);
  const SymMatrix a = rng.symmetric_gaussian(4);
  const Vector x = rng.normal_vector(4);
  EXPECT_NEAR(a.quadratic_form(x), dot(x, a * x), 1e-12);
  const SymMatrix same = a.congruence(Matrix::identity(4));
  EXPECT_LE(testing::max_abs_diff(same, a), 1e-15);
}

TEST(Rng, DeterministicAndDerivedStreamsDiffer) {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(derive_seed(42, 0), derive_seed(42, 1));
  EXPECT_EQ(derive_seed(42, 3), derive_seed(42, 3));
  Rng r(8);
  EXPECT_NEAR(norm(r.unit_sphere(9)), 1.0, 1e-14);
}

}  // namespace
}  // namespace saddlestab
