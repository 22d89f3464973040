#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "saddlestab/ica.hpp"
#include "saddlestab/pca.hpp"
#include "saddlestab/solvers.hpp"
#include "saddlestab/symmetry.hpp"
#include "test_support.hpp"

namespace saddlestab {
namespace {

using testing::expect_vector_near;
using testing::expect_vector_near_up_to_sign;

const double kR = 1.0 / std::sqrt(2.0);

TEST(PcaErm, Examples) {
  expect_vector_near(pca_erm({{1, 0}, {1, 0}, {0, 1}}).w, {1.0, 0.0}, 1e-15);
  expect_vector_near(pca_erm({{0, 1}}).w, {0.0, 1.0}, 1e-15);
  Rng rng(3);
  const Vector z = rng.unit_sphere(4);
  expect_vector_near_up_to_sign(pca_erm(Sample(5, z)).w, z, 1e-14);
}

TEST(PcaErm, FlagsDegenerateSpectrum) {
  EXPECT_TRUE(pca_erm({{1, 0}, {0, 1}}).degenerate);
  EXPECT_FALSE(pca_erm({{1, 0}, {1, 0}, {0, 1}}).degenerate);
}

TEST(SpherePgd, PcaFromDiagonalConvergesToLeadingEigenvector) {
  const QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5}));
  const PgdResult r = sphere_pgd(f, UnitSphere(), {kR, kR}, SolverConfig{});
  expect_vector_near_up_to_sign(r.w, {1.0, 0.0}, 1e-9);
  EXPECT_LE(r.gradient_norm, SolverConfig{}.grad_tol);
  EXPECT_LE(r.value, f.value({kR, kR}));
}

TEST(SpherePgd, MinimumIsAFixedPoint) {
  const QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5}));
  const PgdResult r = sphere_pgd(f, UnitSphere(), {1.0, 0.0}, SolverConfig{});
  expect_vector_near(r.w, {1.0, 0.0}, 0.0);
  EXPECT_EQ(r.iterations, 0u);
}

TEST(SpherePgd, EscapesExactSaddle) {
  const QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5, 0.2}));
  const PgdResult r = sphere_pgd(f, UnitSphere(), {0.0, 1.0, 0.0}, SolverConfig{});
  EXPECT_GE(r.escapes, 1u);
  expect_vector_near_up_to_sign(r.w, {1.0, 0.0, 0.0}, 1e-9);
}

TEST(SpherePgd, TensorConvergesToNearbyComponent) {
  SymTensor4 t(3);
  for (std::size_t i = 0; i < 3; ++i) t.add_rank_one(unit_vector(3, i));
  const TensorObjective f(t);
  const PgdResult r = sphere_pgd(f, UnitSphere(), normalized({0.1, 1.0, -0.05}), SolverConfig{});
  expect_vector_near_up_to_sign(r.w, {0.0, 1.0, 0.0}, 1e-9);
}

TEST(SpherePgd, FeasibleAndStationaryOnRandomProblems) {
  Rng rng(44);
  for (int k = 0; k < 20; ++k) {
    const QuadraticObjective f = reduced_pca_objective(rng.symmetric_gaussian(6));
    const PgdResult r = sphere_pgd(f, UnitSphere(), rng.unit_sphere(6), SolverConfig{});
    EXPECT_LE(std::abs(dot(r.w, r.w) - 1.0), 1e-9);
    EXPECT_LE(norm(projected_gradient(f, UnitSphere(), r.w)), SolverConfig{}.grad_tol);
  }
}

TEST(SpherePgd, BudgetExhaustionThrows) {
  const QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.99}));
  SolverConfig c;
  c.max_iters = 2;
  EXPECT_THROW(sphere_pgd(f, UnitSphere(), normalized({1.0, 1.0}), c), SolverFailure);
}

TEST(SolverConfig, ValidateRejectsBadSettings) {
  SolverConfig c;
  c.step_size = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SolverConfig{};
  c.grad_tol = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(SpherePgd, AgreesWithEigensolverOnGappedInstances) {
  Rng rng(101);
  for (int k = 0; k < 100; ++k) {
    const Vector lambda = random_gapped_spectrum(5, 0.1, rng);
    const Matrix q = rng.orthonormal_matrix(5);
    SymMatrix a(5);
    for (std::size_t i = 0; i < 5; ++i) a.add_outer(q.column(i), lambda[i]);
    const QuadraticObjective f = reduced_pca_objective(a);
    SolverConfig c;
    c.seed = derive_seed(7, k);
    const PgdResult r = sphere_pgd_multistart(f, UnitSphere(), c);
    expect_vector_near_up_to_sign(r.w, leading_eigenvector(a).w, 1e-6);
  }
}

TEST(Multistart, DeterministicForSeed) {
  const QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5, 0.2}));
  SolverConfig c;
  c.restarts = 3;
  c.seed = 12;
  EXPECT_EQ(sphere_pgd_multistart(f, UnitSphere(), c).w, sphere_pgd_multistart(f, UnitSphere(), c).w);
}

TEST(LooMinimizers, IdenticalDataGiveIdenticalMinimizers) {
  const auto sample = std::make_shared<const Sample>(Sample(4, Vector{0.6, 0.8}));
  const EmpiricalObjective full = pca_objective(sample);
  const PcaEigenOracle oracle(sample);
  const Vector hat = oracle.minimize(full, {});
  for (const Vector& w : loo_minimizers(full, oracle, hat, Symmetry::kSignFlip)) expect_vector_near(w, hat, 1e-15);
}

TEST(LooMinimizers, TwoPointsSwap) {
  const auto sample = std::make_shared<const Sample>(Sample{{1, 0}, {0, 1}});
  const EmpiricalObjective full = pca_objective(sample);
  const PcaEigenOracle oracle(sample);
  const auto loo = loo_minimizers(full, oracle, {1.0, 0.0}, Symmetry::kSignFlip, 2);
  expect_vector_near_up_to_sign(loo[0], {0.0, 1.0}, 1e-15);
  expect_vector_near_up_to_sign(loo[1], {1.0, 0.0}, 1e-15);
}

TEST(PcaEigenOracle, ViewObjectiveMatchesEmpiricalAverage) {
  Rng rng(8);
  Sample s;
  for (int i = 0; i < 9; ++i) s.push_back(scaled(rng.unit_sphere(3), 0.8));
  const auto sample = std::make_shared<const Sample>(s);
  const EmpiricalObjective full = pca_objective(sample);
  const PcaEigenOracle oracle(sample);
  for (std::size_t i = 0; i < 3; ++i) {
    const EmpiricalObjective view = full.leave_one_out(i);
    const auto fast = oracle.view_objective(view);
    const Vector w = rng.unit_sphere(3);
    EXPECT_NEAR(fast->value(w), view.value(w), 1e-14);
    expect_vector_near(fast->gradient(w), view.gradient(w), 1e-14);
    expect_vector_near_up_to_sign(oracle.minimize(view, {}), pca_erm([&] {
                                    Sample t = s;
                                    t.erase(t.begin() + static_cast<long>(i));
                                    return t;
                                  }()).w,
                                  1e-12);
  }
}

TEST(PgdOracle, MatchesEigenOracle) {
  Rng rng(81);
  Sample s;
  for (int i = 0; i < 30; ++i) s.push_back(SymMatrix::diagonal({0.9, 0.5, 0.3}) * rng.unit_sphere(3));
  const auto sample = std::make_shared<const Sample>(s);
  const EmpiricalObjective full = pca_objective(sample);
  const PgdOracle pgd(std::make_shared<UnitSphere>(), SolverConfig{});
  const PcaEigenOracle eig(sample);
  expect_vector_near_up_to_sign(pgd.minimize(full, {}), eig.minimize(full, {}), 1e-7);
  const Vector hat = eig.minimize(full, {});
  expect_vector_near_up_to_sign(pgd.minimize(full.leave_one_out(3), hat), eig.minimize(full.leave_one_out(3), hat),
                                1e-7);
}

TEST(AlignMinimizer, Examples) {
  expect_vector_near(align_minimizer({-1.0, 0.0}, {1.0, 0.0}, Symmetry::kSignFlip), {1.0, 0.0}, 0.0);
  expect_vector_near(align_minimizer({0.0, 1.0}, {1.0, 0.0}, Symmetry::kSignedPermutation), {1.0, 0.0}, 0.0);
  expect_vector_near(align_minimizer({kR, kR}, {1.0, 0.0}, Symmetry::kSignFlip), {kR, kR}, 0.0);
  expect_vector_near(align_minimizer({-0.6, 0.8}, {1.0, 0.0}, Symmetry::kNone), {-0.6, 0.8}, 0.0);
}

}  // namespace
}  // namespace saddlestab
