#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "saddlestab/certifier.hpp"
#include "saddlestab/pca.hpp"
#include "test_support.hpp"

namespace saddlestab {
namespace {

const double kR = 1.0 / std::sqrt(2.0);

struct PcaFixture : ::testing::Test {
  QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5}));
  UnitSphere sphere;
  std::vector<KnownMinimum> minima = evaluate_minima(f, {{1.0, 0.0}});

  SaddleClassification classify(const Vector& w, SaddleParams p) const {
    return classify_point(lagrangian_state(f, sphere, w), p, minima, Symmetry::kSignFlip);
  }
};

TEST_F(PcaFixture, LargeGradientAtDiagonalPoint) {
  const auto c = classify({kR, kR}, {0.1, 0.1, 0.1, std::nullopt});
  EXPECT_EQ(c.regime, Regime::kLargeGradient);
  EXPECT_NEAR(c.witness, 0.25, 1e-15);
}

TEST_F(PcaFixture, NegativeCurvatureAtSaddle) {
  const auto c = classify({0.0, 1.0}, {0.1, 0.1, 0.1, std::nullopt});
  EXPECT_EQ(c.regime, Regime::kNegativeCurvature);
  EXPECT_NEAR(c.witness, -0.5, 1e-15);
}

TEST_F(PcaFixture, StronglyConvexAtMinimumWithZeroSlacks) {
  for (double alpha : {0.5, 0.25, 1e-3}) {
    const auto c = classify({1.0, 0.0}, {alpha, 0.1, 0.1, std::nullopt});
    EXPECT_EQ(c.regime, Regime::kStronglyConvexRegion);
    EXPECT_NEAR(c.upper_slack, 0.0, 1e-15);
    EXPECT_NEAR(c.lower_slack, 0.0, 1e-15);
  }
}

TEST_F(PcaFixture, NearestMinimumUsesSignFlip) {
  const auto c = classify({-1.0, 0.0}, {0.25, 0.1, 0.1, std::nullopt});
  EXPECT_EQ(c.regime, Regime::kStronglyConvexRegion);
  ASSERT_TRUE(c.nearest_minimum);
  testing::expect_vector_near(*c.nearest_minimum, {-1.0, 0.0}, 0.0);
}

TEST_F(PcaFixture, NuRestrictsTheRegion) {
  const Vector w = normalized({1.0, 0.05});
  EXPECT_EQ(classify(w, {0.25, 0.1, 0.1, 1e-3}).regime, Regime::kUnclassified);
  EXPECT_EQ(classify(w, {0.25, 0.1, 0.1, 1.0}).regime, Regime::kStronglyConvexRegion);
}

TEST(UnconstrainedClassify, Examples) {
  const QuadraticObjective bowl(SymMatrix::identity(2));
  const auto minima = evaluate_minima(bowl, {{0.0, 0.0}});
  const SaddleParams p{1.0, 0.5, 0.1, std::nullopt};
  EXPECT_EQ(unconstrained_classify({0.3, 0.0}, bowl, p, minima, Symmetry::kNone).regime,
            Regime::kLargeGradient);
  EXPECT_EQ(unconstrained_classify({0.01, -0.02}, bowl, p, minima, Symmetry::kNone).regime,
            Regime::kStronglyConvexRegion);

  const QuadraticObjective saddle(SymMatrix::diagonal({1.0, -1.0}));
  const auto c = unconstrained_classify({0.0, 0.0}, saddle, p, {}, Symmetry::kNone);
  EXPECT_EQ(c.regime, Regime::kNegativeCurvature);
  EXPECT_DOUBLE_EQ(c.witness, -1.0);
}

TEST(UnconstrainedClassify, SameRegimesThroughClassifyPoint) {
  const QuadraticObjective bowl(SymMatrix::identity(2));
  const auto minima = evaluate_minima(bowl, {{0.0, 0.0}});
  const SaddleParams p{1.0, 0.5, 0.1, std::nullopt};
  const auto st = lagrangian_state(bowl, Unconstrained(), {0.01, 0.02});
  EXPECT_EQ(classify_point(st, p, minima, Symmetry::kNone).regime, Regime::kStronglyConvexRegion);
}

TEST(CertifyRegion, Theorem4ConstantsCertifyPca) {
  const QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5, 0.25}));
  const auto minima = evaluate_minima(f, {{1.0, 0.0, 0.0}});
  const PointSampler sampler = [](Rng& r) { return r.unit_sphere(3); };
  const auto report = certify_region(f, UnitSphere(), theorem4_params(0.5, kDefaultC), sampler, 10000,
                                     minima, {7, 2, Symmetry::kSignFlip});
  EXPECT_EQ(report.sampled, 10000u);
  EXPECT_EQ(report.unclassified, 0u);
  EXPECT_TRUE(report.certified());
  EXPECT_EQ(report.large_gradient + report.negative_curvature + report.strongly_convex, 10000u);
}

TEST(CertifyRegion, EmptyRunIsVacuouslyCertified) {
  const QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5}));
  const PointSampler sampler = [](Rng& r) { return r.unit_sphere(2); };
  const auto report = certify_region(f, UnitSphere(), {0.1, 0.1, 0.1, std::nullopt}, sampler, 0, {});
  EXPECT_EQ(report.sampled, 0u);
  EXPECT_TRUE(report.certified());
}

TEST(CertifyRegion, BrokenParamsReportSaddleCounterexamples) {
  const QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5}));
  const auto minima = evaluate_minima(f, {{1.0, 0.0}});
  // τ above every gradient on the sphere, γ above every |curvature|, α far too large.
  const PointSampler sampler = [](Rng& r) { return normalized(add({0.0, 1.0}, scaled(r.unit_sphere(2), 0.05))); };
  const auto report =
      certify_region(f, UnitSphere(), {10.0, 1.0, 1.0, std::nullopt}, sampler, 100, minima);
  EXPECT_EQ(report.unclassified, 100u);
  ASSERT_FALSE(report.counterexamples.empty());
  EXPECT_GT(std::abs(report.counterexamples.front().point[1]), 0.99);
  EXPECT_FALSE(report.to_json()["certified"].get<bool>());
}

TEST(CertifyRegion, DeterministicAcrossJobCounts) {
  const QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5, 0.25}));
  const auto minima = evaluate_minima(f, {{1.0, 0.0, 0.0}});
  const PointSampler sampler = [](Rng& r) { return r.unit_sphere(3); };
  const SaddleParams p{0.3, 0.05, 0.05, std::nullopt};
  const auto a = certify_region(f, UnitSphere(), p, sampler, 500, minima, {3, 1, Symmetry::kSignFlip});
  const auto b = certify_region(f, UnitSphere(), p, sampler, 500, minima, {3, 4, Symmetry::kSignFlip});
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(ClassifyPoint, RegimeSoundnessRecheckedFromRawDerivatives) {
  Rng rng(17);
  const SymMatrix a = SymMatrix::diagonal({0.9, 0.6, 0.3, 0.1});
  const QuadraticObjective f = reduced_pca_objective(a);
  const auto minima = evaluate_minima(f, {unit_vector(4, 0)});
  const SaddleParams p{0.15, 0.1, 0.05, std::nullopt};
  for (int k = 0; k < 300; ++k) {
    const Vector w = k % 2 ? rng.unit_sphere(4) : normalized(add(unit_vector(4, k % 4), scaled(rng.unit_sphere(4), 0.05)));
    const auto c = classify_point(lagrangian_state(f, UnitSphere(), w), p, minima, Symmetry::kSignFlip);
    // Independent recomputation: projected gradient (I − wwᵀ)(−Aw); restricted
    // curvature from (λI − A) on the tangent space.
    const Vector aw = a * w;
    const double lambda = dot(w, aw);
    const Vector g = add(scaled(aw, -1.0), scaled(w, lambda));
    SymMatrix h = SymMatrix::identity(4);
    h *= lambda;
    h -= a;
    Matrix cmat(4, 1);
    cmat.set_column(0, w);
    const double curv = min_eigenvalue(h.congruence(tangent_basis(cmat)));
    switch (c.regime) {
      case Regime::kLargeGradient: EXPECT_GE(norm(g), p.tau); break;
      case Regime::kNegativeCurvature:
        EXPECT_LT(norm(g), p.tau);
        EXPECT_LE(curv, -p.gamma + 1e-14);
        break;
      case Regime::kStronglyConvexRegion: {
        const Vector m = dot(w, unit_vector(4, 0)) >= 0 ? unit_vector(4, 0) : scaled(unit_vector(4, 0), -1.0);
        const double gap = f.value(w) - f.value(m);
        const double d2 = distance(w, m) * distance(w, m);
        EXPECT_GE(gap, 0.5 * p.alpha * d2 - 1e-12);
        EXPECT_LE(gap, dot(g, g) / (2.0 * p.alpha) + 1e-12);
        break;
      }
      case Regime::kUnclassified: break;
    }
  }
}

TEST(ClassifyPoint, ShrinkingParamsNeverUnclassifies) {
  Rng rng(23);
  const QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5, 0.2}));
  const auto minima = evaluate_minima(f, {unit_vector(3, 0)});
  const SaddleParams p{0.2, 0.2, 0.05, std::nullopt};
  for (int k = 0; k < 500; ++k) {
    const auto st = lagrangian_state(f, UnitSphere(), rng.unit_sphere(3));
    if (classify_point(st, p, minima, Symmetry::kSignFlip).regime == Regime::kUnclassified) continue;
    for (double s : {0.5, 0.1}) {
      EXPECT_NE(classify_point(st, p.scaled_by(s), minima, Symmetry::kSignFlip).regime, Regime::kUnclassified);
    }
  }
}

TEST(ClassifyPoint, ScalingTheObjectiveScalesWitnesses) {
  Rng rng(29);
  const auto base = std::make_shared<QuadraticObjective>(reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5, 0.2})));
  const ScaledObjective scaled_f(base, 3.0);
  const auto m1 = evaluate_minima(*base, {unit_vector(3, 0)});
  const auto m3 = evaluate_minima(scaled_f, {unit_vector(3, 0)});
  const SaddleParams p{0.2, 0.2, 0.05, std::nullopt};
  for (int k = 0; k < 200; ++k) {
    const Vector w = rng.unit_sphere(3);
    const auto a = classify_point(lagrangian_state(*base, UnitSphere(), w), p, m1, Symmetry::kSignFlip);
    const auto b = classify_point(lagrangian_state(scaled_f, UnitSphere(), w), p.scaled_by(3.0), m3,
                                  Symmetry::kSignFlip);
    EXPECT_EQ(a.regime, b.regime);
    EXPECT_NEAR(b.witness, 3.0 * a.witness, 1e-12);
  }
}

TEST(EstimateSaddleParams, QuadraticBowlRecoversCurvature) {
  const double alpha0 = 2.0;
  const QuadraticObjective f(SymMatrix::diagonal({alpha0, alpha0, alpha0}));
  const auto minima = evaluate_minima(f, {{0.0, 0.0, 0.0}});
  const PointSampler sampler = [](Rng& r) { return r.normal_vector(3); };
  const SaddleParams p = estimate_saddle_params(f, Unconstrained(), sampler, 500, minima, {1, 1, Symmetry::kNone});
  EXPECT_NEAR(p.alpha, alpha0, 0.05 * alpha0);
}

TEST(EstimateSaddleParams, PcaConstantsAreOrderGap) {
  const QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5}));
  const auto minima = evaluate_minima(f, {{1.0, 0.0}});
  const SaddleParams p = estimate_saddle_params(f, UnitSphere(), sphere_sampler_near_minima(2, {{1.0, 0.0}}), 2000,
                                                minima, {5, 2, Symmetry::kSignFlip});
  EXPECT_GE(p.tau, 0.5 / 64);
  EXPECT_GE(p.gamma, 0.5 / 64);
  EXPECT_GE(p.alpha, 0.5 / 64);
}

TEST(EstimateSaddleParams, MinimumOnlyGivesRestrictedCurvature) {
  const QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5}));
  const auto minima = evaluate_minima(f, {{1.0, 0.0}});
  const PointSampler only_min = [](Rng&) { return Vector{1.0, 0.0}; };
  const SaddleParams p = estimate_saddle_params(f, UnitSphere(), only_min, 10, minima);
  EXPECT_NEAR(p.alpha, 0.5, 1e-12);
}

TEST(EstimateSaddleParams, NoMinimaIsAnError) {
  const QuadraticObjective f = reduced_pca_objective(SymMatrix::diagonal({1.0, 0.5}));
  const PointSampler s = [](Rng& r) { return r.unit_sphere(2); };
  EXPECT_THROW(estimate_saddle_params(f, UnitSphere(), s, 10, {}), std::invalid_argument);
}

TEST(SaddleParams, ValidateRejectsNonPositive) {
  EXPECT_THROW((SaddleParams{0.0, 1.0, 1.0, std::nullopt}).validate(), std::invalid_argument);
  EXPECT_THROW((SaddleParams{1.0, 1.0, 1.0, -1.0}).validate(), std::invalid_argument);
  EXPECT_NO_THROW((SaddleParams{1.0, 1.0, 1.0, std::nullopt}).validate());
}

}  // namespace
}  // namespace saddlestab
