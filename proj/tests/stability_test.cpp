#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <sstream>

#include "saddlestab/pca.hpp"
#include "saddlestab/stability.hpp"
#include "test_support.hpp"

namespace saddlestab {
namespace {

/// Every draw is the same point z.
class PointMass final : public Distribution {
 public:
  explicit PointMass(Vector z) : z_(std::move(z)) {}
  std::size_t dim() const override { return z_.size(); }
  Sample sample(std::size_t n, Rng&) const override { return Sample(n, z_); }
  double population_risk(const Vector& w) const override { return -0.5 * dot(w, z_) * dot(w, z_); }
  double optimal_risk() const override { return -0.5 * dot(z_, z_); }
  Symmetry symmetry() const override { return Symmetry::kSignFlip; }

 private:
  Vector z_;
};

class FailingOracle final : public ErmOracle {
 public:
  Vector minimize(const EmpiricalObjective&, const Vector&) const override {
    throw NumericsError("deliberate failure");
  }
};

TrialSetup pca_setup(std::shared_ptr<const Distribution> dist) {
  TrialSetup s;
  s.distribution = std::move(dist);
  s.loss = std::make_shared<PcaLoss>();
  s.constraints = std::make_shared<UnitSphere>();
  s.make_oracle = [](const EmpiricalObjective& full) -> std::shared_ptr<const ErmOracle> {
    return std::make_shared<PcaEigenOracle>(full.sample_ptr());
  };
  return s;
}

std::shared_ptr<const PcaDistribution> small_pca(std::uint64_t basis_seed = 1) {
  return std::make_shared<PcaDistribution>(gen_pca_distribution(4, {0.5, 0.2, 0.1, 0.05}, basis_seed));
}

TEST(RunTrial, PointMassHasNoInstability) {
  const TrialRecord r = run_trial(pca_setup(std::make_shared<PointMass>(Vector{0.6, 0.0, 0.8})), 5, 3);
  ASSERT_FALSE(r.failed);
  for (double d : r.delta_terms) EXPECT_NEAR(d, 0.0, 1e-15);
  EXPECT_NEAR(r.gen_gap, 0.0, 1e-15);
  const auto violations = check_bounds({r}, PcaLoss().constants(), 0.1);
  EXPECT_TRUE(violations.empty());
}

TEST(RunTrial, MatchesClosedFormTwoByTwoOracle) {
  const auto dist = std::make_shared<PcaDistribution>(Vector{0.6, 0.3}, Matrix::identity(2));
  const std::uint64_t seed = 77;
  const TrialRecord r = run_trial(pca_setup(dist), 4, seed);
  ASSERT_FALSE(r.failed);

  Rng rng(seed);
  const Sample s = dist->sample(4, rng);
  auto leading = [](const std::vector<Datum>& pts) {
    double a = 0, b = 0, c = 0;
    for (const Datum& z : pts) {
      a += z[0] * z[0];
      b += z[0] * z[1];
      c += z[1] * z[1];
    }
    const double theta = 0.5 * std::atan2(2.0 * b, a - c);
    return Vector{std::cos(theta), std::sin(theta)};
  };
  const Vector hat = leading(s);
  double mean = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    Sample rest = s;
    rest.erase(rest.begin() + static_cast<long>(i));
    const Vector wi = leading(rest);
    const double expected = -0.5 * dot(wi, s[i]) * dot(wi, s[i]) + 0.5 * dot(hat, s[i]) * dot(hat, s[i]);
    EXPECT_NEAR(r.delta_terms[i], expected, 1e-13) << "i=" << i;
    mean += expected / 4.0;
  }
  EXPECT_NEAR(r.delta_mean, mean, 1e-13);
}

TEST(RunTrial, ExcessRiskNonnegativeAndDeterministic) {
  const auto setup = pca_setup(small_pca());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TrialRecord a = run_trial(setup, 30, seed);
    EXPECT_GE(a.excess_risk, -1e-10);
    const TrialRecord b = run_trial(setup, 30, seed);
    EXPECT_EQ(a.delta_terms, b.delta_terms);
    EXPECT_EQ(a.hat_w, b.hat_w);
  }
}

TEST(RunTrial, SolverFailureMarksRecord) {
  TrialSetup s = pca_setup(small_pca());
  s.make_oracle = [](const EmpiricalObjective&) -> std::shared_ptr<const ErmOracle> {
    return std::make_shared<FailingOracle>();
  };
  const TrialRecord r = run_trial(s, 10, 1);
  EXPECT_TRUE(r.failed);
  EXPECT_NE(r.failure.find("deliberate"), std::string::npos);

  SweepConfig cfg;
  cfg.n_values = {10};
  cfg.trials = 2;
  EXPECT_THROW(stability_sweep(s, cfg), SweepError);
}

TEST(StabilitySweep, RejectsSingleTrial) {
  SweepConfig cfg;
  cfg.n_values = {10};
  cfg.trials = 1;
  EXPECT_THROW(stability_sweep(pca_setup(small_pca()), cfg), std::invalid_argument);
}

TEST(StabilitySweep, SingleNHasNoSlope) {
  SweepConfig cfg;
  cfg.n_values = {20};
  cfg.trials = 3;
  const StabilityReport rep = stability_sweep(pca_setup(small_pca()), cfg);
  EXPECT_FALSE(rep.slope.has_value());
  ASSERT_EQ(rep.aggregates.size(), 1u);
}

TEST(StabilitySweep, JobCountDoesNotChangeResults) {
  SweepConfig cfg;
  cfg.n_values = {20, 40};
  cfg.trials = 4;
  cfg.seed = 5;
  cfg.jobs = 1;
  const auto a = stability_sweep(pca_setup(small_pca()), cfg);
  cfg.jobs = 4;
  const auto b = stability_sweep(pca_setup(small_pca()), cfg);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(StabilitySweep, RateAndBoundsOnGappedPca) {
  const auto dist = small_pca();
  SweepConfig cfg;
  cfg.n_values = {200, 400, 800};
  cfg.trials = 12;
  cfg.seed = 3;
  cfg.alpha = dist->gap() / 4.0;
  cfg.gap = dist->gap();
  const StabilityReport rep = stability_sweep(pca_setup(dist), cfg);
  for (const auto& g : rep.aggregates) {
    EXPECT_GE(g.mean_delta, -1e-8);
    if (g.event_frequency >= 0.95) {
      EXPECT_LE(g.mean_delta, 4.0 / (static_cast<double>(g.n) * dist->gap()));
    }
    ASSERT_TRUE(g.bound_4nG.has_value());
    EXPECT_NEAR(*g.bound_4nG, 4.0 / (static_cast<double>(g.n) * dist->gap()), 1e-15);
  }
  ASSERT_TRUE(rep.slope.has_value());
  EXPECT_GE(*rep.slope, -1.2);
  EXPECT_LE(*rep.slope, -0.8);

  std::vector<TrialRecord> with_event;
  for (const auto& r : rep.records)
    if (r.event.value_or(false)) with_event.push_back(r);
  ASSERT_FALSE(with_event.empty());
  EXPECT_TRUE(check_bounds(with_event, PcaLoss().constants(), dist->gap() / 4.0).empty());
  EXPECT_EQ(chain_pair_count(with_event), [&] {
    std::size_t n = 0;
    for (const auto& r : with_event) n += r.n;
    return n;
  }());

  const auto broken = check_bounds(with_event, PcaLoss().constants(), 100.0);
  ASSERT_FALSE(broken.empty());
  bool strong = false;
  for (const auto& v : broken) strong = strong || v.inequality == "strong_convexity";
  EXPECT_TRUE(strong);
}

TEST(StabilitySweep, GeneralizationGapMatchesStability) {
  const auto dist = small_pca(2);
  SweepConfig cfg;
  cfg.n_values = {60};
  cfg.trials = 240;
  cfg.seed = 11;
  const auto rep = stability_sweep(pca_setup(dist), cfg);
  const auto& g = rep.aggregates.front();
  const double se = std::sqrt(g.se_gen_gap * g.se_gen_gap + g.se_delta * g.se_delta);
  EXPECT_LE(std::abs(g.mean_gen_gap - g.mean_delta), 3.0 * se);
}

TEST(StabilitySweep, SquaredChainHoldsWhereClassifiedConvex) {
  TrialSetup setup = pca_setup(small_pca());
  const SaddleParams p = theorem4_params(0.3, kDefaultC);
  setup.classify_params = p;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TrialRecord r = run_trial(setup, 200, seed);
    ASSERT_EQ(r.loo_regime.size(), r.n);
    for (std::size_t i = 0; i < r.n; ++i) {
      if (r.loo_regime[i] != Regime::kStronglyConvexRegion) continue;
      EXPECT_LE(r.delta_terms[i] * r.delta_terms[i], (2.0 / p.alpha) * r.suboptimality[i] + 1e-8);
    }
  }
}

TEST(FitLine, ExactLine) {
  const LineFit f = fit_line({0.0, 1.0, 2.0, 3.0}, {1.0, -1.0, -3.0, -5.0});
  EXPECT_NEAR(f.slope, -2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.slope_se, 0.0, 1e-12);
}

TEST(Output, CsvHeaderAndEmptyCells) {
  SweepConfig cfg;
  cfg.n_values = {10};
  cfg.trials = 2;
  const auto rep = stability_sweep(pca_setup(std::make_shared<PointMass>(Vector{0.6, 0.8})), cfg);
  std::ostringstream csv;
  write_records_csv(csv, rep.records, cfg, rep.rho);
  std::istringstream lines(csv.str());
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_EQ(header, "n,seed,delta_mean,gen_gap,excess_risk,gap_event,bound_2rho2_alphan,bound_4nG");
  EXPECT_EQ(row.substr(row.size() - 3), ",,,");

  std::ostringstream jl;
  write_records_jsonl(jl, rep.records);
  std::size_t count = 0;
  for (char ch : jl.str()) count += ch == '\n';
  EXPECT_EQ(count, 2u);
}

TEST(Output, FormatNumberIsFixed) {
  EXPECT_EQ(format_number(0.25), "2.500000000000e-01");
  EXPECT_EQ(format_number(-3.0), "-3.000000000000e+00");
}

TEST(TrialSeed, DistinctAcrossTrialsAndSizes) {
  EXPECT_NE(trial_seed(0, 10, 0), trial_seed(0, 10, 1));
  EXPECT_NE(trial_seed(0, 10, 0), trial_seed(0, 20, 0));
  EXPECT_EQ(trial_seed(4, 10, 2), trial_seed(4, 10, 2));
}

}  // namespace
}  // namespace saddlestab
