// Leave-one-out stability trials, n-sweeps with rate fitting, and the
// per-trial check of the stability inequality chain.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "saddlestab/certifier.hpp"
#include "saddlestab/objective.hpp"
#include "saddlestab/random.hpp"
#include "saddlestab/solvers.hpp"
#include "saddlestab/symmetry.hpp"

namespace saddlestab {

/// A data distribution with an exactly known population risk.
class Distribution {
 public:
  virtual ~Distribution() = default;
  virtual std::size_t dim() const = 0;
  virtual Sample sample(std::size_t n, Rng& rng) const = 0;
  /// F(w) = E f(w, z), evaluated exactly.
  virtual double population_risk(const Vector& w) const = 0;
  /// min F over the feasible set.
  virtual double optimal_risk() const = 0;
  virtual Symmetry symmetry() const = 0;
  /// Application-specific high-probability event for this sample, if any.
  virtual std::optional<bool> event(const Sample&) const { return std::nullopt; }
};

struct TrialSetup {
  std::shared_ptr<const Distribution> distribution;
  std::shared_ptr<const DatumLoss> loss;
  std::shared_ptr<const ConstraintSet> constraints;
  /// Builds the ERM oracle for one trial's full-sample objective.
  std::function<std::shared_ptr<const ErmOracle>(const EmpiricalObjective&)> make_oracle;
  /// When set, every leave-one-out minimizer is classified on the full
  /// empirical objective against ŵ.
  std::optional<SaddleParams> classify_params;
  /// Threads for the leave-one-out sweep inside one trial.
  unsigned loo_jobs = 1;
};

struct TrialRecord {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;

  Vector hat_w;
  /// Δᵢ = fᵢ(ŵᵢ) − fᵢ(ŵ)
  std::vector<double> delta_terms;
  double delta_mean = 0.0;
  /// F(ŵ) − F̂(ŵ)
  double gen_gap = 0.0;
  /// F(ŵ) − min F
  double excess_risk = 0.0;
  std::optional<bool> event;

  /// F̂(ŵᵢ) − F̂(ŵ) on the full sample.
  std::vector<double> suboptimality;
  /// ‖ŵᵢ − ŵ‖ after alignment.
  std::vector<double> step;
  /// ‖∇L̂(ŵᵢ)‖ and the minimum restricted curvature of the full objective at ŵᵢ.
  std::vector<double> loo_gradient_norm;
  std::vector<double> loo_min_curvature;
  /// Empty unless TrialSetup::classify_params is set.
  std::vector<Regime> loo_regime;
};

/// One trial: draw n points from Rng(seed), solve the ERM and every
/// leave-one-out problem, and record the stability quantities. Solver
/// failures mark the record failed instead of propagating.
TrialRecord run_trial(const TrialSetup& setup, std::size_t n, std::uint64_t seed);

struct SweepConfig {
  std::vector<std::size_t> n_values;
  std::size_t trials = 2;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  /// α used for the 2ρ²/(αn) column; the column is omitted when unset.
  std::optional<double> alpha;
  /// G₁₂ used for the 4/(nG₁₂) column; omitted when unset.
  std::optional<double> gap;
  /// n values whose event failure rate exceeds this are left out of the fit.
  double max_event_failure = 0.05;
};

/// Seed of trial t at sample size n.
std::uint64_t trial_seed(std::uint64_t root, std::size_t n, std::size_t t);

struct SweepAggregate {
  std::size_t n = 0;
  std::size_t trials = 0;
  std::size_t failed = 0;
  /// Fraction of successful trials whose event held; NaN when no event is defined.
  double event_frequency = 0.0;
  double mean_delta = 0.0;
  double se_delta = 0.0;
  double mean_gen_gap = 0.0;
  double se_gen_gap = 0.0;
  /// Standard error of the per-trial difference gen_gap − delta_mean.
  double se_difference = 0.0;
  double mean_excess_risk = 0.0;
  std::optional<double> bound_2rho2_alphan;
  std::optional<double> bound_4nG;
  bool used_in_fit = false;
};

struct StabilityReport {
  std::vector<TrialRecord> records;  ///< sorted by (n, seed)
  std::vector<SweepAggregate> aggregates;
  double rho = 0.0;
  /// Least-squares slope of log mean Δ against log n; absent with fewer
  /// than two usable n values.
  std::optional<double> slope;
  std::optional<double> slope_se;

  nlohmann::json to_json() const;
};

class SweepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

StabilityReport stability_sweep(const TrialSetup& setup, const SweepConfig& config);

/// Least-squares slope and its standard error for y against x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Recomputes the aggregate of the given records at one n.
SweepAggregate aggregate(const std::vector<TrialRecord>& records, std::size_t n,
                         const SweepConfig& config, double rho);

// ---------------------------------------------------------------------------
// Inequality chain

struct BoundViolation {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  /// Datum index, absent for per-trial inequalities.
  std::optional<std::size_t> index;
  std::string inequality;
  double slack = 0.0;
};

inline constexpr double kChainTolerance = 1e-8;

/// Checks, for every successful record and every i:
///   lipschitz         Δᵢ ≤ ρ‖ŵᵢ − ŵ‖
///   suboptimality     F̂(ŵᵢ) − F̂(ŵ) ≤ Δᵢ/n
///   strong_convexity  F̂(ŵᵢ) − F̂(ŵ) ≥ (α/2)‖ŵᵢ − ŵ‖²
///   squared_chain     Δᵢ² ≤ ρ²(2/α)(F̂(ŵᵢ) − F̂(ŵ))
/// and per record
///   stability_bound   Δ ≤ 2ρ²/(αn)
/// Each slack is (right side − left side); anything below −kChainTolerance
/// is returned.
std::vector<BoundViolation> check_bounds(const std::vector<TrialRecord>& records,
                                         const LossConstants& constants, double alpha);

/// Number of (trial, i) pairs check_bounds examines.
std::size_t chain_pair_count(const std::vector<TrialRecord>& records);

// ---------------------------------------------------------------------------
// Output

/// One JSON object per line, one line per record.
void write_records_jsonl(std::ostream& out, const std::vector<TrialRecord>& records);

/// Columns: n, seed, delta_mean, gen_gap, excess_risk, gap_event,
/// bound_2rho2_alphan, bound_4nG. Empty cells for absent values.
void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records,
                       const SweepConfig& config, double rho);

/// Fixed-format decimal rendering used by every text output.
std::string format_number(double x);

}  // namespace saddlestab
