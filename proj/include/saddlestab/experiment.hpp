// Batch experiments behind the command-line runner.
//
// A configuration is a flat set of key = value pairs. Each experiment
// declares its keys with defaults; unknown keys and malformed values are
// rejected before anything runs or is written. Every run writes
//   results.jsonl   one JSON record per line
//   summary.csv     a flat table with a fixed column order
//   manifest.json   the experiment name and every resolved key
// and nothing else, so reruns with the same configuration are byte-identical.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <memory>
#include <optional>
#include <vector>

#include "saddlestab/certifier.hpp"
#include "saddlestab/pca.hpp"
#include "saddlestab/stability.hpp"

namespace saddlestab::experiment {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Config = std::map<std::string, std::string>;

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped; a repeated key is an error.
Config parse_config_text(const std::string& text);
Config load_config_file(const std::filesystem::path& path);
/// Applies a `key=value` override (the override wins).
void apply_override(Config& config, const std::string& assignment);

const std::vector<std::string>& experiment_names();

/// key → default value, for the given experiment.
const std::map<std::string, std::string>& experiment_defaults(const std::string& name);

/// Defaults merged with `config`; throws ConfigError on unknown keys or
/// an unknown experiment.
Config resolve_config(const std::string& name, const Config& config);

struct RunOptions {
  std::filesystem::path out_dir;
  unsigned jobs = 1;
};

struct RunOutcome {
  /// False when a check requested by the configuration failed.
  bool checks_passed = true;
  /// Human-readable lines for the terminal.
  std::vector<std::string> messages;
};

/// Validates, runs, and writes the three output files.
RunOutcome run_experiment(const std::string& name, const Config& config, const RunOptions& options);

// ---------------------------------------------------------------------------
// PCA stability sweep and its checks, shared with the acceptance runner.

/// (0.40, 0.10, 0.05, 0.025, ...) halving after the third entry.
Vector default_pca_spectrum(std::size_t d);

struct PcaStabilitySpec {
  std::size_t d = 10;
  Vector eigenvalues;  ///< empty: default_pca_spectrum(d)
  std::uint64_t basis_seed = 1;
  std::vector<std::size_t> n_values{100, 200, 400, 800, 1600, 3200};
  std::size_t trials = 50;
  double c = kDefaultC;
  std::uint64_t seed = 0;
  /// Sphere points for estimating (α, γ, τ) on the population objective;
  /// 0 disables the estimate and the classification of ŵᵢ.
  std::size_t estimate_points = 2000;
};

struct PcaStabilityRun {
  std::shared_ptr<const PcaDistribution> distribution;
  std::optional<SaddleParams> estimated;
  SweepConfig sweep;
  StabilityReport report;
};

PcaStabilityRun run_pca_stability(const PcaStabilitySpec& spec, unsigned jobs);

/// Allowance for solver error in ‖∇L̂(ŵᵢ)‖ ≤ ρ/n.
inline constexpr double kSolverTolerance = 1e-9;
/// Minimum gap-event frequency for the 4/(nG₁₂) comparison.
inline constexpr double kEventFrequencyFloor = 0.95;

struct PcaStabilityChecks {
  /// mean Δ ≤ 4/(nG₁₂) at every n whose event frequency is at least 95%.
  bool rate_bound = true;
  std::size_t rate_points = 0;
  /// Fitted slope of log mean Δ against log n lies in [−1.2, −0.8].
  bool slope_ok = false;
  std::optional<double> slope;
  /// |mean gen_gap − mean Δ| ≤ 3·√(se_gen² + se_Δ²) at every n.
  bool lemma1 = true;
  /// check_bounds with α = G₁₂/4 on the trials whose gap event holds.
  bool chain = true;
  std::size_t chain_pairs = 0;
  std::size_t chain_violations = 0;
  /// For n > max(ρ/τ, β₁/γ): no ŵᵢ classified as large-gradient or
  /// negative-curvature, and ‖∇L̂(ŵᵢ)‖ ≤ ρ/n + kSolverTolerance.
  bool exclusion = true;
  double exclusion_threshold = 0.0;
  std::size_t exclusion_points = 0;
  std::size_t exclusion_failures = 0;
  std::vector<std::string> details;

  bool all() const { return rate_bound && slope_ok && lemma1 && chain && exclusion; }
};

PcaStabilityChecks check_pca_stability(const PcaStabilityRun& run);

// ---------------------------------------------------------------------------
// ICA recovery trial, shared with the acceptance runner.

struct IcaRecoveryRow {
  std::size_t n = 0;  ///< 0 means the exact tensor
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  double match_error = 0.0;
  /// max-entry |T̂ − T|
  double tensor_error = 0.0;
  /// 1 − T(âᵢ) for each recovered column, on the exact tensor
  std::vector<double> excess_risk;
};

/// Draws A from derive_seed(seed, 1), the sample from derive_seed(seed, 2),
/// and seeds the solver starts with derive_seed(seed, 3).
IcaRecoveryRow ica_recovery_trial(std::size_t d, std::size_t n, std::uint64_t seed,
                                  const SolverConfig& solver);

}  // namespace saddlestab::experiment
