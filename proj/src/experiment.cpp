#include "saddlestab/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "saddlestab/ica.hpp"
#include "saddlestab/parallel.hpp"
#include "saddlestab/random.hpp"

namespace saddlestab::experiment {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// ---------------------------------------------------------------------------
// Typed access to a resolved configuration

class Reader {
 public:
  Reader(std::string experiment, const Config& config)
      : experiment_(std::move(experiment)), config_(config) {}

  const std::string& raw(const std::string& key) const {
    const auto it = config_.find(key);
    if (it == config_.end()) fail(key, "missing");
    return it->second;
  }

  double real(const std::string& key) const { return parse_real(key, raw(key)); }

  double positive(const std::string& key) const {
    const double x = real(key);
    if (!(x > 0.0)) fail(key, "must be positive");
    return x;
  }

  std::optional<double> optional_positive(const std::string& key) const {
    if (raw(key).empty()) return std::nullopt;
    return positive(key);
  }

  std::uint64_t u64(const std::string& key) const { return parse_u64(key, raw(key)); }

  std::size_t count(const std::string& key, std::size_t min_value = 1) const {
    const std::uint64_t x = u64(key);
    if (x < min_value) fail(key, "must be at least " + std::to_string(min_value));
    return static_cast<std::size_t>(x);
  }

  bool flag(const std::string& key) const {
    const std::string& v = raw(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(key, "expected true or false, got '" + v + "'");
  }

  std::vector<std::size_t> counts(const std::string& key, std::size_t min_value) const {
    std::vector<std::size_t> out;
    for (const std::string& item : items(key)) {
      const std::uint64_t x = parse_u64(key, item);
      if (x < min_value) fail(key, "entries must be at least " + std::to_string(min_value));
      out.push_back(static_cast<std::size_t>(x));
    }
    if (out.empty()) fail(key, "must not be empty");
    for (std::size_t i = 1; i < out.size(); ++i)
      if (out[i] <= out[i - 1]) fail(key, "entries must be strictly increasing");
    return out;
  }

  Vector reals(const std::string& key) const {
    Vector out;
    for (const std::string& item : items(key)) out.push_back(parse_real(key, item));
    return out;
  }

  SolverConfig solver(std::uint64_t seed) const {
    SolverConfig s;
    s.step_size = positive("step_size");
    s.max_iters = count("max_iters");
    s.grad_tol = positive("grad_tol");
    s.escape_threshold = positive("escape_threshold");
    s.restarts = count("restarts", 0);
    s.seed = seed;
    return s;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(experiment_ + ": key '" + key + "': " + what);
  }

 private:
  std::vector<std::string> items(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(raw(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) fail(key, "empty list entry");
      out.push_back(item);
    }
    return out;
  }

  double parse_real(const std::string& key, const std::string& text) const {
    double x = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, x);
    if (ec != std::errc() || ptr != end || !std::isfinite(x))
      fail(key, "expected a finite number, got '" + text + "'");
    return x;
  }

  std::uint64_t parse_u64(const std::string& key, const std::string& text) const {
    std::uint64_t x = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, x);
    if (ec != std::errc() || ptr != end)
      fail(key, "expected a nonnegative integer, got '" + text + "'");
    return x;
  }

  std::string experiment_;
  const Config& config_;
};

// ---------------------------------------------------------------------------
// Defaults

const std::map<std::string, std::string> kSolverDefaults = {
    {"step_size", "0.25"}, {"max_iters", "50000"}, {"grad_tol", "1e-10"},
    {"escape_threshold", "0.001"},
};

std::map<std::string, std::string> with_solver(std::map<std::string, std::string> keys,
                                               const std::string& restarts) {
  keys.insert(kSolverDefaults.begin(), kSolverDefaults.end());
  keys["restarts"] = restarts;
  return keys;
}

const std::map<std::string, std::map<std::string, std::string>>& all_defaults() {
  static const std::map<std::string, std::map<std::string, std::string>> table = {
      {"certify",
       {{"seed", "0"}, {"d", "3"}, {"eigenvalues", "1,0.5,0.25"}, {"basis", "identity"},
        {"basis_seed", "1"}, {"points", "10000"}, {"c", "0.015625"}, {"params", "theorem4"},
        {"estimate_points", "2000"}, {"alpha", ""}, {"gamma", ""}, {"tau", ""},
        {"check", "false"}}},
      {"stability-pca",
       {{"seed", "0"}, {"d", "10"}, {"eigenvalues", ""}, {"basis_seed", "1"},
        {"n_values", "100,200,400,800,1600,3200"}, {"trials", "50"}, {"c", "0.015625"},
        {"estimate_points", "2000"}, {"check", "false"}}},
      {"stability-ica",
       with_solver({{"seed", "0"}, {"d", "3"}, {"mixing_seed", "1"},
                    {"n_values", "50,100,200,400"}, {"trials", "8"}, {"alpha", ""},
                    {"check", "false"}},
                   "4")},
      {"appendix-a",
       {{"seed", "0"}, {"d", "20"}, {"spectra", "20"}, {"points", "500"}, {"min_gap", "0.2"},
        {"c", "0.015625"}, {"check", "true"}}},
      {"appendix-b",
       {{"seed", "0"}, {"d_values", "3,4,5,6,7,8"}, {"points", "1000"}, {"check", "true"}}},
      {"recover-ica",
       with_solver({{"seed", "0"}, {"d", "4"}, {"n_values", "0,1000,10000,100000"},
                    {"trials", "20"}, {"max_exact_match_error", "1e-6"},
                    {"slope_min", "-0.65"}, {"slope_max", "-0.35"}, {"check", "false"}},
                   "2")},
  };
  return table;
}

// ---------------------------------------------------------------------------
// Output buffers

struct Output {
  std::vector<json> results;
  std::string csv;
  RunOutcome outcome;

  void message(std::string line) { outcome.messages.push_back(std::move(line)); }
  void check(bool ok, const std::string& what) {
    message(std::string(ok ? "check passed: " : "check FAILED: ") + what);
    if (!ok) outcome.checks_passed = false;
  }
};

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json params_json(const SaddleParams& p) {
  return {{"alpha", p.alpha}, {"gamma", p.gamma}, {"tau", p.tau}};
}

SymMatrix matrix_from_spectrum(const Matrix& q, const Vector& eigenvalues) {
  SymMatrix a(q.rows());
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) a.add_outer(q.column(i), eigenvalues[i]);
  return a;
}

PointSampler uniform_sphere(std::size_t d) {
  return [d](Rng& rng) { return rng.unit_sphere(d); };
}

// ---------------------------------------------------------------------------
// certify

void run_certify(const Reader& r, unsigned jobs, Output& out) {
  const std::uint64_t seed = r.u64("seed");
  const std::size_t d = r.count("d", 2);
  Vector lambda = r.reals("eigenvalues");
  if (lambda.size() != d) r.fail("eigenvalues", "needs exactly d entries");
  for (std::size_t i = 1; i < d; ++i)
    if (lambda[i] > lambda[i - 1]) r.fail("eigenvalues", "must be non-increasing");
  if (!(lambda[0] > lambda[1])) r.fail("eigenvalues", "needs λ₁ > λ₂");
  const std::string basis = r.raw("basis");
  if (basis != "identity" && basis != "random") r.fail("basis", "expected identity or random");
  const std::uint64_t basis_seed = r.u64("basis_seed");
  const std::size_t points = r.count("points");
  const double c = r.positive("c");
  const std::string mode = r.raw("params");
  if (mode != "theorem4" && mode != "estimate") r.fail("params", "expected theorem4 or estimate");
  const std::size_t estimate_points = r.count("estimate_points");
  const auto alpha = r.optional_positive("alpha");
  const auto gamma = r.optional_positive("gamma");
  const auto tau = r.optional_positive("tau");
  const bool check = r.flag("check");

  const Matrix q = basis == "identity" ? Matrix::identity(d) : Rng(basis_seed).orthonormal_matrix(d);
  const SymMatrix a = matrix_from_spectrum(q, lambda);
  const QuadraticObjective objective = reduced_pca_objective(a);
  const UnitSphere sphere;
  const auto minima = evaluate_minima(objective, {q.column(0)});
  const double gap = lambda[0] - lambda[1];

  SaddleParams params;
  if (mode == "theorem4") {
    params = theorem4_params(gap, c);
  } else {
    params = estimate_saddle_params(objective, sphere, sphere_sampler_near_minima(d, {q.column(0)}),
                                    estimate_points, minima,
                                    {derive_seed(seed, 1), jobs, Symmetry::kSignFlip});
  }
  if (alpha) params.alpha = *alpha;
  if (gamma) params.gamma = *gamma;
  if (tau) params.tau = *tau;

  const CertificationReport report =
      certify_region(objective, sphere, params, uniform_sphere(d), points, minima,
                     {derive_seed(seed, 2), jobs, Symmetry::kSignFlip});

  out.results.push_back({{"record", "params"}, {"source", mode}, {"gap", gap}, {"params", params_json(params)}});
  json rep = report.to_json();
  rep["record"] = "report";
  out.results.push_back(rep);

  out.csv = "regime,count\n";
  out.csv += "large_gradient," + std::to_string(report.large_gradient) + "\n";
  out.csv += "negative_curvature," + std::to_string(report.negative_curvature) + "\n";
  out.csv += "strongly_convex," + std::to_string(report.strongly_convex) + "\n";
  out.csv += "unclassified," + std::to_string(report.unclassified) + "\n";

  out.message("sampled " + std::to_string(report.sampled) + " points, " +
              std::to_string(report.unclassified) + " unclassified");
  if (check) out.check(report.certified(), "every sampled point classified");
}

// ---------------------------------------------------------------------------
// stability-pca

json aggregate_json(const SweepAggregate& g) {
  return {{"record", "aggregate"},
          {"n", g.n},
          {"trials", g.trials},
          {"failed", g.failed},
          {"event_frequency", number_or_null(g.event_frequency)},
          {"mean_delta", g.mean_delta},
          {"se_delta", g.se_delta},
          {"mean_gen_gap", g.mean_gen_gap},
          {"se_gen_gap", g.se_gen_gap},
          {"se_difference", g.se_difference},
          {"mean_excess_risk", g.mean_excess_risk},
          {"bound_2rho2_alphan", g.bound_2rho2_alphan ? json(*g.bound_2rho2_alphan) : json(nullptr)},
          {"bound_4nG", g.bound_4nG ? json(*g.bound_4nG) : json(nullptr)},
          {"used_in_fit", g.used_in_fit}};
}

void emit_sweep(const StabilityReport& report, const SweepConfig& sweep, Output& out) {
  std::ostringstream jl;
  write_records_jsonl(jl, report.records);
  std::istringstream lines(jl.str());
  for (std::string line; std::getline(lines, line);) {
    json j = json::parse(line);
    j["record"] = "trial";
    out.results.push_back(std::move(j));
  }
  for (const auto& g : report.aggregates) {
    out.results.push_back(aggregate_json(g));
    out.message("n=" + std::to_string(g.n) + " mean delta " + format_number(g.mean_delta) +
                " mean gen gap " + format_number(g.mean_gen_gap));
  }
  out.results.push_back({{"record", "fit"},
                         {"rho", report.rho},
                         {"slope", report.slope ? json(*report.slope) : json(nullptr)},
                         {"slope_se", report.slope_se ? json(*report.slope_se) : json(nullptr)}});
  if (report.slope) out.message("log-log slope " + format_number(*report.slope));
  std::ostringstream csv;
  write_records_csv(csv, report.records, sweep, report.rho);
  out.csv = csv.str();
}

void run_stability_pca(const Reader& r, unsigned jobs, Output& out) {
  PcaStabilitySpec spec;
  spec.seed = r.u64("seed");
  spec.d = r.count("d", 2);
  spec.eigenvalues = r.reals("eigenvalues");
  if (!spec.eigenvalues.empty() && spec.eigenvalues.size() != spec.d)
    r.fail("eigenvalues", "needs exactly d entries (or empty for the default spectrum)");
  spec.basis_seed = r.u64("basis_seed");
  spec.n_values = r.counts("n_values", 2);
  spec.trials = r.count("trials", 2);
  spec.c = r.positive("c");
  spec.estimate_points = r.count("estimate_points", 0);
  const bool check = r.flag("check");
  if (check && spec.estimate_points == 0) r.fail("estimate_points", "check=true needs estimate_points > 0");
  try {
    PcaDistribution(spec.eigenvalues.empty() ? default_pca_spectrum(spec.d) : spec.eigenvalues,
                    Matrix::identity(spec.d));
  } catch (const std::invalid_argument& e) {
    r.fail("eigenvalues", e.what());
  }

  const PcaStabilityRun run = run_pca_stability(spec, jobs);
  emit_sweep(run.report, run.sweep, out);
  if (run.estimated)
    out.results.push_back({{"record", "estimated_params"}, {"params", params_json(*run.estimated)}});

  if (check) {
    const PcaStabilityChecks c = check_pca_stability(run);
    out.results.push_back({{"record", "checks"},
                           {"rate_bound", c.rate_bound},
                           {"rate_points", c.rate_points},
                           {"slope_ok", c.slope_ok},
                           {"lemma1", c.lemma1},
                           {"chain", c.chain},
                           {"chain_pairs", c.chain_pairs},
                           {"chain_violations", c.chain_violations},
                           {"exclusion", c.exclusion},
                           {"exclusion_threshold", c.exclusion_threshold},
                           {"exclusion_points", c.exclusion_points},
                           {"exclusion_failures", c.exclusion_failures}});
    for (const auto& d : c.details) out.message(d);
    out.check(c.rate_bound, "mean delta within 4/(n G12)");
    out.check(c.slope_ok, "log-log slope in [-1.2, -0.8]");
    out.check(c.lemma1, "generalization gap matches stability within 3 SE");
    out.check(c.chain, "stability inequality chain");
    out.check(c.exclusion, "leave-one-out minimizers outside the excluded regimes");
  }
}

// ---------------------------------------------------------------------------
// stability-ica

void run_stability_ica(const Reader& r, unsigned jobs, Output& out) {
  const std::uint64_t seed = r.u64("seed");
  const std::size_t d = r.count("d", 2);
  if (d > kMaxTensorDim) r.fail("d", "at most " + std::to_string(kMaxTensorDim));
  const std::uint64_t mixing_seed = r.u64("mixing_seed");
  SweepConfig sweep;
  sweep.n_values = r.counts("n_values", 2);
  sweep.trials = r.count("trials", 2);
  sweep.seed = seed;
  sweep.jobs = jobs;
  sweep.alpha = r.optional_positive("alpha");
  const SolverConfig solver = r.solver(derive_seed(seed, 7));
  const bool check = r.flag("check");

  TrialSetup setup;
  setup.distribution = std::make_shared<IcaDistribution>(random_ica_instance(d, mixing_seed));
  setup.loss = std::make_shared<IcaDatumLoss>(d);
  setup.constraints = std::make_shared<UnitSphere>();
  setup.make_oracle = [solver](const EmpiricalObjective& full) -> std::shared_ptr<const ErmOracle> {
    return std::make_shared<IcaTensorOracle>(full.sample_ptr(), solver);
  };
  const StabilityReport report = stability_sweep(setup, sweep);
  emit_sweep(report, sweep, out);

  if (check) {
    std::size_t failed = 0;
    for (const auto& g : report.aggregates) failed += g.failed;
    out.check(failed == 0, "no failed trials (" + std::to_string(failed) + " failed)");
  }
}

// ---------------------------------------------------------------------------
// appendix-a

struct SpectrumSummary {
  Vector eigenvalues;
  std::size_t points = 0;
  std::size_t strongly_convex = 0;
  std::size_t strict_saddle = 0;
  std::size_t rejected = 0;
  std::size_t failures = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  std::map<std::string, double> min_slack_by_check;
  std::vector<json> counterexamples;
};

constexpr std::size_t kMaxReportedCounterexamples = 20;

void run_appendix_a(const Reader& r, unsigned jobs, Output& out) {
  const std::uint64_t seed = r.u64("seed");
  const std::size_t d = r.count("d", 2);
  const std::size_t spectra = r.count("spectra");
  const std::size_t points = r.count("points");
  const double min_gap = r.positive("min_gap");
  const double c = r.positive("c");
  if (c >= 1.0 / 32.0) r.fail("c", "must be below 1/32");
  const bool check = r.flag("check");

  std::vector<SpectrumSummary> summaries(spectra);
  parallel_for(spectra, jobs, [&](std::size_t s) {
    const std::uint64_t spectrum_seed = derive_seed(seed, s);
    Rng rng(spectrum_seed);
    SpectrumSummary& sum = summaries[s];
    sum.eigenvalues = random_gapped_spectrum(d, min_gap, rng);
    const Matrix q = rng.orthonormal_matrix(d);
    const SymMatrix a = matrix_from_spectrum(q, sum.eigenvalues);
    const EigenPairs eig = sym_eig(a);
    const PointSampler sampler = admissible_sampler(a, c);
    sum.points = points;
    for (std::size_t k = 0; k < points; ++k) {
      Rng point_rng(derive_seed(spectrum_seed, k + 1));
      const Vector w = sampler(point_rng);
      try {
        const AppendixAWitness witness = appendix_a_classify(w, a, eig, c);
        if (witness.branch == AppendixABranch::kStronglyConvex) ++sum.strongly_convex;
        else ++sum.strict_saddle;
        for (const auto& chk : witness.checks) {
          sum.min_slack = std::min(sum.min_slack, chk.slack);
          auto [it, inserted] = sum.min_slack_by_check.try_emplace(chk.name, chk.slack);
          if (!inserted) it->second = std::min(it->second, chk.slack);
        }
        if (!witness.all_hold()) {
          ++sum.failures;
          if (sum.counterexamples.size() < kMaxReportedCounterexamples) {
            json j = witness.to_json();
            j["record"] = "counterexample";
            j["spectrum"] = s;
            j["point_index"] = k;
            sum.counterexamples.push_back(std::move(j));
          }
        }
      } catch (const NotAdmissible&) {
        ++sum.rejected;
      }
    }
  });

  std::size_t total_points = 0, total_failures = 0, total_rejected = 0;
  out.csv = "spectrum,gap,points,strongly_convex,strict_saddle,rejected,failures,min_slack\n";
  for (std::size_t s = 0; s < spectra; ++s) {
    const SpectrumSummary& sum = summaries[s];
    json slacks = json::object();
    for (const auto& [name, v] : sum.min_slack_by_check) slacks[name] = v;
    out.results.push_back({{"record", "spectrum"},
                           {"spectrum", s},
                           {"eigenvalues", sum.eigenvalues},
                           {"gap", sum.eigenvalues[0] - sum.eigenvalues[1]},
                           {"points", sum.points},
                           {"strongly_convex", sum.strongly_convex},
                           {"strict_saddle", sum.strict_saddle},
                           {"rejected", sum.rejected},
                           {"failures", sum.failures},
                           {"min_slack_by_check", slacks}});
    for (const auto& j : sum.counterexamples) out.results.push_back(j);
    out.csv += std::to_string(s) + "," + format_number(sum.eigenvalues[0] - sum.eigenvalues[1]) + "," +
               std::to_string(sum.points) + "," + std::to_string(sum.strongly_convex) + "," +
               std::to_string(sum.strict_saddle) + "," + std::to_string(sum.rejected) + "," +
               std::to_string(sum.failures) + "," + format_number(sum.min_slack) + "\n";
    total_points += sum.points;
    total_failures += sum.failures;
    total_rejected += sum.rejected;
  }
  out.message(std::to_string(total_points) + " points over " + std::to_string(spectra) +
              " spectra, " + std::to_string(total_failures) + " counterexamples");
  if (check)
    out.check(total_failures == 0 && total_rejected == 0,
              "every admissible point classified with all inequalities holding");
}

// ---------------------------------------------------------------------------
// appendix-b

struct DimensionSummary {
  std::size_t d = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t lower_failures = 0;
  double min_lower_ratio = std::numeric_limits<double>::infinity();
  double max_upper_ratio = 0.0;
  double max_saddle_curvature = -std::numeric_limits<double>::infinity();
  double curvature_bound = 0.0;
};

void run_appendix_b(const Reader& r, unsigned jobs, Output& out) {
  const std::uint64_t seed = r.u64("seed");
  const std::vector<std::size_t> dims = r.counts("d_values", 2);
  if (dims.back() > kMaxTensorDim) r.fail("d_values", "at most " + std::to_string(kMaxTensorDim));
  const std::size_t points = r.count("points");
  const bool check = r.flag("check");

  std::vector<DimensionSummary> rows(dims.size());
  parallel_for(dims.size(), jobs, [&](std::size_t k) {
    const std::size_t d = dims[k];
    const std::uint64_t dim_seed = derive_seed(seed, d);
    const AppendixBConstants consts = appendix_b_constants(d);
    DimensionSummary& row = rows[k];
    row.d = d;
    for (std::size_t p = 0; p < points; ++p) {
      Rng rng(derive_seed(dim_seed, p + 1));
      const double s = rng.uniform(0.05, 1.0) * consts.tau / 8.0;
      Vector v = rng.unit_sphere(d);
      v[0] = 0.0;
      v = normalized(v);
      const AppendixBPoint pt = appendix_b_point(s, v, consts.tau0);
      if (!(pt.gradient_norm <= consts.tau) || pt.support != 1) {
        ++row.rejected;
        continue;
      }
      ++row.accepted;
      if (pt.lower_slack() < 0.0) ++row.lower_failures;
      row.min_lower_ratio = std::min(row.min_lower_ratio, pt.suboptimality / pt.distance2);
      row.max_upper_ratio = std::max(row.max_upper_ratio, pt.upper_ratio());
    }
    const IcaInstance instance = random_ica_instance(d, derive_seed(dim_seed, 0));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j)
        row.max_saddle_curvature =
            std::max(row.max_saddle_curvature, balanced_saddle_curvature(instance, i, j));
    row.curvature_bound = -7.0 / static_cast<double>(d);
  });

  bool ok = true;
  out.csv = "d,accepted,rejected,lower_failures,min_lower_ratio,max_upper_ratio,max_saddle_curvature,curvature_bound\n";
  for (const auto& row : rows) {
    out.results.push_back({{"record", "dimension"},
                           {"d", row.d},
                           {"accepted", row.accepted},
                           {"rejected", row.rejected},
                           {"lower_failures", row.lower_failures},
                           {"min_lower_ratio", number_or_null(row.min_lower_ratio)},
                           {"max_upper_ratio", row.max_upper_ratio},
                           {"max_saddle_curvature", row.max_saddle_curvature},
                           {"curvature_bound", row.curvature_bound}});
    out.csv += std::to_string(row.d) + "," + std::to_string(row.accepted) + "," +
               std::to_string(row.rejected) + "," + std::to_string(row.lower_failures) + "," +
               format_number(row.min_lower_ratio) + "," + format_number(row.max_upper_ratio) + "," +
               format_number(row.max_saddle_curvature) + "," + format_number(row.curvature_bound) + "\n";
    out.message("d=" + std::to_string(row.d) + ": " + std::to_string(row.lower_failures) +
                " lower-bound failures, max upper ratio " + format_number(row.max_upper_ratio) +
                ", saddle curvature " + format_number(row.max_saddle_curvature));
    ok = ok && row.rejected == 0 && row.lower_failures == 0 &&
         row.max_saddle_curvature <= row.curvature_bound;
  }
  if (check) out.check(ok, "lower sandwich at every point and saddle curvature below -7/d");
}

// ---------------------------------------------------------------------------
// recover-ica

void run_recover_ica(const Reader& r, unsigned jobs, Output& out) {
  const std::uint64_t seed = r.u64("seed");
  const std::size_t d = r.count("d", 2);
  if (d > kMaxTensorDim) r.fail("d", "at most " + std::to_string(kMaxTensorDim));
  const std::vector<std::size_t> n_values = r.counts("n_values", 0);
  const std::size_t trials = r.count("trials");
  const SolverConfig solver = r.solver(0);
  const double max_exact = r.positive("max_exact_match_error");
  const double slope_min = r.real("slope_min");
  const double slope_max = r.real("slope_max");
  const bool check = r.flag("check");

  std::vector<IcaRecoveryRow> rows(n_values.size() * trials);
  parallel_for(rows.size(), jobs, [&](std::size_t k) {
    const std::size_t n = n_values[k / trials];
    rows[k] = ica_recovery_trial(d, n, trial_seed(seed, n, k % trials), solver);
  });

  out.csv = "n,seed,match_error,tensor_error,max_excess_risk\n";
  std::vector<double> log_n, log_err;
  bool exact_ok = true;
  for (std::size_t b = 0; b < n_values.size(); ++b) {
    double err_sum = 0.0;
    std::size_t ok_count = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      const IcaRecoveryRow& row = rows[b * trials + t];
      const double max_excess =
          row.excess_risk.empty() ? 0.0 : *std::max_element(row.excess_risk.begin(), row.excess_risk.end());
      out.results.push_back({{"record", "trial"},
                             {"n", row.n},
                             {"seed", row.seed},
                             {"failed", row.failed},
                             {"failure", row.failure},
                             {"match_error", row.failed ? json(nullptr) : json(row.match_error)},
                             {"tensor_error", row.tensor_error},
                             {"excess_risk", row.excess_risk}});
      out.csv += std::to_string(row.n) + "," + std::to_string(row.seed) + "," +
                 (row.failed ? std::string() : format_number(row.match_error)) + "," +
                 format_number(row.tensor_error) + "," +
                 (row.failed ? std::string() : format_number(max_excess)) + "\n";
      if (row.n == 0 && (row.failed || row.match_error > max_exact)) exact_ok = false;
      err_sum += row.tensor_error;
      ++ok_count;
    }
    const std::size_t n = n_values[b];
    if (n > 0) {
      log_n.push_back(std::log(static_cast<double>(n)));
      log_err.push_back(std::log(err_sum / static_cast<double>(ok_count)));
    }
  }
  std::optional<LineFit> fit;
  if (log_n.size() >= 2) fit = fit_line(log_n, log_err);
  out.results.push_back({{"record", "fit"},
                         {"tensor_error_slope", fit ? json(fit->slope) : json(nullptr)},
                         {"tensor_error_slope_se", fit ? json(fit->slope_se) : json(nullptr)}});
  if (fit) out.message("tensor error log-log slope " + format_number(fit->slope));

  if (check) {
    out.check(exact_ok, "exact-tensor recovery within max_exact_match_error");
    out.check(fit && fit->slope >= slope_min && fit->slope <= slope_max,
              "tensor error slope within [slope_min, slope_max]");
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

// ---------------------------------------------------------------------------
// Config handling

Config parse_config_text(const std::string& text) {
  Config out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
    if (!out.emplace(key, value).second)
      throw ConfigError("line " + std::to_string(number) + ": repeated key '" + key + "'");
  }
  return out;
}

Config load_config_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(Config& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = trim(std::string_view(assignment).substr(0, eq));
  if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
  config[key] = trim(std::string_view(assignment).substr(eq + 1));
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [name, _] : all_defaults()) v.push_back(name);
    return v;
  }();
  return names;
}

const std::map<std::string, std::string>& experiment_defaults(const std::string& name) {
  const auto it = all_defaults().find(name);
  if (it == all_defaults().end()) throw ConfigError("unknown experiment '" + name + "'");
  return it->second;
}

Config resolve_config(const std::string& name, const Config& config) {
  Config resolved = experiment_defaults(name);
  for (const auto& [key, value] : config) {
    const auto it = resolved.find(key);
    if (it == resolved.end()) throw ConfigError(name + ": unknown key '" + key + "'");
    it->second = value;
  }
  return resolved;
}

RunOutcome run_experiment(const std::string& name, const Config& config, const RunOptions& options) {
  const Config resolved = resolve_config(name, config);
  const Reader reader(name, resolved);
  const unsigned jobs = std::max(1u, options.jobs);

  Output out;
  if (name == "certify") run_certify(reader, jobs, out);
  else if (name == "stability-pca") run_stability_pca(reader, jobs, out);
  else if (name == "stability-ica") run_stability_ica(reader, jobs, out);
  else if (name == "appendix-a") run_appendix_a(reader, jobs, out);
  else if (name == "appendix-b") run_appendix_b(reader, jobs, out);
  else if (name == "recover-ica") run_recover_ica(reader, jobs, out);
  else throw ConfigError("unknown experiment '" + name + "'");

  std::string results;
  for (const auto& j : out.results) results += j.dump() + "\n";
  json manifest = {{"experiment", name}, {"seed", reader.u64("seed")}, {"config", resolved}};

  std::filesystem::create_directories(options.out_dir);
  write_file(options.out_dir / "results.jsonl", results);
  write_file(options.out_dir / "summary.csv", out.csv);
  write_file(options.out_dir / "manifest.json", manifest.dump(2) + "\n");
  return out.outcome;
}

// ---------------------------------------------------------------------------
// PCA stability

Vector default_pca_spectrum(std::size_t d) {
  Vector out(d);
  for (std::size_t i = 0; i < d; ++i) {
    if (i == 0) out[i] = 0.40;
    else if (i == 1) out[i] = 0.10;
    else out[i] = 0.05 * std::pow(0.5, static_cast<double>(i - 2));
  }
  return out;
}

PcaStabilityRun run_pca_stability(const PcaStabilitySpec& spec, unsigned jobs) {
  const Vector lambda = spec.eigenvalues.empty() ? default_pca_spectrum(spec.d) : spec.eigenvalues;
  auto distribution =
      std::make_shared<PcaDistribution>(gen_pca_distribution(lambda.size(), lambda, spec.basis_seed));
  const double gap = distribution->gap();

  PcaStabilityRun run;
  run.distribution = distribution;
  if (spec.estimate_points > 0) {
    const QuadraticObjective population = reduced_pca_objective(distribution->sigma());
    const auto minima = evaluate_minima(population, {distribution->leading_eigenvector()});
    run.estimated = estimate_saddle_params(
        population, UnitSphere(),
        sphere_sampler_near_minima(lambda.size(), {distribution->leading_eigenvector()}),
        spec.estimate_points, minima,
                                           {derive_seed(spec.seed, 0x5ad), jobs, Symmetry::kSignFlip});
  }

  TrialSetup setup;
  setup.distribution = distribution;
  setup.loss = std::make_shared<PcaLoss>();
  setup.constraints = std::make_shared<UnitSphere>();
  setup.make_oracle = [](const EmpiricalObjective& full) -> std::shared_ptr<const ErmOracle> {
    return std::make_shared<PcaEigenOracle>(full.sample_ptr());
  };
  setup.classify_params = run.estimated;

  run.sweep.n_values = spec.n_values;
  run.sweep.trials = spec.trials;
  run.sweep.seed = spec.seed;
  run.sweep.jobs = jobs;
  run.sweep.alpha = gap / 4.0;
  run.sweep.gap = gap;
  run.report = stability_sweep(setup, run.sweep);
  return run;
}

PcaStabilityChecks check_pca_stability(const PcaStabilityRun& run) {
  PcaStabilityChecks out;
  const double gap = run.distribution->gap();
  const LossConstants constants = PcaLoss().constants();

  for (const auto& g : run.report.aggregates) {
    if (!(g.event_frequency >= kEventFrequencyFloor)) continue;
    ++out.rate_points;
    const double bound = 4.0 / (static_cast<double>(g.n) * gap);
    if (!(g.mean_delta <= bound)) {
      out.rate_bound = false;
      out.details.push_back("n=" + std::to_string(g.n) + ": mean delta " + format_number(g.mean_delta) +
                            " exceeds 4/(nG) = " + format_number(bound));
    }
  }
  if (out.rate_points == 0) {
    out.rate_bound = false;
    out.details.push_back("no n with gap-event frequency at least 95%");
  }

  out.slope = run.report.slope;
  out.slope_ok = out.slope && *out.slope >= -1.2 && *out.slope <= -0.8;
  if (!out.slope_ok) out.details.push_back("slope outside [-1.2, -0.8] or not fitted");

  for (const auto& g : run.report.aggregates) {
    const double se = std::sqrt(g.se_gen_gap * g.se_gen_gap + g.se_delta * g.se_delta);
    const double diff = std::abs(g.mean_gen_gap - g.mean_delta);
    if (!(diff <= 3.0 * se)) {
      out.lemma1 = false;
      out.details.push_back("n=" + std::to_string(g.n) + ": |gen - stab| = " + format_number(diff) +
                            " exceeds 3 SE = " + format_number(3.0 * se));
    }
  }

  std::vector<TrialRecord> event_records;
  for (const auto& rec : run.report.records)
    if (!rec.failed && rec.event.value_or(false)) event_records.push_back(rec);
  const auto violations = check_bounds(event_records, constants, gap / 4.0);
  out.chain_pairs = chain_pair_count(event_records);
  out.chain_violations = violations.size();
  out.chain = violations.empty();
  for (std::size_t k = 0; k < std::min<std::size_t>(violations.size(), 10); ++k) {
    const auto& v = violations[k];
    out.details.push_back("chain violation n=" + std::to_string(v.n) + " seed=" + std::to_string(v.seed) +
                          " " + v.inequality + " slack " + format_number(v.slack));
  }

  if (!run.estimated) {
    out.exclusion = false;
    out.details.push_back("exclusion check needs estimated parameters");
    return out;
  }
  out.exclusion_threshold =
      std::max(constants.rho / run.estimated->tau, constants.beta1 / run.estimated->gamma);
  for (const auto& rec : run.report.records) {
    if (rec.failed || !(static_cast<double>(rec.n) > out.exclusion_threshold)) continue;
    const double grad_bound = constants.rho / static_cast<double>(rec.n) + kSolverTolerance;
    for (std::size_t i = 0; i < rec.loo_regime.size(); ++i) {
      ++out.exclusion_points;
      const Regime regime = rec.loo_regime[i];
      const bool bad_regime = regime == Regime::kLargeGradient || regime == Regime::kNegativeCurvature;
      const bool bad_gradient = !(rec.loo_gradient_norm[i] <= grad_bound);
      if (bad_regime || bad_gradient) {
        ++out.exclusion_failures;
        if (out.exclusion_failures <= 10)
          out.details.push_back("exclusion failure n=" + std::to_string(rec.n) + " seed=" +
                                std::to_string(rec.seed) + " i=" + std::to_string(i) + " regime " +
                                std::string(to_string(regime)) + " gradient " +
                                format_number(rec.loo_gradient_norm[i]));
      }
    }
  }
  out.exclusion = out.exclusion_failures == 0 && out.exclusion_points > 0;
  if (out.exclusion_points == 0)
    out.details.push_back("no leave-one-out minimizer above the exclusion threshold " +
                          format_number(out.exclusion_threshold));
  return out;
}

// ---------------------------------------------------------------------------
// ICA recovery

IcaRecoveryRow ica_recovery_trial(std::size_t d, std::size_t n, std::uint64_t seed,
                                  const SolverConfig& solver) {
  IcaRecoveryRow row;
  row.n = n;
  row.seed = seed;
  const IcaInstance instance = random_ica_instance(d, derive_seed(seed, 1));
  const SymTensor4 estimate =
      n == 0 ? instance.tensor : empirical_tensor(sample_ica(instance, n, derive_seed(seed, 2)), make_Z(d));
  row.tensor_error = max_abs_diff(estimate, instance.tensor);

  SolverConfig config = solver;
  config.seed = derive_seed(seed, 3);
  const RecoveryResult result = recover_components(estimate, config, &instance.mixing);
  if (result.rounds_completed < d || !result.match) {
    row.failed = true;
    row.failure = result.failure.empty() ? "recovery incomplete" : result.failure;
    return row;
  }
  row.match_error = result.match->error;
  for (std::size_t i = 0; i < d; ++i)
    row.excess_risk.push_back(1.0 - instance.tensor.eval(result.components.column(i)));
  return row;
}

}  // namespace saddlestab::experiment
