#include "saddlestab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "saddlestab/parallel.hpp"

namespace saddlestab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return kNaN;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

nlohmann::json optional_number(const std::optional<double>& x) {
  if (!x || !std::isfinite(*x)) return nullptr;
  return *x;
}

nlohmann::json finite_or_null(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

}  // namespace

TrialRecord run_trial(const TrialSetup& setup, std::size_t n, std::uint64_t seed) {
  if (!setup.distribution || !setup.loss || !setup.constraints || !setup.make_oracle) {
    throw std::invalid_argument("run_trial: incomplete trial setup");
  }
  if (n < 2) throw std::invalid_argument("run_trial: need at least two data points");
  const Distribution& dist = *setup.distribution;
  const ConstraintSet& cons = *setup.constraints;
  const Symmetry sym = dist.symmetry();

  TrialRecord rec;
  rec.n = n;
  rec.seed = seed;

  Rng rng(seed);
  auto sample = std::make_shared<const Sample>(dist.sample(n, rng));
  rec.event = dist.event(*sample);
  const EmpiricalObjective full(setup.loss, sample, dist.dim());

  std::vector<Vector> loo;
  std::shared_ptr<const ErmOracle> oracle;
  try {
    oracle = setup.make_oracle(full);
    rec.hat_w = cons.project(oracle->minimize(full, Vector{}));
    loo = loo_minimizers(full, *oracle, rec.hat_w, sym, setup.loo_jobs);
  } catch (const NumericsError& e) {
    rec.failed = true;
    rec.failure = e.what();
    return rec;
  }

  const std::shared_ptr<const Objective> fast = oracle->view_objective(full);
  const double hat_value = fast->value(rec.hat_w);
  const std::vector<KnownMinimum> reference{{rec.hat_w, hat_value}};

  rec.delta_terms.resize(n);
  rec.suboptimality.resize(n);
  rec.step.resize(n);
  rec.loo_gradient_norm.resize(n);
  rec.loo_min_curvature.resize(n);
  if (setup.classify_params) rec.loo_regime.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const Vector& wi = loo[i];
    rec.delta_terms[i] = full.datum_value(i, wi) - full.datum_value(i, rec.hat_w);
    rec.suboptimality[i] = fast->value(wi) - hat_value;
    rec.step[i] = distance(wi, rec.hat_w);
    const LagrangianState st = lagrangian_state(*fast, cons, wi);
    rec.loo_gradient_norm[i] = st.gradient_norm();
    rec.loo_min_curvature[i] = st.min_curvature;
    if (setup.classify_params) {
      rec.loo_regime[i] = classify_point(st, *setup.classify_params, reference, sym).regime;
    }
  }
  rec.delta_mean = mean_of(rec.delta_terms);
  const double population = dist.population_risk(rec.hat_w);
  rec.gen_gap = population - hat_value;
  rec.excess_risk = population - dist.optimal_risk();
  return rec;
}

std::uint64_t trial_seed(std::uint64_t root, std::size_t n, std::size_t t) {
  return derive_seed(derive_seed(root, n), t);
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("fit_line: need at least two paired points");
  }
  const double k = static_cast<double>(x.size());
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: x values are all equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    fit.slope_se = std::sqrt(rss / (k - 2.0) / sxx);
  } else {
    fit.slope_se = kNaN;
  }
  return fit;
}

SweepAggregate aggregate(const std::vector<TrialRecord>& records, std::size_t n,
                         const SweepConfig& config, double rho) {
  SweepAggregate agg;
  agg.n = n;
  std::vector<double> delta;
  std::vector<double> gen;
  std::vector<double> diff;
  std::vector<double> excess;
  std::size_t with_event = 0;
  std::size_t event_true = 0;
  for (const TrialRecord& r : records) {
    if (r.n != n) continue;
    ++agg.trials;
    if (r.failed) {
      ++agg.failed;
      continue;
    }
    delta.push_back(r.delta_mean);
    gen.push_back(r.gen_gap);
    diff.push_back(r.gen_gap - r.delta_mean);
    excess.push_back(r.excess_risk);
    if (r.event) {
      ++with_event;
      if (*r.event) ++event_true;
    }
  }
  agg.event_frequency =
      with_event > 0 ? static_cast<double>(event_true) / static_cast<double>(with_event) : kNaN;
  agg.mean_delta = mean_of(delta);
  agg.se_delta = standard_error(delta);
  agg.mean_gen_gap = mean_of(gen);
  agg.se_gen_gap = standard_error(gen);
  agg.se_difference = standard_error(diff);
  agg.mean_excess_risk = mean_of(excess);
  const double nd = static_cast<double>(n);
  if (config.alpha) agg.bound_2rho2_alphan = 2.0 * rho * rho / (*config.alpha * nd);
  if (config.gap) agg.bound_4nG = 4.0 / (nd * *config.gap);
  return agg;
}

StabilityReport stability_sweep(const TrialSetup& setup, const SweepConfig& config) {
  if (config.trials < 2) throw std::invalid_argument("stability_sweep: need at least two trials");
  if (config.n_values.empty()) throw std::invalid_argument("stability_sweep: no n values");

  std::vector<std::pair<std::size_t, std::uint64_t>> jobs;
  for (std::size_t n : config.n_values)
    for (std::size_t t = 0; t < config.trials; ++t) jobs.emplace_back(n, trial_seed(config.seed, n, t));

  StabilityReport report;
  report.rho = setup.loss->constants().rho;
  report.records.resize(jobs.size());
  parallel_for(jobs.size(), config.jobs, [&](std::size_t k) {
    report.records[k] = run_trial(setup, jobs[k].first, jobs[k].second);
  });
  std::stable_sort(report.records.begin(), report.records.end(),
                   [](const TrialRecord& a, const TrialRecord& b) {
                     return a.n != b.n ? a.n < b.n : a.seed < b.seed;
                   });

  std::vector<std::size_t> ns = config.n_values;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

  std::vector<double> log_n;
  std::vector<double> log_delta;
  for (std::size_t n : ns) {
    SweepAggregate agg = aggregate(report.records, n, config, report.rho);
    if (agg.failed == agg.trials) {
      throw SweepError("stability_sweep: every trial failed at n = " + std::to_string(n));
    }
    const bool event_ok =
        std::isnan(agg.event_frequency) || 1.0 - agg.event_frequency <= config.max_event_failure;
    agg.used_in_fit = event_ok && agg.mean_delta > 0.0;
    if (agg.used_in_fit) {
      log_n.push_back(std::log(static_cast<double>(n)));
      log_delta.push_back(std::log(agg.mean_delta));
    }
    report.aggregates.push_back(agg);
  }
  if (log_n.size() >= 2) {
    const LineFit fit = fit_line(log_n, log_delta);
    report.slope = fit.slope;
    if (std::isfinite(fit.slope_se)) report.slope_se = fit.slope_se;
  }
  return report;
}

nlohmann::json StabilityReport::to_json() const {
  nlohmann::json j;
  j["rho"] = rho;
  j["slope"] = optional_number(slope);
  j["slope_se"] = optional_number(slope_se);
  nlohmann::json rows = nlohmann::json::array();
  for (const SweepAggregate& a : aggregates) {
    rows.push_back({{"n", a.n},
                    {"trials", a.trials},
                    {"failed", a.failed},
                    {"event_frequency", finite_or_null(a.event_frequency)},
                    {"mean_delta", finite_or_null(a.mean_delta)},
                    {"se_delta", finite_or_null(a.se_delta)},
                    {"mean_gen_gap", finite_or_null(a.mean_gen_gap)},
                    {"se_gen_gap", finite_or_null(a.se_gen_gap)},
                    {"se_difference", finite_or_null(a.se_difference)},
                    {"mean_excess_risk", finite_or_null(a.mean_excess_risk)},
                    {"bound_2rho2_alphan", optional_number(a.bound_2rho2_alphan)},
                    {"bound_4nG", optional_number(a.bound_4nG)},
                    {"used_in_fit", a.used_in_fit}});
  }
  j["aggregates"] = std::move(rows);
  return j;
}

// ---------------------------------------------------------------------------

std::vector<BoundViolation> check_bounds(const std::vector<TrialRecord>& records,
                                         const LossConstants& constants, double alpha) {
  if (!(constants.rho > 0.0) || !(alpha > 0.0)) {
    throw std::invalid_argument("check_bounds: rho and alpha must be positive");
  }
  const double rho = constants.rho;
  std::vector<BoundViolation> out;
  auto report = [&](const TrialRecord& r, std::optional<std::size_t> i, const char* name,
                    double slack) {
    if (!(slack >= -kChainTolerance)) out.push_back({r.n, r.seed, i, name, slack});
  };
  for (const TrialRecord& r : records) {
    if (r.failed) continue;
    const double nd = static_cast<double>(r.n);
    for (std::size_t i = 0; i < r.delta_terms.size(); ++i) {
      const double d = r.delta_terms[i];
      const double sub = r.suboptimality[i];
      const double step = r.step[i];
      report(r, i, "lipschitz", rho * step - d);
      report(r, i, "suboptimality", d / nd - sub);
      report(r, i, "strong_convexity", sub - 0.5 * alpha * step * step);
      report(r, i, "squared_chain", rho * rho * (2.0 / alpha) * sub - d * d);
    }
    report(r, std::nullopt, "stability_bound", 2.0 * rho * rho / (alpha * nd) - r.delta_mean);
  }
  return out;
}

std::size_t chain_pair_count(const std::vector<TrialRecord>& records) {
  std::size_t count = 0;
  for (const TrialRecord& r : records)
    if (!r.failed) count += r.delta_terms.size();
  return count;
}

// ---------------------------------------------------------------------------

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", x);
  return buf;
}

void write_records_jsonl(std::ostream& out, const std::vector<TrialRecord>& records) {
  for (const TrialRecord& r : records) {
    nlohmann::json j;
    j["n"] = r.n;
    j["seed"] = r.seed;
    j["failed"] = r.failed;
    if (r.failed) {
      j["failure"] = r.failure;
    } else {
      j["delta_mean"] = r.delta_mean;
      j["gen_gap"] = r.gen_gap;
      j["excess_risk"] = r.excess_risk;
      j["max_delta"] = *std::max_element(r.delta_terms.begin(), r.delta_terms.end());
      j["max_loo_gradient_norm"] =
          *std::max_element(r.loo_gradient_norm.begin(), r.loo_gradient_norm.end());
      j["min_loo_curvature"] =
          *std::min_element(r.loo_min_curvature.begin(), r.loo_min_curvature.end());
      if (!r.loo_regime.empty()) {
        std::map<std::string, std::size_t> counts;
        for (Regime g : r.loo_regime) ++counts[std::string(to_string(g))];
        j["loo_regimes"] = counts;
      }
    }
    j["event"] = r.event ? nlohmann::json(*r.event) : nlohmann::json(nullptr);
    out << j.dump() << '\n';
  }
}

void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records,
                       const SweepConfig& config, double rho) {
  out << "n,seed,delta_mean,gen_gap,excess_risk,gap_event,bound_2rho2_alphan,bound_4nG\n";
  for (const TrialRecord& r : records) {
    const double nd = static_cast<double>(r.n);
    out << r.n << ',' << r.seed << ',';
    if (r.failed) {
      out << ",,";
    } else {
      out << format_number(r.delta_mean) << ',' << format_number(r.gen_gap) << ','
          << format_number(r.excess_risk);
    }
    out << ',';
    if (r.event) out << (*r.event ? 1 : 0);
    out << ',';
    if (config.alpha) out << format_number(2.0 * rho * rho / (*config.alpha * nd));
    out << ',';
    if (config.gap) out << format_number(4.0 / (nd * *config.gap));
    out << '\n';
  }
}

}  // namespace saddlestab
