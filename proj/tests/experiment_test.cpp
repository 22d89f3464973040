#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "saddlestab/experiment.hpp"

namespace saddlestab::experiment {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("saddlestab_experiment_test_" + name);
  fs::remove_all(p);
  return p;
}

TEST(ParseConfig, KeysCommentsAndErrors) {
  const Config c = parse_config_text("# comment\n\n d = 4 \nn_values=1,2, 3\r\n");
  EXPECT_EQ(c.at("d"), "4");
  EXPECT_EQ(c.at("n_values"), "1,2, 3");
  EXPECT_THROW(parse_config_text("d = 1\nd = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("just words\n"), ConfigError);
  EXPECT_THROW(parse_config_text(" = 3\n"), ConfigError);
}

TEST(ParseConfig, OverrideWins) {
  Config c = parse_config_text("trials = 5\n");
  apply_override(c, "trials=7");
  apply_override(c, "seed = 3");
  EXPECT_EQ(c.at("trials"), "7");
  EXPECT_EQ(c.at("seed"), "3");
  EXPECT_THROW(apply_override(c, "novalue"), ConfigError);
}

TEST(ResolveConfig, DefaultsAndUnknowns) {
  EXPECT_EQ(experiment_names().size(), 6u);
  const Config r = resolve_config("appendix-b", {{"points", "5"}});
  EXPECT_EQ(r.at("points"), "5");
  EXPECT_EQ(r.at("d_values"), experiment_defaults("appendix-b").at("d_values"));
  EXPECT_THROW(resolve_config("appendix-b", {{"bogus", "1"}}), ConfigError);
  EXPECT_THROW(resolve_config("no-such-experiment", {}), ConfigError);
}

TEST(RunExperiment, InvalidValuesWriteNothing) {
  const fs::path out = fresh_dir("invalid");
  EXPECT_THROW(run_experiment("appendix-b", {{"points", "many"}}, {out, 1}), ConfigError);
  EXPECT_THROW(run_experiment("recover-ica", {{"n_values", "100,10"}}, {out, 1}), ConfigError);
  EXPECT_THROW(run_experiment("stability-pca", {{"eigenvalues", "0.9,0.5"}, {"d", "2"}}, {out, 1}), ConfigError);
  EXPECT_THROW(run_experiment("certify", {{"check", "maybe"}}, {out, 1}), ConfigError);
  EXPECT_FALSE(fs::exists(out));
}

TEST(RunExperiment, WritesThreeFilesWithCompleteManifest) {
  const fs::path out = fresh_dir("files");
  const RunOutcome r = run_experiment("appendix-b", {{"points", "20"}, {"d_values", "3,4"}}, {out, 2});
  EXPECT_TRUE(r.checks_passed);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(out)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  EXPECT_EQ(names, (std::vector<std::string>{"manifest.json", "results.jsonl", "summary.csv"}));
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["experiment"], "appendix-b");
  for (const auto& [key, _] : experiment_defaults("appendix-b")) EXPECT_TRUE(manifest["config"].contains(key)) << key;
  EXPECT_EQ(manifest["config"]["points"], "20");
  const std::string csv = slurp(out / "summary.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "d,accepted,rejected,lower_failures,min_lower_ratio,max_upper_ratio,max_saddle_curvature,curvature_bound");
}

TEST(RunExperiment, RerunsAreByteIdenticalAcrossJobCounts) {
  const Config cfg{{"n_values", "20,40"}, {"trials", "3"}, {"estimate_points", "200"}, {"d", "4"},
                   {"eigenvalues", "0.5,0.2,0.1,0.05"}};
  const fs::path a = fresh_dir("det_a");
  const fs::path b = fresh_dir("det_b");
  run_experiment("stability-pca", cfg, {a, 1});
  run_experiment("stability-pca", cfg, {b, 3});
  for (const char* f : {"results.jsonl", "summary.csv", "manifest.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(RunExperiment, FailedCheckIsReported) {
  const fs::path out = fresh_dir("check");
  const RunOutcome r = run_experiment(
      "certify", {{"alpha", "10"}, {"gamma", "1"}, {"tau", "1"}, {"points", "200"}, {"check", "true"}}, {out, 1});
  EXPECT_FALSE(r.checks_passed);
  const RunOutcome ok = run_experiment("certify", {{"points", "200"}, {"check", "true"}}, {out, 1});
  EXPECT_TRUE(ok.checks_passed);
}

TEST(DefaultSpectrum, GapAndMass) {
  const Vector l = default_pca_spectrum(10);
  EXPECT_DOUBLE_EQ(l[0] - l[1], 0.3);
  EXPECT_LE(std::accumulate(l.begin(), l.end(), 0.0), 1.0);
  for (std::size_t i = 1; i < l.size(); ++i) EXPECT_GE(l[i - 1], l[i]);
}

TEST(IcaRecoveryTrial, ExactTensorRow) {
  SolverConfig s;
  s.restarts = 2;
  const IcaRecoveryRow row = ica_recovery_trial(3, 0, 5, s);
  ASSERT_FALSE(row.failed) << row.failure;
  EXPECT_EQ(row.tensor_error, 0.0);
  EXPECT_LE(row.match_error, 1e-6);
  ASSERT_EQ(row.excess_risk.size(), 3u);
  for (double e : row.excess_risk) EXPECT_NEAR(e, 0.0, 1e-10);
}

}  // namespace
}  // namespace saddlestab::experiment
