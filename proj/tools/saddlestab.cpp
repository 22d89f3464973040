// Command-line runner for the batch experiments.
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "saddlestab/experiment.hpp"

namespace ex = saddlestab::experiment;

int main(int argc, char** argv) {
  CLI::App app{"Strict-saddle stability experiments"};
  app.require_subcommand(1);

  struct Flags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
  } flags;

  for (const std::string& name : ex::experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", flags.config_path, "key = value config file");
    sub->add_option("--seed", flags.seed, "root seed (overrides the config)");
    sub->add_option("--jobs", flags.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", flags.out_dir, "output directory");
    sub->add_option("--set", flags.overrides, "key=value override (repeatable)");
  }
  app.add_subcommand("list", "print every experiment with its default keys");

  CLI11_PARSE(app, argc, argv);
  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();

  if (name == "list") {
    for (const std::string& e : ex::experiment_names()) {
      std::cout << e << "\n";
      for (const auto& [key, value] : ex::experiment_defaults(e))
        std::cout << "  " << key << " = " << value << "\n";
    }
    return 0;
  }

  try {
    ex::Config config;
    if (!flags.config_path.empty()) config = ex::load_config_file(flags.config_path);
    for (const std::string& o : flags.overrides) ex::apply_override(config, o);
    if (flags.seed) config["seed"] = std::to_string(*flags.seed);

    const ex::RunOutcome outcome = ex::run_experiment(name, config, {flags.out_dir, flags.jobs});
    for (const std::string& line : outcome.messages) std::cout << line << "\n";
    std::cout << "wrote " << flags.out_dir << "/{results.jsonl,summary.csv,manifest.json}\n";
    return outcome.checks_passed ? 0 : 1;
  } catch (const ex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
