#include "rto/experiments.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>

// Exit codes: 0 success, 2 config error, 3 runtime failure.
int main(int argc, char** argv) {
  CLI::App app{"RTO-MH sampler for Bayesian inverse problems with l1-type priors"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed_override = 0;
  int parallelism_override = 0;
  bool has_seed = false;
  bool has_parallelism = false;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config) {
      cmd->add_option("--config", config_path, "experiment config JSON")->required();
    }
    cmd->add_option("--out", out_dir, "run directory");
    cmd->add_option("--seed", seed_override, "override the config seed")
        ->each([&](const std::string&) { has_seed = true; });
    cmd->add_option("--parallelism", parallelism_override, "override proposal parallelism")
        ->each([&](const std::string&) { has_parallelism = true; });
  };

  CLI::App* generate = app.add_subcommand("generate", "write truth and synthetic data");
  add_common(generate, true);
  CLI::App* sample = app.add_subcommand("sample", "run the RTO-MH chain");
  add_common(sample, true);
  CLI::App* diagnose = app.add_subcommand("diagnose", "summarize a finished chain");
  add_common(diagnose, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (diagnose->parsed()) {
      rto::cli::cmd_diagnose(out_dir);
      return 0;
    }
    auto config = rto::cli::ExperimentConfig::from_json_file(config_path);
    if (has_seed) config.seed = seed_override;
    if (has_parallelism) config.parallelism = parallelism_override;
    config.validate();
    if (generate->parsed()) {
      rto::cli::cmd_generate(config, out_dir);
    } else {
      rto::cli::cmd_sample(config, out_dir);
    }
    return 0;
  } catch (const rto::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
