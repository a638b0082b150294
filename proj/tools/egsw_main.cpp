// egsw: command-line driver for training, comparison, gradient checks and
// hyperparameter sweeps.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "egsw/config.hpp"
#include "egsw/error.hpp"
#include "egsw/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Entropy-guided sequence weighting for GRPO on toy tasks"};
  app.require_subcommand(1);

  std::string out_dir;
  std::string seeds;
  bool quiet = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out-dir", out_dir, "Output directory (overrides run.out_dir)");
    sub->add_option("--seeds", seeds, "Comma-separated seed list (overrides run.seeds)");
    sub->add_flag("--quiet", quiet, "Suppress progress output");
  };

  std::string config;
  std::string config_b;
  std::string sweep_spec;
  std::string corrupt;

  CLI::App* train = app.add_subcommand("train", "Train every seed of a config");
  train->add_option("config", config, "Config file")->required();
  add_common(train);

  CLI::App* compare =
      app.add_subcommand("compare", "Run matched GRPO and EGSW configs");
  compare->add_option("grpo_config", config, "Baseline config")->required();
  compare->add_option("egsw_config", config_b, "EGSW config")->required();
  add_common(compare);

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Check gradients against oracles");
  gradcheck->add_option("config", config, "Config file with a [gradcheck] section");
  gradcheck->add_option("--corrupt", corrupt,
                        "Test hook: perturb the named analytic quantity");
  add_common(gradcheck);

  CLI::App* sweep = app.add_subcommand("sweep", "Grid sweep over config values");
  sweep->add_option("config", config, "Base config")->required();
  sweep->add_option("sweep_spec", sweep_spec, "Sweep spec file")->required();
  add_common(sweep);

  CLI11_PARSE(app, argc, argv);

  egsw::CliOptions opts;
  opts.quiet = quiet;
  if (!out_dir.empty()) opts.out_dir = out_dir;
  if (!seeds.empty()) {
    try {
      opts.seeds = egsw::parse_seed_list(seeds);
    } catch (const egsw::ConfigError& e) {
      std::cerr << "--seeds: " << e.what() << '\n';
      return 2;
    }
  }

  if (train->parsed()) return egsw::cmd_train(config, opts, std::cout, std::cerr);
  if (compare->parsed()) {
    return egsw::cmd_compare(config, config_b, opts, std::cout, std::cerr);
  }
  if (gradcheck->parsed()) {
    std::optional<std::string> path;
    if (!config.empty()) path = config;
    return egsw::cmd_gradcheck(path, corrupt, opts, std::cout, std::cerr);
  }
  return egsw::cmd_sweep(config, sweep_spec, opts, std::cout, std::cerr);
}
