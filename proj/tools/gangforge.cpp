// gangforge <command> --config path [--jobs N] [--seed-index i]

#include "gangforge/errors.hpp"
#include "gangforge/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

extern char** environ;

int main(int argc, char** argv) {
  CLI::App app{"Multi-target graph injection attacks against GNN fraud detectors"};
  app.usage("gangforge <command> --config path [--jobs N] [--seed-index i]");
  app.require_subcommand(1, 1);
  std::string config_path;
  int jobs = 1;
  std::size_t seed_index = 0;
  const std::pair<const char*, const char*> commands[] = {
      {"gen-synth", "write the synthetic dataset to output_dir/dataset"},
      {"train-detector", "train the surrogate and victim detectors"},
      {"train-attack", "train the attack model against the surrogate"},
      {"attack", "write an injection plan per test target set"},
      {"evaluate", "score the plans against the victim"},
      {"ablate", "train and evaluate every enabled ablation row for each seed"},
  };
  for (const auto& [name, description] : commands) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--jobs", jobs, "worker threads for per-target-set work")->check(CLI::PositiveNumber);
    sub->add_option("--seed-index", seed_index, "index into the config's seeds list");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const auto config = gangforge::load_experiment_config(config_path, environ);
    return gangforge::execute(gangforge::parse_command(command), config, {jobs, seed_index}, std::cout, std::cerr);
  } catch (const gangforge::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const gangforge::LoadError& e) {
    std::cerr << "load error: " << e.what() << '\n';
    return 3;
  }
}
