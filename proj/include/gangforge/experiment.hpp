#pragma once

#include "gangforge/ablation.hpp"
#include "gangforge/attack.hpp"
#include "gangforge/dataset.hpp"
#include "gangforge/detector.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gangforge {

struct ExperimentConfig {
  std::optional<std::filesystem::path> dataset_path;  // exactly one of path / synth
  std::optional<SynthConfig> synth;
  double rho = 0.0;
  double xi = 0.0;
  double p = 0.0;  // train fraction for synthetic splits
  DetectorConfig detector;  // surrogate
  DetectorConfig victim;
  AttackConfig attack;
  AblationConfig ablation;  // rows of the ablate sweep, one flag each
  std::filesystem::path output_dir;
  std::vector<std::uint64_t> seeds;

  BudgetParams budget() const { return {rho, xi}; }
};

nlohmann::json to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const nlohmann::json& j);

/// Applies GANGFORGE_<FIELD> environment overrides to a parsed config
/// document. Nested fields use a double underscore
/// (GANGFORGE_ATTACK__EPOCHS=5); names match keys case-insensitively and
/// values are read as JSON when they parse, otherwise as strings.
void apply_env_overrides(nlohmann::json& document, char** environ_block);

/// Throws ConfigError naming the offending field. dataset, rho, xi, p,
/// detector, victim, attack, output_dir and seeds are required.
ExperimentConfig experiment_config_from_json(const nlohmann::json& document);
ExperimentConfig load_experiment_config(const std::filesystem::path& path, char** environ_block = nullptr);

enum class Command { gen_synth, train_detector, train_attack, attack, evaluate, ablate };

Command parse_command(std::string_view text);
std::string_view to_string(Command command);

struct RunOptions {
  int jobs = 1;
  std::size_t seed_index = 0;
};

/// Runs one pipeline stage and writes its artifacts under output_dir.
/// Returns the process exit status: 0 on success, 2 for configuration
/// errors, 3 for missing or malformed inputs, 1 otherwise.
int execute(Command command, const ExperimentConfig& config, const RunOptions& options, std::ostream& out, std::ostream& err);

/// The bundle a command works on: dataset_path if given, else
/// output_dir/dataset as written by gen-synth.
DatasetBundle load_bundle(const ExperimentConfig& config);

}  // namespace gangforge
