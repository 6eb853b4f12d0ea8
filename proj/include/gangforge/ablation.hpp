#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace gangforge {

/// Switches that replace or remove parts of the attack model.
struct AblationConfig {
  bool random_attributes = false;
  bool random_edges = false;
  bool no_positional_encoding = false;
  bool no_degree = false;
  bool shared_encoder_parameters = false;
  bool no_candidates = false;
  bool random_candidates = false;
  bool fixed_budget = false;

  bool any() const;
  bool operator==(const AblationConfig&) const = default;
};

/// Throws ConfigError for conflicting flags.
void validate(const AblationConfig& ablation);
nlohmann::json to_json(const AblationConfig& ablation);
/// `combined` = false skips the pairwise exclusivity checks, for a list of
/// flags that are swept one at a time.
AblationConfig ablation_config_from_json(const nlohmann::json& j, bool combined = true);

/// Names of the individual flags, in declaration order.
const std::vector<std::string>& ablation_flag_names();
/// A config with exactly the named flag set. Throws ConfigError for an unknown name.
AblationConfig single_ablation(const std::string& name);
/// Names of the flags that are on.
std::vector<std::string> enabled_flags(const AblationConfig& ablation);

}  // namespace gangforge
