#include "gangforge/ablation.hpp"

#include "gangforge/errors.hpp"

#include <array>

namespace gangforge {

namespace {

using Flag = bool AblationConfig::*;

const std::array<std::pair<const char*, Flag>, 8>& flags() {
  static const std::array<std::pair<const char*, Flag>, 8> table{{
      {"random_attributes", &AblationConfig::random_attributes},
      {"random_edges", &AblationConfig::random_edges},
      {"no_positional_encoding", &AblationConfig::no_positional_encoding},
      {"no_degree", &AblationConfig::no_degree},
      {"shared_encoder_parameters", &AblationConfig::shared_encoder_parameters},
      {"no_candidates", &AblationConfig::no_candidates},
      {"random_candidates", &AblationConfig::random_candidates},
      {"fixed_budget", &AblationConfig::fixed_budget},
  }};
  return table;
}

}  // namespace

bool AblationConfig::any() const {
  for (const auto& [name, flag] : flags()) {
    if (this->*flag) return true;
  }
  return false;
}

void validate(const AblationConfig& a) {
  if (a.no_candidates && a.random_candidates) throw ConfigError("ablation: no_candidates and random_candidates are mutually exclusive");
  if (a.random_edges && a.fixed_budget) throw ConfigError("ablation: random_edges and fixed_budget both replace edge generation");
}

nlohmann::json to_json(const AblationConfig& a) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, flag] : flags()) j[name] = a.*flag;
  return j;
}

AblationConfig ablation_config_from_json(const nlohmann::json& j, bool combined) {
  if (!j.is_object()) throw ConfigError("ablation config must be an object");
  AblationConfig a;
  for (const auto& [key, value] : j.items()) {
    bool found = false;
    for (const auto& [name, flag] : flags()) {
      if (key != name) continue;
      if (!value.is_boolean()) throw ConfigError("ablation." + key + ": expected a boolean");
      a.*flag = value.get<bool>();
      found = true;
    }
    if (!found) throw ConfigError("ablation: unknown field '" + key + "'");
  }
  if (combined) validate(a);
  return a;
}

const std::vector<std::string>& ablation_flag_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, flag] : flags()) out.emplace_back(name);
    return out;
  }();
  return names;
}

AblationConfig single_ablation(const std::string& name) {
  AblationConfig a;
  for (const auto& [n, flag] : flags()) {
    if (name == n) {
      a.*flag = true;
      return a;
    }
  }
  throw ConfigError("unknown ablation '" + name + "'");
}

std::vector<std::string> enabled_flags(const AblationConfig& a) {
  std::vector<std::string> out;
  for (const auto& [name, flag] : flags()) {
    if (a.*flag) out.emplace_back(name);
  }
  return out;
}

}  // namespace gangforge
