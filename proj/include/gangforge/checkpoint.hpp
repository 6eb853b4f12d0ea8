#pragma once

#include "gangforge/autograd.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace gangforge {

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& source);

nlohmann::json parameters_to_json(const ag::ParameterList& params);
/// Copies stored values into `params` by name; every parameter must be
/// present with the stored shape.
void parameters_from_json(const nlohmann::json& j, const ag::ParameterList& params, const std::string& source);

/// "<magic>\n" followed by a JSON document.
void write_checkpoint(const std::filesystem::path& path, std::string_view magic, const nlohmann::json& body);
nlohmann::json read_checkpoint(const std::filesystem::path& path, std::string_view magic);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace gangforge
