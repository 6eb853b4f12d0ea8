#include "gangforge/checkpoint.hpp"

#include "gangforge/errors.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gangforge {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i) data.push_back(m.data()[i]);
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j, const std::string& source) {
  try {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const json& data = j.at("data");
    if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw LoadError(source, 0, "matrix shape does not match its data");
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = data[static_cast<std::size_t>(i)].get<double>();
    return m;
  } catch (const json::exception& e) {
    throw LoadError(source, 0, std::string("malformed matrix: ") + e.what());
  }
}

json parameters_to_json(const ag::ParameterList& params) {
  json out = json::object();
  for (const auto& p : params) out[p.name] = matrix_to_json(p.var.value());
  return out;
}

void parameters_from_json(const json& j, const ag::ParameterList& params, const std::string& source) {
  if (!j.is_object()) throw LoadError(source, 0, "parameters must be an object");
  for (const auto& p : params) {
    if (!j.contains(p.name)) throw LoadError(source, 0, "missing parameter '" + p.name + "'");
    Matrix m = matrix_from_json(j[p.name], source);
    if (m.rows() != p.var.rows() || m.cols() != p.var.cols()) {
      throw LoadError(source, 0, "parameter '" + p.name + "' has the wrong shape");
    }
    ag::Var v = p.var;
    v.mutable_value() = std::move(m);
  }
  if (j.size() != params.size()) throw LoadError(source, 0, "unexpected extra parameters");
}

void write_checkpoint(const std::filesystem::path& path, std::string_view magic, const json& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << magic << '\n' << body.dump() << '\n';
}

json read_checkpoint(const std::filesystem::path& path, std::string_view magic) {
  const std::string name = path.filename().string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(name, 0, "missing or unreadable checkpoint");
  std::string header;
  std::getline(in, header);
  if (header != magic) throw LoadError(name, 1, "bad magic header, expected " + std::string(magic));
  std::stringstream rest;
  rest << in.rdbuf();
  try {
    return json::parse(rest.str());
  } catch (const json::parse_error& e) {
    throw LoadError(name, 2, std::string("malformed checkpoint body: ") + e.what());
  }
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.filename().string(), 0, "missing or unreadable file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return sha256_hex(buffer.str());
}

}  // namespace gangforge
