#include "core/json_util.hpp"

#include <fstream>
#include <sstream>

namespace gems::json_util {

namespace {

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

std::string path_of(const std::string& where, std::string_view key) {
  return where.empty() ? std::string(key) : where + "." + std::string(key);
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_text(std::string_view text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorKind::Schema,
                origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
  }
}

json parse_file(const std::filesystem::path& path) { return parse_text(read_text_file(path), path.string()); }

const json& require(const json& obj, std::string_view key, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorKind::Schema, where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorKind::Schema, "missing key '" + path_of(where, key) + "'");
  return *it;
}

std::string get_string(const json& obj, std::string_view key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw Error(ErrorKind::Schema, "key '" + path_of(where, key) + "' must be a string");
  return v.get<std::string>();
}

double get_number(const json& obj, std::string_view key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number()) throw Error(ErrorKind::Schema, "key '" + path_of(where, key) + "' must be a number");
  return v.get<double>();
}

bool get_bool(const json& obj, std::string_view key, const std::string& where, bool fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) throw Error(ErrorKind::Schema, "key '" + path_of(where, key) + "' must be a boolean");
  return it->get<bool>();
}

std::string get_string_or(const json& obj, std::string_view key, const std::string& where, std::string fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_string()) throw Error(ErrorKind::Schema, "key '" + path_of(where, key) + "' must be a string");
  return it->get<std::string>();
}

double get_number_or(const json& obj, std::string_view key, const std::string& where, double fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) throw Error(ErrorKind::Schema, "key '" + path_of(where, key) + "' must be a number");
  return it->get<double>();
}

void check_schema_version(const json& doc, int supported, const std::string& where) {
  const auto& v = require(doc, "schema_version", where);
  if (!v.is_number_integer()) throw Error(ErrorKind::Schema, where + ": schema_version must be an integer");
  if (v.get<int>() != supported)
    throw Error(ErrorKind::Schema, where + ": unsupported schema_version " + std::to_string(v.get<int>()) +
                                       " (expected " + std::to_string(supported) + ")");
}

}  // namespace gems::json_util
