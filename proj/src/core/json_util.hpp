#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "core/types.hpp"

namespace gems::json_util {

using nlohmann::json;

// Reads a file and parses it; parse errors are reported with line and column.
json parse_file(const std::filesystem::path& path);
json parse_text(std::string_view text, const std::string& origin);
std::string read_text_file(const std::filesystem::path& path);

// Field accessors that raise schema errors naming the offending key path.
const json& require(const json& obj, std::string_view key, const std::string& where);
std::string get_string(const json& obj, std::string_view key, const std::string& where);
double get_number(const json& obj, std::string_view key, const std::string& where);
bool get_bool(const json& obj, std::string_view key, const std::string& where, bool fallback);
std::string get_string_or(const json& obj, std::string_view key, const std::string& where, std::string fallback);
double get_number_or(const json& obj, std::string_view key, const std::string& where, double fallback);

// Checks `schema_version` is present and supported.
void check_schema_version(const json& doc, int supported, const std::string& where);

}  // namespace gems::json_util
