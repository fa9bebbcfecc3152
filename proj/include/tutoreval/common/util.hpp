#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

namespace tutoreval {

using json = nlohmann::json;

/// Canonical serialization used for every hash: sorted keys, no whitespace,
/// shortest round-trip floats, UTF-8 passthrough.
std::string canonical_dump(const json& value);

/// Lowercase hex SHA-256 digest of raw bytes.
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Converts a parsed YAML tree to JSON. Scalars that parse as integers, reals or
/// booleans become JSON numbers/booleans; everything else stays a string.
json yaml_to_json(const YAML::Node& node);

YAML::Node load_yaml_file(const std::filesystem::path& path);

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
std::string rtrim(std::string_view text);

/// Resolves `p` against `base` unless it is already absolute.
std::filesystem::path resolve_path(const std::filesystem::path& base, const std::filesystem::path& p);

/// UTC timestamp, ISO-8601 with seconds precision.
std::string utc_timestamp();
std::string utc_date();

}  // namespace tutoreval
