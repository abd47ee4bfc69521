#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace miti {

/// FNV-1a, 64-bit. Stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool contains_icase(std::string_view haystack, std::string_view needle);

/// Collapses every run of ASCII whitespace to one space and trims the ends.
std::string collapse_whitespace(std::string_view s);

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Parses JSON; failures become Error{MalformedJson} carrying the byte offset.
nlohmann::json parse_json(std::string_view text, std::string_view what);

std::string utc_timestamp_now();

namespace log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3 };

void set_level(Level level);
Level level();
bool parse_level(std::string_view text, Level& out);

/// One JSON object per line on stderr: {"level":..,"event":..,...fields}.
void emit(Level level, std::string_view event, nlohmann::json fields = nlohmann::json::object());

inline void debug(std::string_view e, nlohmann::json f = nlohmann::json::object()) { emit(Level::Debug, e, std::move(f)); }
inline void info(std::string_view e, nlohmann::json f = nlohmann::json::object()) { emit(Level::Info, e, std::move(f)); }
inline void warn(std::string_view e, nlohmann::json f = nlohmann::json::object()) { emit(Level::Warn, e, std::move(f)); }
inline void error(std::string_view e, nlohmann::json f = nlohmann::json::object()) { emit(Level::Error, e, std::move(f)); }

}  // namespace log

}  // namespace miti
