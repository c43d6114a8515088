#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace catapult::io {

// Shortest decimal string that parses back to the same double.
std::string format_double(double value);
std::string format_optional(const std::optional<double>& value);

// Writes to a sibling temp file then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace catapult::io
