#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cogstat::io {

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Appends one line plus '\n' and flushes it to disk before returning.
void append_line_durable(const std::filesystem::path& path, std::string_view line);

/// Formats with 6 significant digits ("%.6g").
std::string format_sig6(double value);

/// Shortest representation that parses back to the same double.
std::string format_exact(double value);

std::string csv_escape(std::string_view field);

/// Splits one CSV record. Handles quoted fields with doubled quotes.
std::vector<std::string> csv_split(std::string_view line);

/// Splits text into lines, dropping a trailing '\r' from each.
std::vector<std::string> split_lines(std::string_view text);

}  // namespace cogstat::io
