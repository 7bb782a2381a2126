#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace bidev {

// 64-bit FNV-1a over a byte string.
std::uint64_t fnv1a64(std::string_view data);
std::string to_hex(std::uint64_t value);

std::string rtrim(std::string_view text);
std::string trim(std::string_view text);
std::vector<std::string> split_lines(std::string_view text);

// Current UTC time as ISO-8601, e.g. "2026-08-14T12:00:00Z".
std::string iso8601_now();

std::string read_file(const std::filesystem::path& path);

// Write via a temp file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Calls fn(line_number, line) for every line; line numbers start at 1.
// Blank lines are skipped.
void for_each_jsonl_line(const std::filesystem::path& path,
                         const std::function<void(int, const std::string&)>& fn);

// FNV-1a of a file's bytes, as hex; used for manifest provenance.
std::string file_digest(const std::filesystem::path& path);

}  // namespace bidev
