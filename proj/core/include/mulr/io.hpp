#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mulr::io {

std::string read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::string_view content);

// Lines without their terminators (a trailing '\r' is stripped too).
std::vector<std::string_view> lines_of(std::string_view content);

// FNV-1a, used to tag output artifacts with a config fingerprint.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace mulr::io

namespace mulr::io {

// Shortest round-trip decimal representation.
void append_double(std::string &out, double v);
// Throws DataError on malformed numbers.
double parse_double(std::string_view s);

}  // namespace mulr::io
