#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace trustgrid {

// Shortest round-trip decimal form via std::to_chars: lossless, locale-free,
// and byte-stable across runs. All CSV and report output goes through this.
std::string format_double(double v);

std::string format_int(std::int64_t v);

double parse_double(const std::string& s);

std::vector<std::string> split_csv_line(const std::string& line);

// FNV-1a 64-bit; used for header hashes and checkpoint ids.
std::uint64_t fnv1a64(const std::string& data);
std::string fnv1a64_hex(const std::string& data);

}  // namespace trustgrid
