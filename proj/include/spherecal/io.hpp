#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace spherecal {

// Shortest decimal representation that round-trips to the same double.
std::string format_shortest(double v);

// Fixed-point with the given number of decimals.
std::string format_fixed(double v, int decimals);

// FNV-1a 64-bit, used for config digests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Splits one CSV line on commas; no quoting, the formats here never need it.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace spherecal
