#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace fracbench::io {

// Reads a whole file. Throws IoError when it cannot be opened or read.
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written file. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Shortest decimal form that parses back to the same double.
std::string format_exact(double v);
// printf("%.6g") form used in result files; NaN prints as "nan".
std::string format_g6(double v);

inline constexpr std::uint64_t kDefaultMaxPayloadBytes = std::uint64_t{4} << 30;

}  // namespace fracbench::io
