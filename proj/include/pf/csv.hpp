#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pf {

// Lines of comma-separated numeric fields. No quoting; fields are trimmed.
std::vector<std::string> split_csv_line(const std::string& line);

// Strict numeric parsing. On failure throws std::runtime_error mentioning
// `context` (typically "file:line").
double parse_double(const std::string& field, const std::string& context);
long long parse_int(const std::string& field, const std::string& context);

// Shortest representations that re-parse to the identical value.
std::string format_double(double v);
std::string format_float(float v);

// Reads a whole text file into lines (universal newlines). Throws with the
// path on open failure.
std::vector<std::string> read_lines(const std::string& path);

}  // namespace pf
