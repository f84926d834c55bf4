#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gridwatch {

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

std::string join(const std::vector<std::string>& fields, std::string_view sep);

// Splits a delimited line; no quoting support (traces never contain the delimiter).
std::vector<std::string> split(std::string_view line, char sep);

}  // namespace gridwatch
