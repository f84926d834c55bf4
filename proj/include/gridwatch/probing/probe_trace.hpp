#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gridwatch/probing/message_bus.hpp"

namespace gridwatch::probing {

// Probe traces are comma-separated with the header
//   interval,from,to,sample_index,power_mw
// and one row per sample.

std::string format_probe_trace(const std::vector<ProbeSample>& samples);
void write_probe_trace(const std::filesystem::path& path, const std::vector<ProbeSample>& samples);

/// Samples grouped by interval, each group in file order. Throws
/// ValidationError naming the line number of a malformed row.
std::map<int, std::vector<ProbeSample>> parse_probe_trace(std::string_view text);
std::map<int, std::vector<ProbeSample>> read_probe_trace(const std::filesystem::path& path);

}  // namespace gridwatch::probing
