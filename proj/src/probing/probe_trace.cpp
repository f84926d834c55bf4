#include "gridwatch/probing/probe_trace.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "gridwatch/common/error.hpp"
#include "gridwatch/common/format.hpp"
#include "gridwatch/grid/case_file.hpp"

namespace gridwatch::probing {

namespace {

constexpr std::string_view kHeader = "interval,from,to,sample_index,power_mw";

int parse_int(const std::string& s, const std::string& where) {
  int v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ValidationError(where, "expected an integer, got '" + s + "'");
  }
  return v;
}

double parse_number(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ValidationError(where, "expected a number, got '" + s + "'");
  }
  return v;
}

}  // namespace

std::string format_probe_trace(const std::vector<ProbeSample>& samples) {
  std::string out(kHeader);
  out += '\n';
  for (const auto& s : samples) {
    out += join({std::to_string(s.interval), grid::to_string(s.from), grid::to_string(s.to),
                 std::to_string(s.sample_index), format_double(s.power_mw)},
                ",");
    out += '\n';
  }
  return out;
}

void write_probe_trace(const std::filesystem::path& path, const std::vector<ProbeSample>& samples) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << format_probe_trace(samples);
}

std::map<int, std::vector<ProbeSample>> parse_probe_trace(std::string_view text) {
  std::map<int, std::vector<ProbeSample>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != kHeader) {
        throw ValidationError("probes:1", "expected header '" + std::string(kHeader) + "'");
      }
      header = true;
      continue;
    }
    const std::string where = "probes:" + std::to_string(lineno);
    const auto f = split(line, ',');
    if (f.size() != 5) throw ValidationError(where, "expected 5 fields");
    ProbeSample s;
    s.interval = parse_int(f[0], where + ".interval");
    s.from = grid::ProsumerId{parse_int(f[1], where + ".from")};
    s.to = grid::ProsumerId{parse_int(f[2], where + ".to")};
    s.sample_index = parse_int(f[3], where + ".sample_index");
    s.power_mw = parse_number(f[4], where + ".power_mw");
    if (s.sample_index < 1) throw ValidationError(where + ".sample_index", "must be at least 1");
    out[s.interval].push_back(s);
  }
  if (!header) throw ValidationError("probes", "empty probe trace");
  return out;
}

std::map<int, std::vector<ProbeSample>> read_probe_trace(const std::filesystem::path& path) {
  return parse_probe_trace(grid::read_text_file(path));
}

}  // namespace gridwatch::probing
