#include "gridwatch/sim/trace_io.hpp"

#include <fstream>
#include <map>

#include "gridwatch/common/error.hpp"
#include "gridwatch/common/format.hpp"
#include "gridwatch/probing/probe_trace.hpp"

namespace gridwatch::sim {

namespace {

std::string id(grid::ProsumerId p) { return grid::to_string(p); }
std::string num(double v) { return format_double(v); }
std::string flag(bool b) { return b ? "1" : "0"; }

void row(std::string& out, const std::vector<std::string>& fields) {
  out += join(fields, ",");
  out += '\n';
}

}  // namespace

std::string format_detector_trace(const SimTrace& trace) {
  std::string out = "interval,epoch,observer,target,skipped,d_raw_mw,d_mw,D,N,F\n";
  for (const auto& r : trace.pairs) {
    row(out, {std::to_string(r.interval), std::to_string(r.epoch), id(r.observer), id(r.target),
              flag(r.skipped), num(r.d_raw_mw), num(r.d_mw), num(r.rate), num(r.decay),
              num(r.factor)});
  }
  return out;
}

std::string format_penalty_trace(const SimTrace& trace) {
  std::string out = "interval,epoch,observer,target,F,penalty_raw,penalty,saturated,vote\n";
  for (const auto& r : trace.pairs) {
    row(out, {std::to_string(r.interval), std::to_string(r.epoch), id(r.observer), id(r.target),
              num(r.factor), num(r.penalty_raw), num(r.penalty), flag(r.saturated), flag(r.vote)});
  }
  return out;
}

std::string format_utility_log(const SimTrace& trace, double vote_ratio) {
  std::string out =
      "interval,epoch,target,votes,neighbor_count,ratio,required,isolated,slack_protected\n";
  for (const auto& r : trace.targets) {
    row(out, {std::to_string(r.interval), std::to_string(r.epoch), id(r.target),
              std::to_string(r.votes), std::to_string(r.neighbor_count), num(r.vote_ratio),
              num(vote_ratio), flag(r.isolated), flag(r.slack_protected)});
  }
  return out;
}

std::string format_events(const SimTrace& trace) {
  std::string out = "interval,target,effective_from,epoch_after,partitioned\n";
  for (const auto& e : trace.events) {
    row(out, {std::to_string(e.interval), id(e.target), std::to_string(e.effective_from),
              std::to_string(e.epoch_after), flag(e.partitioned)});
  }
  return out;
}

std::string format_power_series(const SimTrace& trace) {
  std::string out = "interval,prosumer,actual_mw,p_ref_mw\n";
  for (const auto& r : trace.targets) {
    row(out, {std::to_string(r.interval), id(r.target), num(r.actual_mw), num(r.p_ref_mw)});
  }
  return out;
}

std::string format_factor_series(const SimTrace& trace) {
  std::string out = "interval,target,mean_F,max_F\n";
  std::map<std::pair<int, grid::ProsumerId>, std::vector<double>> groups;
  for (const auto& r : trace.pairs) groups[{r.interval, r.target}].push_back(r.factor);
  for (const auto& [key, fs] : groups) {
    double sum = 0.0, mx = fs.front();
    for (double f : fs) {
      sum += f;
      mx = std::max(mx, f);
    }
    row(out, {std::to_string(key.first), id(key.second), num(sum / static_cast<double>(fs.size())),
              num(mx)});
  }
  return out;
}

std::string format_penalty_series(const SimTrace& trace) {
  std::string out = "interval,target,penalty\n";
  for (const auto& r : trace.targets) {
    if (!r.aggregated_penalty) continue;
    row(out, {std::to_string(r.interval), id(r.target), num(*r.aggregated_penalty)});
  }
  return out;
}

std::string format_isolation_series(const SimTrace& trace) {
  std::string out = "interval,target,signal\n";
  for (const auto& r : trace.targets) {
    row(out, {std::to_string(r.interval), id(r.target), flag(r.isolated)});
  }
  return out;
}

std::vector<std::filesystem::path> write_trace(const std::filesystem::path& dir, const SimTrace& trace,
                                               const Scenario& scn) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  const std::vector<std::pair<std::string, std::string>> files = {
      {"detector.csv", format_detector_trace(trace)},
      {"penalty.csv", format_penalty_trace(trace)},
      {"utility.csv", format_utility_log(trace, scn.penalty.vote_ratio)},
      {"events.csv", format_events(trace)},
      {"series_power.csv", format_power_series(trace)},
      {"series_factor.csv", format_factor_series(trace)},
      {"series_penalty.csv", format_penalty_series(trace)},
      {"series_isolation.csv", format_isolation_series(trace)},
      {"probes.csv", probing::format_probe_trace(trace.probes)},
  };
  std::vector<std::filesystem::path> written;
  for (const auto& [name, body] : files) {
    const auto path = dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << body;
    written.push_back(path);
  }
  return written;
}

}  // namespace gridwatch::sim
