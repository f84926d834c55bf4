#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gridwatch/sim/simulation.hpp"

namespace gridwatch::sim {

// Column sets of the emitted files:
//   detector.csv          interval,epoch,observer,target,skipped,d_raw_mw,d_mw,D,N,F
//   penalty.csv           interval,epoch,observer,target,F,penalty_raw,penalty,saturated,vote
//   utility.csv           interval,epoch,target,votes,neighbor_count,ratio,required,isolated,slack_protected
//   events.csv            interval,target,effective_from,epoch_after,partitioned
//   series_power.csv      interval,prosumer,actual_mw,p_ref_mw
//   series_factor.csv     interval,target,mean_F,max_F
//   series_penalty.csv    interval,target,penalty
//   series_isolation.csv  interval,target,signal
//   probes.csv            see probing/probe_trace.hpp
// Pair rows are ordered by (interval, target, observer).

std::string format_detector_trace(const SimTrace& trace);
std::string format_penalty_trace(const SimTrace& trace);
std::string format_utility_log(const SimTrace& trace, double vote_ratio);
std::string format_events(const SimTrace& trace);
std::string format_power_series(const SimTrace& trace);
std::string format_factor_series(const SimTrace& trace);
std::string format_penalty_series(const SimTrace& trace);
std::string format_isolation_series(const SimTrace& trace);

/// Writes every file above into `dir` (created if needed) and returns their paths.
std::vector<std::filesystem::path> write_trace(const std::filesystem::path& dir, const SimTrace& trace,
                                               const Scenario& scn);

}  // namespace gridwatch::sim
