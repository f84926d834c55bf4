#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridwatch/grid/network.hpp"

namespace gridwatch::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntime = 1,
  kValidation = 2,
  kNonConvergence = 3,
};

struct RunReport {
  int exit_code = kOk;
  std::vector<std::filesystem::path> artifacts;
  std::vector<std::string> errors;  // "where: message"
  std::map<grid::ProsumerId, double> max_factor;
  std::vector<std::pair<int, grid::ProsumerId>> isolations;  // (interval, target)
  std::optional<int> solver_iterations;
};

struct SolveFlags {
  std::optional<std::filesystem::path> out;
  std::optional<int> max_iterations;
  std::optional<double> eps_consensus;
  bool dc = false;
};

struct RunFlags {
  std::filesystem::path out = "out";
  std::optional<std::filesystem::path> probes;
  std::optional<int> max_iterations;
  std::optional<double> eps_consensus;
  std::optional<std::uint64_t> seed;
  bool dc = false;
};

/// Parses and cross-checks the inputs without simulating. Writes a JSON error
/// list to `out` on failure.
RunReport cmd_validate(const std::filesystem::path& case_path,
                       const std::optional<std::filesystem::path>& scenario_path, std::ostream& out);

/// Solves the distributed OPF, prints the schedule and residual history and
/// writes solver_report.json when an output directory is given.
RunReport cmd_solve(const std::filesystem::path& case_path, const SolveFlags& flags,
                    std::ostream& out);

/// Runs a scenario and writes traces, series files and summary.json.
RunReport cmd_run(const std::filesystem::path& case_path, const std::filesystem::path& scenario_path,
                  const RunFlags& flags, std::ostream& out);

/// Text form of a RunReport's statistics.
std::string summary_json(const RunReport& report);

}  // namespace gridwatch::cli
