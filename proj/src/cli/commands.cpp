#include "gridwatch/cli/commands.hpp"

#include <fstream>
#include <ostream>

#include <json.hpp>

#include "gridwatch/common/error.hpp"
#include "gridwatch/common/format.hpp"
#include "gridwatch/dopf/errors.hpp"
#include "gridwatch/dopf/solver.hpp"
#include "gridwatch/grid/case_file.hpp"
#include "gridwatch/probing/probe_trace.hpp"
#include "gridwatch/sim/simulation.hpp"
#include "gridwatch/sim/trace_io.hpp"

namespace gridwatch::cli {

namespace {

using nlohmann::ordered_json;

std::string describe(const ValidationError& e) { return e.where() + ": " + e.message(); }

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << body;
}

dopf::DopfOptions solver_options(std::optional<int> max_iterations, std::optional<double> eps,
                                 bool dc) {
  dopf::DopfOptions o;
  if (max_iterations) o.max_iterations = *max_iterations;
  if (eps) o.eps_consensus = *eps;
  if (dc) o.model = dopf::FlowModel::kDc;
  return o;
}

}  // namespace

std::string summary_json(const RunReport& report) {
  ordered_json j;
  j["exit_code"] = report.exit_code;
  auto arts = ordered_json::array();
  for (const auto& a : report.artifacts) arts.push_back(a.generic_string());
  j["artifacts"] = arts;
  j["errors"] = report.errors;
  auto mf = ordered_json::object();
  for (const auto& [id, f] : report.max_factor) mf[grid::to_string(id)] = f;
  j["max_factor"] = mf;
  auto iso = ordered_json::array();
  for (const auto& [k, id] : report.isolations) iso.push_back({{"interval", k}, {"target", id.value}});
  j["isolations"] = iso;
  if (report.solver_iterations) j["solver_iterations"] = *report.solver_iterations;
  return j.dump(2) + "\n";
}

RunReport cmd_validate(const std::filesystem::path& case_path,
                       const std::optional<std::filesystem::path>& scenario_path, std::ostream& out) {
  RunReport report;
  std::optional<grid::Network> net;
  try {
    net = grid::load_case(case_path);
  } catch (const ValidationError& e) {
    report.errors.push_back(describe(e));
  }
  if (scenario_path) {
    try {
      const auto scn = sim::load_scenario(*scenario_path);
      if (net) {
        try {
          sim::validate_against(scn, *net);
        } catch (const ValidationError& e) {
          report.errors.push_back(scenario_path->filename().string() + ":" + describe(e));
        }
      }
    } catch (const ValidationError& e) {
      report.errors.push_back(describe(e));
    }
  }
  ordered_json j;
  j["valid"] = report.errors.empty();
  j["errors"] = report.errors;
  out << j.dump(2) << "\n";
  report.exit_code = report.errors.empty() ? kOk : kValidation;
  return report;
}

RunReport cmd_solve(const std::filesystem::path& case_path, const SolveFlags& flags,
                    std::ostream& out) {
  RunReport report;
  std::optional<grid::Network> net;
  try {
    net = grid::load_case(case_path);
  } catch (const ValidationError& e) {
    report.errors.push_back(describe(e));
    report.exit_code = kValidation;
    out << "invalid case: " << describe(e) << "\n";
    return report;
  }

  const auto emit = [&](const std::string& body) {
    if (!flags.out) return;
    std::filesystem::create_directories(*flags.out);
    const auto path = *flags.out / "solver_report.json";
    write_file(path, body);
    report.artifacts.push_back(path);
  };

  try {
    const auto opts = solver_options(flags.max_iterations, flags.eps_consensus, flags.dc);
    const auto result = dopf::solve_dopf(grid::decouple(*net), opts);
    report.solver_iterations = result.iterations;
    out << "converged in " << result.iterations << " iterations, cost "
        << format_double(result.total_cost) << " $/h, losses " << format_double(result.losses_mw)
        << " MW\n";
    out << "iteration,max_A,step,alpha\n";
    for (const auto& h : result.history) {
      out << h.iteration << "," << format_double(h.max_residual) << ","
          << format_double(h.step_norm) << "," << format_double(h.alpha) << "\n";
    }
    out << "prosumer,p_ref_mw,q_ref_mvar\n";
    for (const auto& [id, e] : result.schedule.entries()) {
      out << id << "," << format_double(e.p_mw) << "," << format_double(e.q_mvar) << "\n";
    }
    emit(dopf::solver_report(result));
  } catch (const dopf::DopfNonConvergence& e) {
    report.errors.push_back(e.what());
    report.exit_code = kNonConvergence;
    out << "not converged: " << e.what() << "\n";
    emit(dopf::solver_report(e));
  } catch (const SolverError& e) {
    report.errors.push_back(e.what());
    report.exit_code = kNonConvergence;
    out << "solver failed: " << e.what() << "\n";
    ordered_json j;
    j["status"] = "failed";
    j["error"] = e.what();
    emit(j.dump(2) + "\n");
  } catch (const ValidationError& e) {
    report.errors.push_back(describe(e));
    report.exit_code = kValidation;
  } catch (const Error& e) {
    report.errors.push_back(e.what());
    report.exit_code = kRuntime;
  }
  return report;
}

RunReport cmd_run(const std::filesystem::path& case_path, const std::filesystem::path& scenario_path,
                  const RunFlags& flags, std::ostream& out) {
  RunReport report;
  std::optional<grid::Network> net;
  std::optional<sim::Scenario> scn;
  std::optional<sim::ProbeReplay> replay;
  try {
    net = grid::load_case(case_path);
    scn = sim::load_scenario(scenario_path);
    if (flags.seed) scn->seed = *flags.seed;
    sim::validate_against(*scn, *net);
    if (flags.probes) replay = probing::read_probe_trace(*flags.probes);
  } catch (const ValidationError& e) {
    report.errors.push_back(describe(e));
    report.exit_code = kValidation;
    out << "invalid input: " << describe(e) << "\n";
    return report;
  }

  const auto opts = solver_options(flags.max_iterations, flags.eps_consensus, flags.dc);
  const auto provider = sim::make_provider(*scn, opts);
  sim::SimTrace trace;
  try {
    sim::Simulation simulation(*scn, *net, provider, replay);
    while (!simulation.finished()) simulation.step(trace);
  } catch (const dopf::DopfNonConvergence& e) {
    report.errors.push_back(e.what());
    report.exit_code = kNonConvergence;
    out << "reference solve failed: " << e.what() << "\n";
    return report;
  } catch (const ValidationError& e) {
    report.errors.push_back(describe(e));
    report.exit_code = kValidation;
    out << "invalid input: " << describe(e) << "\n";
    return report;
  } catch (const Error& e) {
    report.errors.push_back(e.what());
    report.exit_code = kRuntime;
    out << "run failed: " << e.what() << "\n";
    return report;
  }

  if (auto sp = std::dynamic_pointer_cast<const mitigation::SolverReferenceProvider>(provider);
      sp && !sp->iterations().empty()) {
    report.solver_iterations = sp->iterations().front();
  }
  for (const auto& r : trace.pairs) {
    auto [it, fresh] = report.max_factor.emplace(r.target, r.factor);
    if (!fresh) it->second = std::max(it->second, r.factor);
  }
  for (const auto& e : trace.events) report.isolations.emplace_back(e.interval, e.target);

  try {
    report.artifacts = sim::write_trace(flags.out, trace, *scn);
    const auto summary = flags.out / "summary.json";
    report.artifacts.push_back(summary);
    write_file(summary, summary_json(report));
  } catch (const Error& e) {
    report.errors.push_back(e.what());
    report.exit_code = kRuntime;
    out << e.what() << "\n";
    return report;
  }
  out << "ran " << trace.intervals_run << " intervals, " << trace.events.size()
      << " isolation event(s)\n";
  for (const auto& [k, id] : report.isolations) {
    out << "  prosumer " << id << " isolated at k=" << k << "\n";
  }
  for (const auto& [id, f] : report.max_factor) {
    out << "  max F on prosumer " << id << ": " << format_double(f) << "\n";
  }
  out << "artifacts in " << flags.out.generic_string() << "\n";
  return report;
}

}  // namespace gridwatch::cli
