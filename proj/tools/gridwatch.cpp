#include <CLI11.hpp>

#include <iostream>

#include "gridwatch/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"gridwatch: distributed OPF and anomaly detection for prosumer grids"};
  app.require_subcommand(1);

  std::string case_path, scenario_path, out_dir, probes_path;
  std::optional<int> max_iters;
  std::optional<double> eps;
  std::optional<std::uint64_t> seed;
  bool dc = false;

  auto* validate = app.add_subcommand("validate", "check a case and optionally a scenario");
  validate->add_option("--case", case_path, "case file")->required();
  validate->add_option("--scenario", scenario_path, "scenario file");

  auto* solve = app.add_subcommand("solve", "solve the distributed OPF for a case");
  solve->add_option("--case", case_path, "case file")->required();
  solve->add_option("--out", out_dir, "directory for solver_report.json");
  solve->add_option("--max-iters", max_iters, "outer iteration cap")->check(CLI::PositiveNumber);
  solve->add_option("--eps-consensus", eps, "consensus tolerance")->check(CLI::PositiveNumber);
  solve->add_flag("--dc", dc, "use the DC flow model");

  auto* run = app.add_subcommand("run", "run a detection scenario");
  run->add_option("--case", case_path, "case file")->required();
  run->add_option("--scenario", scenario_path, "scenario file")->required();
  run->add_option("--out", out_dir, "output directory")->default_val("out");
  run->add_option("--probes", probes_path, "probe trace to replay instead of synthesizing");
  run->add_option("--max-iters", max_iters, "outer iteration cap of reference solves")
      ->check(CLI::PositiveNumber);
  run->add_option("--eps-consensus", eps, "consensus tolerance of reference solves")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed-override", seed, "replace the scenario seed");
  run->add_flag("--dc", dc, "solve references with the DC flow model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gridwatch::cli::kValidation;
  }

  gridwatch::cli::RunReport report;
  if (validate->parsed()) {
    std::optional<std::filesystem::path> scn;
    if (!scenario_path.empty()) scn = scenario_path;
    report = gridwatch::cli::cmd_validate(case_path, scn, std::cout);
  } else if (solve->parsed()) {
    gridwatch::cli::SolveFlags f;
    if (!out_dir.empty()) f.out = out_dir;
    f.max_iterations = max_iters;
    f.eps_consensus = eps;
    f.dc = dc;
    report = gridwatch::cli::cmd_solve(case_path, f, std::cout);
  } else {
    gridwatch::cli::RunFlags f;
    f.out = out_dir;
    if (!probes_path.empty()) f.probes = probes_path;
    f.max_iterations = max_iters;
    f.eps_consensus = eps;
    f.seed = seed;
    f.dc = dc;
    report = gridwatch::cli::cmd_run(case_path, scenario_path, f, std::cout);
  }
  for (const auto& e : report.errors) std::cerr << "error: " << e << "\n";
  return report.exit_code;
}
