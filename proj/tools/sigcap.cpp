// Command-line front end: run, sweep, calibrate, analyze.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sigcap/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Mixed-fleet signalized intersection simulator and capacity analysis"};
  app.require_subcommand(1);

  sigcap::RunRequest run;
  std::uint64_t run_seed = 0;
  auto* run_cmd = app.add_subcommand("run", "One replication of a scenario");
  run_cmd->add_option("--scenario", run.scenario_path, "Scenario file (default testbed if absent)");
  auto* seed_opt = run_cmd->add_option("--seed", run_seed, "Replication seed");
  run_cmd->add_option("--out", run.out_dir, "Output directory")->required();
  run_cmd->add_option("--profiles", run.profiles_path, "Driver profile override file");
  run_cmd->add_flag("--trajectories", run.trajectories, "Write trajectories.csv");

  sigcap::SweepRequest sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "All 56 fleet mixes times the seeds");
  sweep_cmd->add_option("--scenario", sweep.scenario_path, "Base scenario file");
  sweep_cmd->add_option("--seed-base", sweep.seed_base, "First seed")->capture_default_str();
  sweep_cmd->add_option("--reps", sweep.reps, "Seeds per mix")->capture_default_str();
  sweep_cmd->add_option("--out", sweep.out_dir, "Output directory")->required();
  sweep_cmd->add_option("--parallelism", sweep.parallelism, "Concurrent replications")
      ->capture_default_str();
  sweep_cmd->add_option("--profiles", sweep.profiles_path, "Driver profile override file");

  sigcap::CalibrateRequest calibrate;
  auto* cal_cmd = app.add_subcommand("calibrate", "Search HV cc0/cc1 for the base headway");
  cal_cmd->add_option("--config", calibrate.config_path, "Calibration file (default grids if absent)");
  cal_cmd->add_option("--out", calibrate.out_dir, "Output directory")->required();
  cal_cmd->add_option("--parallelism", calibrate.parallelism, "Concurrent replications")
      ->capture_default_str();

  sigcap::AnalyzeRequest analyze;
  auto* an_cmd = app.add_subcommand("analyze", "Regression, CAF table, and share grids");
  an_cmd->add_option("--results", analyze.results_path, "Merged results CSV")->required();
  an_cmd->add_option("--out", analyze.out_dir, "Output directory")->required();
  an_cmd->add_option("--min-queues", analyze.min_queues, "Minimum valid queues per row")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sigcap::kExitConfigError;
  }

  if (*run_cmd) {
    if (*seed_opt) run.seed = run_seed;
    return sigcap::cmd_run(run, std::cout, std::cerr);
  }
  if (*sweep_cmd) return sigcap::cmd_sweep(sweep, std::cout, std::cerr);
  if (*cal_cmd) return sigcap::cmd_calibrate(calibrate, std::cout, std::cerr);
  return sigcap::cmd_analyze(analyze, std::cout, std::cerr);
}
