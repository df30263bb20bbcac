#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "sigcap/config.hpp"
#include "sigcap/runner.hpp"

using namespace sigcap;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sigcap_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

Scenario short_base() {
  Scenario s = default_testbed();
  s.warmup = 60.0;
  s.duration = 300.0;
  return s;
}

const char* kShortScenario =
    "[scenario]\n"
    "seed = 5\n"
    "shares = 0.4 0.2 0.2 0.2\n"
    "duration = 400\n"
    "warmup = 100\n";

}  // namespace

TEST_CASE("scenario files") {
  SUBCASE("the shipped testbed file matches the built-in testbed") {
    const Scenario file = load_scenario(SIGCAP_DATA_DIR "/default_testbed.ini");
    const Scenario builtin = default_testbed();
    CHECK(file.plan.cycle_length == builtin.plan.cycle_length);
    CHECK(file.plan.phases.size() == builtin.plan.phases.size());
    for (Approach a : kAllApproaches) {
      const auto& x = file.approaches[index_of(a)];
      const auto& y = builtin.approaches[index_of(a)];
      CHECK(x.demand_vph == y.demand_vph);
      CHECK(x.turning_pct == y.turning_pct);
      REQUIRE(x.lanes.size() == y.lanes.size());
      for (std::size_t l = 0; l < x.lanes.size(); ++l) CHECK(x.lanes[l].code() == y.lanes[l].code());
    }
  }
  SUBCASE("overrides apply") {
    std::istringstream in(std::string(kShortScenario) +
                          "[approach EB]\ndemand = 450\n[profiles]\nCAV.anticipation_horizon = 0\n");
    const Scenario s = parse_scenario(in, "t.ini");
    CHECK(s.seed == 5);
    CHECK(s.shares[3] == 0.2);
    CHECK(s.duration == 400.0);
    CHECK(s.approaches[index_of(Approach::EB)].demand_vph == 450.0);
    CHECK(s.profile(Fleet::CAV).anticipation_horizon == 0.0);
  }
  SUBCASE("errors carry the source line and the field") {
    std::istringstream in("[scenario]\nseed = 2\nshares = 0.9 0 0 0\n");
    CHECK_THROWS_WITH_AS(parse_scenario(in, "bad.ini"),
                         doctest::Contains("bad.ini:3: scenario.shares"), ConfigError);
    std::istringstream unknown("[scenario]\ncolour = red\n");
    CHECK_THROWS_WITH_AS(parse_scenario(unknown, "u.ini"), doctest::Contains("u.ini:2:"),
                         ConfigError);
    std::istringstream cycle("[plan]\ncycle = 100\nphase = EBL,WBL 15 3 1\n"
                             "phase = EBT,EBR,WBT,WBR 40 3 1\nphase = NBL,SBL 15 3 1\n"
                             "phase = NBT,NBR,SBT,SBR 38 3 1\n");
    CHECK_THROWS_WITH_AS(parse_scenario(cycle, "c.ini"), doctest::Contains("c.ini:2:"),
                         ConfigError);
    std::istringstream number("[approach NB]\ndemand = lots\n");
    CHECK_THROWS_WITH_AS(parse_scenario(number, "n.ini"), doctest::Contains("n.ini:2:"),
                         ConfigError);
  }
}

TEST_CASE("profile override files") {
  auto profiles = builtin_profiles();
  std::istringstream in("# comment\nHV.cc0 = 1.2\nCV.cc1 = 1.4\nAV.amber_mode = one_decision\n"
                        "CAV.desired_accel_multiplier_range = 1.0 1.2\n");
  apply_profile_overrides(profiles, in);
  CHECK(profiles[0].cc0 == 1.2);
  CHECK(profiles[1].cc1 == 1.4);
  CHECK(profiles[2].amber_mode == AmberMode::OneDecision);
  CHECK(profiles[3].desired_accel_multiplier_range.high == 1.2);
  std::istringstream bad("HV.cc0 = 1.2\nHV.warp = 9\n");
  CHECK_THROWS_WITH_AS(apply_profile_overrides(profiles, bad, "p.txt"),
                       doctest::Contains("p.txt:2:"), ConfigError);
  std::istringstream invalid("HV.interaction_vehicle_count = 3\n");
  CHECK_THROWS_WITH_AS(apply_profile_overrides(profiles, invalid, "p.txt"),
                       doctest::Contains("interaction_vehicle_count"), ConfigError);
}

TEST_CASE("calibration files") {
  std::istringstream in("[calibration]\ntarget = 2.0\ncc0 = 1.0:2.0:0.25\ncc1 = 1.2 1.4\n"
                        "replications = 2\nseed = 9\n");
  const CalibrationConfig c = parse_calibration(in);
  CHECK(c.options.cc0_grid.size() == 5);
  CHECK(c.options.cc1_grid == std::vector<double>{1.2, 1.4});
  CHECK(c.options.replications == 2);
  CHECK(c.options.seed_base == 9);
  std::istringstream empty("[calibration]\ncc0 =\n");
  CHECK_THROWS_WITH_AS(parse_calibration(empty, "k.ini"), doctest::Contains("grid is empty"),
                       ConfigError);
  const CalibrationConfig shipped = load_calibration(SIGCAP_DATA_DIR "/calibration.ini");
  CHECK(shipped.options.cc0_grid == default_cc0_grid());
  CHECK(shipped.options.cc1_grid.size() == default_cc1_grid().size());
}

TEST_CASE("calibrated profiles round-trip through the override format") {
  CalibrationResult r;
  r.cc0 = 1.25;
  r.cc1 = 1.45;
  r.achieved_h = 2.01;
  std::stringstream io;
  write_calibrated_profiles(io, r);
  auto profiles = builtin_profiles();
  apply_profile_overrides(profiles, io);
  CHECK(profiles[index_of(Fleet::HV)].cc0 == 1.25);
  CHECK(profiles[index_of(Fleet::HV)].cc1 == 1.45);
  CHECK(profiles[index_of(Fleet::CV)].cc0 == 1.25);
  CHECK(profiles[index_of(Fleet::CV)].cc1 == 1.45);
  CHECK(profiles[index_of(Fleet::AV)].cc1 == 2.2);
}

TEST_CASE("invariant breach reporting") {
  InvariantStats clean;
  clean.min_net_gap = 0.5;
  CHECK(invariant_breaches(clean).empty());
  clean.standstill_spacing_violations = 3;
  CHECK(invariant_breaches(clean).empty());
  InvariantStats bad = clean;
  bad.red_runs = 1;
  bad.fifo_violations = 2;
  CHECK(invariant_breaches(bad).size() == 2);
  InvariantStats total;
  merge_stats(total, bad);
  merge_stats(total, bad);
  CHECK(total.red_runs == 2);
  CHECK(total.min_net_gap == 0.5);
}

TEST_CASE("run command writes reproducible outputs") {
  const fs::path dir = fresh_dir("run");
  const fs::path scenario = dir / "s.ini";
  std::ofstream(scenario) << kShortScenario;
  std::ostringstream log, err;
  RunRequest req;
  req.scenario_path = scenario.string();
  req.out_dir = dir / "a";
  req.trajectories = true;
  REQUIRE(cmd_run(req, log, err) == kExitOk);
  req.out_dir = dir / "b";
  REQUIRE(cmd_run(req, log, err) == kExitOk);
  for (const char* f : {"results.csv", "periods.csv", "events.csv", "invariants.csv",
                        "trajectories.csv"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(slurp(dir / "a" / "events.csv").rfind("t,event,group,vehicle_id,detail\n", 0) == 0);
  std::ifstream results(dir / "a" / "results.csv");
  const std::vector<ResultRow> rows = read_results_csv(results);
  CHECK(rows.size() == 10);  // nine lane groups plus the intersection
  CHECK(rows.back().lane_group == "ALL");

  req.seed = 6;
  req.out_dir = dir / "c";
  REQUIRE(cmd_run(req, log, err) == kExitOk);
  CHECK(slurp(dir / "a" / "events.csv") != slurp(dir / "c" / "events.csv"));
}

TEST_CASE("commands reject bad input with the config exit status") {
  const fs::path dir = fresh_dir("bad");
  std::ofstream(dir / "bad.ini") << "[scenario]\nshares = 0.9 0 0 0\n";
  std::ostringstream log, err;
  RunRequest run_req;
  run_req.scenario_path = (dir / "bad.ini").string();
  run_req.out_dir = dir / "out";
  CHECK(cmd_run(run_req, log, err) == kExitConfigError);
  CHECK(err.str().find("scenario.shares") != std::string::npos);

  AnalyzeRequest an;
  an.results_path = (dir / "missing.csv").string();
  an.out_dir = dir / "out";
  CHECK(cmd_analyze(an, log, err) == kExitConfigError);
  std::ofstream(dir / "cols.csv") << "scenario_id,seed\n1,1\n";
  an.results_path = (dir / "cols.csv").string();
  CHECK(cmd_analyze(an, log, err) == kExitConfigError);

  SweepRequest sw;
  sw.reps = 0;
  sw.out_dir = dir / "sw";
  CHECK(cmd_sweep(sw, log, err) == kExitConfigError);
}

TEST_CASE("sweep covers the grid and does not depend on parallelism") {
  SweepJob job;
  job.base = short_base();
  job.seeds = {7};
  job.parallelism = 1;
  const fs::path dir1 = fresh_dir("sweep1");
  job.output_dir = dir1;
  const SweepResult one = run_sweep(job);
  job.parallelism = 2;
  const fs::path dir2 = fresh_dir("sweep2");
  job.output_dir = dir2;
  const SweepResult two = run_sweep(job);

  CHECK(one.runs == 56);
  std::size_t all_rows = 0;
  for (const ResultRow& r : one.rows) {
    all_rows += r.lane_group == "ALL";
    CHECK(r.seed == 7);
  }
  CHECK(all_rows == 56);
  CHECK(one.breached_runs.empty());
  CHECK(line_count(dir1 / "manifest.csv") == 57);
  CHECK(fs::exists(dir1 / "invariants.csv"));
  for (const char* f : {"results.csv", "manifest.csv", "invariants.csv"}) {
    CAPTURE(f);
    CHECK(slurp(dir1 / f) == slurp(dir2 / f));
  }
  CHECK(one.rows.size() == two.rows.size());

  job.seeds = {7, 7};
  CHECK_THROWS_AS(job.validate(), ConfigError);
}

TEST_CASE("manifest lists every mix once") {
  std::ostringstream out;
  const auto grid = scenario_grid(0.2);
  write_manifest_csv(out, grid);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line.find("scenario_id") == 0);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 56);
}

TEST_CASE("analyze recovers coefficients from a synthetic results file") {
  std::mt19937_64 gen(21);
  std::normal_distribution<double> noise(0.0, 0.01);
  const auto grid = scenario_grid(0.2);
  std::vector<ResultRow> rows;
  const char* types[] = {"EXT", "EXL", "EXR"};
  for (std::uint64_t seed = 1; seed <= 2; ++seed)
    for (std::size_t g = 0; g < grid.size(); ++g)
      for (int lane = 0; lane < 3; ++lane) {
        ResultRow r;
        r.scenario_id = static_cast<int>(g) + 1;
        r.seed = seed;
        r.shares = {grid[g].hv, grid[g].cv, grid[g].av, grid[g].cav};
        r.lane_group = std::string("G") + types[lane];
        r.group_type = types[lane];
        r.d_exl = lane == 1;
        r.d_exr = lane == 2;
        r.n_queues = 35;
        r.low_sample = false;
        r.h_s = 2.0 - 0.3 * grid[g].cv + 0.6 * grid[g].av - 0.8 * grid[g].cav +
                0.2 * r.d_exl + 0.3 * r.d_exr + noise(gen);
        rows.push_back(r);
      }
  const fs::path dir = fresh_dir("analyze");
  {
    std::ofstream out(dir / "results.csv");
    write_results_csv(out, rows);
  }
  AnalyzeRequest req;
  req.results_path = (dir / "results.csv").string();
  req.out_dir = dir / "out";
  std::ostringstream log, err;
  REQUIRE(cmd_analyze(req, log, err) == kExitOk);
  for (const char* f : {"regression.txt", "coefficients.csv", "caf_table.csv", "headway_hv0.csv",
                        "caf_hv60.csv"})
    CHECK(fs::exists(dir / "out" / f));

  const AnalysisOutputs fit = analyze_rows(rows, dir / "out2");
  CHECK(fit.reduced.model.coefficient("intercept") == doctest::Approx(2.0).epsilon(0.01));
  CHECK(fit.reduced.model.coefficient("cv") == doctest::Approx(-0.3).epsilon(0.05));
  CHECK(fit.reduced.model.coefficient("av") == doctest::Approx(0.6).epsilon(0.05));
  CHECK(fit.reduced.model.coefficient("cav") == doctest::Approx(-0.8).epsilon(0.05));
  CHECK(fit.reduced.model.coefficient("d_exr") == doctest::Approx(0.3).epsilon(0.05));
  CHECK_FALSE(fit.full.has_value());

  // The CAF table's base row is exactly one.
  std::ifstream caf(dir / "out" / "caf_table.csv");
  std::string header, line;
  std::getline(caf, header);
  bool found = false;
  while (std::getline(caf, line)) {
    if (line.rfind("1,1,0,0,0,EXT,", 0) == 0) {
      found = true;
      CHECK(line.substr(line.rfind(',') + 1) == "1");
    }
  }
  CHECK(found);
}
