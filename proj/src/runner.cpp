#include "sigcap/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "sigcap/config.hpp"
#include "sigcap/parallel.hpp"

namespace sigcap {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error(dir.string() + ": cannot create output directory");
}

Scenario base_scenario(const std::string& scenario_path, const std::string& profiles_path) {
  Scenario s = scenario_path.empty() ? default_testbed() : load_scenario(scenario_path);
  if (!profiles_path.empty()) {
    load_profile_overrides(s.profiles, profiles_path);
    s.validate();
  }
  return s;
}

}  // namespace

SweepFailure::SweepFailure(int scenario_id, std::uint64_t seed, const std::string& what)
    : std::runtime_error("scenario " + std::to_string(scenario_id) + " seed " +
                         std::to_string(seed) + ": " + what),
      scenario_id(scenario_id),
      seed(seed) {}

std::vector<std::string> invariant_breaches(const InvariantStats& st) {
  std::vector<std::string> out;
  auto add = [&](std::size_t n, const char* what) {
    if (n > 0) out.push_back(std::to_string(n) + " " + what);
  };
  add(st.brick_wall_violations, "AV steps with gap below the brick-wall distance");
  add(st.red_runs, "stop-bar crossings on red without an amber commitment");
  add(st.fifo_violations, "out-of-order crossings within a lane");
  add(st.conservation_failures, "vehicle conservation failures");
  return out;
}

void merge_stats(InvariantStats& total, const InvariantStats& next) {
  total.min_net_gap = std::min(total.min_net_gap, next.min_net_gap);
  total.worst_brick_wall_margin = std::min(total.worst_brick_wall_margin,
                                           next.worst_brick_wall_margin);
  total.brick_wall_violations += next.brick_wall_violations;
  total.red_runs += next.red_runs;
  total.latched_red_crossings += next.latched_red_crossings;
  total.standstill_spacing_violations += next.standstill_spacing_violations;
  total.fifo_violations += next.fifo_violations;
  total.conservation_failures += next.conservation_failures;
}

void write_invariants_csv(std::ostream& out, std::span<const RunLog* const> logs) {
  out << "scenario_id,seed,min_net_gap,worst_brick_wall_margin,brick_wall_violations,red_runs,"
         "latched_red_crossings,standstill_spacing_violations,fifo_violations,"
         "conservation_failures,entered,exited,in_network,in_holding\n";
  for (const RunLog* log : logs) {
    const InvariantStats& st = log->stats;
    const double margin = st.worst_brick_wall_margin > 1e299 ? NAN : st.worst_brick_wall_margin;
    out << log->scenario_id << ',' << log->seed << ',' << format_number(st.min_net_gap) << ','
        << (std::isnan(margin) ? std::string() : format_number(margin)) << ','
        << st.brick_wall_violations << ',' << st.red_runs << ',' << st.latched_red_crossings << ','
        << st.standstill_spacing_violations << ',' << st.fifo_violations << ','
        << st.conservation_failures << ',' << log->entered << ',' << log->exited << ','
        << log->in_network << ',' << log->in_holding << '\n';
  }
}

void write_events_csv(std::ostream& out, const RunLog& log) {
  struct Event {
    double t;
    int order;  // signal changes sort before crossings at the same instant
    std::string line;
  };
  std::vector<Event> events;
  for (const SignalEvent& e : log.signal_events)
    events.push_back({e.t, 0,
                      format_number(e.t) + ",signal," + e.group + ",," +
                          std::string(to_string(e.indication))});
  for (const VehicleRecord& v : log.vehicles) {
    if (!v.crossing_time) continue;
    events.push_back({*v.crossing_time, 1,
                      format_number(*v.crossing_time) + ",crossing," + log.groups[v.group].id +
                          "," + std::to_string(v.id) + "," +
                          std::string(v.crossed_on_red ? "red" : "")});
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.t != b.t ? a.t < b.t : a.order < b.order;
  });
  out << "t,event,group,vehicle_id,detail\n";
  for (const Event& e : events) out << e.line << '\n';
}

Scenario scenario_for_mix(const Scenario& base, const ShareMix& mix, int scenario_id,
                          std::uint64_t seed) {
  Scenario s = base;
  s.shares = {mix.hv, mix.cv, mix.av, mix.cav};
  s.scenario_id = scenario_id;
  s.seed = seed;
  return s;
}

std::vector<std::uint64_t> SweepJob::seed_range(std::uint64_t base_seed, int count) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(base_seed + static_cast<std::uint64_t>(i));
  return seeds;
}

void SweepJob::validate() const {
  if (grid.empty()) throw ConfigError("sweep: share grid is empty");
  if (seeds.empty()) throw ConfigError("sweep: no seeds");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("sweep: seeds must be distinct");
  if (parallelism < 1) throw ConfigError("sweep: parallelism must be >= 1");
  base.validate();
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.scenario_id != b.scenario_id) return a.scenario_id < b.scenario_id;
    if (a.seed != b.seed) return a.seed < b.seed;
    return a.lane_group < b.lane_group;
  });
}

SweepResult run_sweep(const SweepJob& job) {
  job.validate();
  const std::size_t n_seeds = job.seeds.size();
  const std::size_t n = job.grid.size() * n_seeds;
  std::vector<std::vector<ResultRow>> per_run(n);
  std::vector<InvariantStats> stats(n);
  const bool write = !job.output_dir.empty();
  std::vector<std::optional<RunLog>> kept(write ? n : 0);

  auto ids = [&](std::size_t i) {
    return std::pair<int, std::uint64_t>{static_cast<int>(i / n_seeds) + 1,
                                         job.seeds[i % n_seeds]};
  };
  try {
    parallel_for(n, job.parallelism, [&](std::size_t i) {
      const auto [id, seed] = ids(i);
      RunLog log = run(scenario_for_mix(job.base, job.grid[i / n_seeds], id, seed));
      per_run[i] = result_rows(log, summarize(log));
      stats[i] = log.stats;
      if (write) {
        // Keep only what the invariants table needs.
        RunLog slim;
        slim.scenario_id = log.scenario_id;
        slim.seed = log.seed;
        slim.stats = log.stats;
        slim.entered = log.entered;
        slim.exited = log.exited;
        slim.in_network = log.in_network;
        slim.in_holding = log.in_holding;
        kept[i] = std::move(slim);
      }
    });
  } catch (const TaskFailure& f) {
    const auto [id, seed] = ids(f.index);
    throw SweepFailure(id, seed, f.what());
  }

  SweepResult result;
  result.runs = n;
  for (std::size_t i = 0; i < n; ++i) {
    result.rows.insert(result.rows.end(), per_run[i].begin(), per_run[i].end());
    merge_stats(result.stats, stats[i]);
    if (!invariant_breaches(stats[i]).empty()) result.breached_runs.push_back(ids(i));
  }
  sort_rows(result.rows);

  if (write) {
    ensure_dir(job.output_dir);
    auto results = open_out(job.output_dir / "results.csv");
    write_results_csv(results, result.rows);
    auto manifest = open_out(job.output_dir / "manifest.csv");
    write_manifest_csv(manifest, job.grid);
    std::vector<const RunLog*> ptrs;
    for (const auto& k : kept) ptrs.push_back(&*k);
    auto inv = open_out(job.output_dir / "invariants.csv");
    write_invariants_csv(inv, ptrs);
  }
  return result;
}

void write_manifest_csv(std::ostream& out, std::span<const ShareMix> grid) {
  out << "scenario_id,hv,cv,av,cav\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ShareMix& m = grid[i];
    out << i + 1 << ',' << format_number(m.hv) << ',' << format_number(m.cv) << ','
        << format_number(m.av) << ',' << format_number(m.cav) << '\n';
  }
}

void write_regression_text(std::ostream& out, const std::string& title,
                           const RegressionResult& r) {
  char buf[256];
  out << title << '\n';
  std::snprintf(buf, sizeof buf, "%-12s %12s %12s %10s %10s %12s %12s\n", "term", "coefficient",
                "std.error", "t", "p", "ci95.low", "ci95.high");
  out << buf;
  for (std::size_t i = 0; i < r.terms.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-12s %12.4f %12.4f %10.2f %10.4f %12.4f %12.4f\n",
                  r.terms[i].c_str(), r.coefficients[i], r.standard_errors[i], r.t_stats[i],
                  r.p_values[i], r.ci95_low[i], r.ci95_high[i]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "n = %zu, R2 = %.4f, adjusted R2 = %.4f, residual sd = %.4f s\n",
                r.n_obs, r.r2, r.adj_r2, r.residual_sd);
  out << buf << "95% bounds use coefficient +/- 1.96 standard errors.\n\n";
}

void write_coefficients_csv(
    std::ostream& out, std::span<const std::pair<std::string, const RegressionResult*>> models) {
  out << "model,term,coefficient,std_error,t_stat,p_value,ci95_low,ci95_high\n";
  for (const auto& [name, r] : models)
    for (std::size_t i = 0; i < r->terms.size(); ++i)
      out << name << ',' << r->terms[i] << ',' << format_number(r->coefficients[i]) << ','
          << format_number(r->standard_errors[i]) << ',' << format_number(r->t_stats[i]) << ','
          << format_number(r->p_values[i]) << ',' << format_number(r->ci95_low[i]) << ','
          << format_number(r->ci95_high[i]) << '\n';
  out << "\nmodel,n_obs,r2,adj_r2,residual_sd\n";
  for (const auto& [name, r] : models)
    out << name << ',' << r->n_obs << ',' << format_number(r->r2) << ','
        << format_number(r->adj_r2) << ',' << format_number(r->residual_sd) << '\n';
}

void write_caf_table(std::ostream& out, const RegressionResult& coeffs,
                     std::span<const ShareMix> grid) {
  struct Lane {
    const char* type;
    HeadwayInputs flags;
  };
  const Lane lanes[] = {
      {"EXT", {}},
      {"EXL", {.d_exl = 1}},
      {"EXR", {.d_exr = 1}},
      {"SHTR", {.d_shtr = 1}},
  };
  out << "scenario_id,hv,cv,av,cav,group_type,headway,caf\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (const Lane& lane : lanes) {
      HeadwayInputs in = lane.flags;
      in.cv = grid[i].cv;
      in.av = grid[i].av;
      in.cav = grid[i].cav;
      out << i + 1 << ',' << format_number(grid[i].hv) << ',' << format_number(in.cv) << ','
          << format_number(in.av) << ',' << format_number(in.cav) << ',' << lane.type << ','
          << format_number(predict_headway(coeffs, in)) << ','
          << format_number(caf(coeffs, in)) << '\n';
    }
  }
}

AnalysisOutputs analyze_rows(std::span<const ResultRow> rows, const fs::path& out_dir,
                             RowFilter filter) {
  AnalysisOutputs a{fit_headway_model(rows, false, filter), std::nullopt};
  const auto used = regression_rows(rows, filter);
  const bool has_shared = std::any_of(used.begin(), used.end(),
                                      [](const ResultRow& r) { return r.d_shtr == 1; });
  if (has_shared) a.full = fit_headway_model(rows, true, filter);

  ensure_dir(out_dir);
  std::vector<std::pair<std::string, const RegressionResult*>> models{{"reduced", &a.reduced.model}};
  {
    auto txt = open_out(out_dir / "regression.txt");
    write_regression_text(txt, "Reduced model (default): h = h_s + b_cv CV + b_av AV + b_cav CAV"
                               " + b_exl D_EXL + b_exr D_EXR",
                          a.reduced.model);
    if (a.full) {
      write_regression_text(txt, "Full model: adds D_SHTR and D_SHTR x RT", a.full->model);
      models.emplace_back("full", &a.full->model);
      if (a.full->refit) {
        txt << "D_SHTR p-value exceeds 0.85; refit without it:\n";
        write_regression_text(txt, "Refit model", *a.full->refit);
        models.emplace_back("refit", &*a.full->refit);
      }
    }
  }
  {
    auto csv = open_out(out_dir / "coefficients.csv");
    write_coefficients_csv(csv, models);
  }
  const std::vector<ShareMix> grid = scenario_grid(0.2);
  {
    auto csv = open_out(out_dir / "caf_table.csv");
    write_caf_table(csv, a.reduced.model, grid);
  }
  for (int hv_pct : {0, 20, 40, 60}) {
    const double hv = hv_pct / 100.0;
    for (const auto& [quantity, name] : {std::pair{GridQuantity::Headway, "headway"},
                                         std::pair{GridQuantity::Caf, "caf"}}) {
      auto csv = open_out(out_dir / (std::string(name) + "_hv" + std::to_string(hv_pct) + ".csv"));
      write_grid_csv(csv, grid_export(a.reduced.model, hv, quantity));
    }
  }
  return a;
}

int cmd_run(const RunRequest& req, std::ostream& log, std::ostream& err) {
  Scenario s;
  try {
    s = base_scenario(req.scenario_path, req.profiles_path);
    if (req.seed) s.seed = *req.seed;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  try {
    ensure_dir(req.out_dir);
    RunLog rl;
    if (req.trajectories) {
      auto traj = open_out(req.out_dir / "trajectories.csv");
      traj << "t,id,fleet,lane,position,speed\n";
      rl = run(s, &traj);
    } else {
      rl = run(s);
    }
    const MobilitySummary summary = summarize(rl);
    const std::vector<ResultRow> rows = result_rows(rl, summary);
    {
      auto out = open_out(req.out_dir / "results.csv");
      write_results_csv(out, rows);
    }
    {
      auto out = open_out(req.out_dir / "periods.csv");
      write_period_csv(out, rl, summary);
    }
    {
      auto out = open_out(req.out_dir / "events.csv");
      write_events_csv(out, rl);
    }
    {
      auto out = open_out(req.out_dir / "invariants.csv");
      const RunLog* p = &rl;
      write_invariants_csv(out, std::span<const RunLog* const>(&p, 1));
    }
    const auto breaches = invariant_breaches(rl.stats);
    if (!breaches.empty()) {
      err << "invariant breach in scenario " << s.scenario_id << " seed " << s.seed << ":\n";
      for (const auto& b : breaches) err << "  " << b << '\n';
      return kExitInvariant;
    }
    const GroupSummary& all = summary.intersection;
    log << "scenario " << s.scenario_id << " seed " << s.seed << ": throughput "
        << format_number(all.throughput) << " veh/h, h_s "
        << (all.headway.h_s ? format_number(*all.headway.h_s) : std::string("n/a")) << " s ("
        << all.headway.n_queues << " queues)\n";
    return kExitOk;
  } catch (const StateCorruption& e) {
    err << "invariant breach in scenario " << s.scenario_id << " seed " << s.seed << ": "
        << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int cmd_sweep(const SweepRequest& req, std::ostream& log, std::ostream& err) {
  SweepJob job;
  try {
    job.base = base_scenario(req.scenario_path, req.profiles_path);
    if (req.reps < 1) throw ConfigError("sweep: --reps must be >= 1");
    job.seeds = SweepJob::seed_range(req.seed_base, req.reps);
    job.output_dir = req.out_dir;
    job.parallelism = req.parallelism;
    job.validate();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const SweepResult r = run_sweep(job);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << r.runs << " runs in " << fmt("%.1f", secs) << " s, " << r.rows.size()
        << " result rows\n";
    if (!r.breached_runs.empty()) {
      err << "invariant breaches in " << r.breached_runs.size() << " runs:\n";
      for (const auto& b : invariant_breaches(r.stats)) err << "  " << b << '\n';
      for (const auto& [id, seed] : r.breached_runs)
        err << "  scenario " << id << " seed " << seed << '\n';
      return kExitInvariant;
    }
    return kExitOk;
  } catch (const SweepFailure& e) {
    err << "sweep aborted: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

void write_calibrated_profiles(std::ostream& out, const CalibrationResult& result) {
  // CV drivers are human; they share the calibrated HV car-following parameters.
  out << "# calibrated base headway " << format_number(result.achieved_h) << " s\n";
  for (const char* fleet : {"HV", "CV"}) {
    out << fleet << ".cc0 = " << format_number(result.cc0) << '\n';
    out << fleet << ".cc1 = " << format_number(result.cc1) << '\n';
  }
}

int cmd_calibrate(const CalibrateRequest& req, std::ostream& log, std::ostream& err) {
  CalibrationConfig cfg;
  Scenario base;
  try {
    if (!req.config_path.empty()) {
      cfg = load_calibration(req.config_path);
    } else {
      cfg.options.cc0_grid = default_cc0_grid();
      cfg.options.cc1_grid = default_cc1_grid();
    }
    cfg.options.parallelism = req.parallelism;
    base = cfg.scenario_path.empty() ? default_testbed() : load_scenario(cfg.scenario_path);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  try {
    const CalibrationResult r = calibrate_base(base, cfg.options);
    ensure_dir(req.out_dir);
    {
      auto out = open_out(req.out_dir / "calibration_points.csv");
      out << "cc0,cc1,mean_h,n_queues\n";
      for (const CalibrationPoint& p : r.points)
        out << format_number(p.cc0) << ',' << format_number(p.cc1) << ','
            << (p.mean_h ? format_number(*p.mean_h) : std::string()) << ',' << p.n_queues
            << '\n';
    }
    {
      auto out = open_out(req.out_dir / "calibration_report.txt");
      out << "target_h = " << format_number(cfg.options.target_h) << '\n'
          << "cc0 = " << format_number(r.cc0) << '\n'
          << "cc1 = " << format_number(r.cc1) << '\n'
          << "achieved_h = " << format_number(r.achieved_h) << '\n'
          << "abs_error = " << format_number(std::abs(r.achieved_h - cfg.options.target_h))
          << '\n'
          << "replications = " << cfg.options.replications << '\n'
          << "grid_points = " << r.points.size() << '\n';
      for (const auto& w : r.warnings) out << "warning: " << w << '\n';
    }
    {
      auto out = open_out(req.out_dir / "calibrated_profiles.txt");
      write_calibrated_profiles(out, r);
    }
    for (const auto& w : r.warnings) err << "warning: " << w << '\n';
    log << "cc0 = " << format_number(r.cc0) << " m, cc1 = " << format_number(r.cc1)
        << " s, achieved h = " << format_number(r.achieved_h) << " s\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int cmd_analyze(const AnalyzeRequest& req, std::ostream& log, std::ostream& err) {
  std::vector<ResultRow> rows;
  std::ifstream in(req.results_path);
  if (!in) {
    err << "error: " << req.results_path << ": cannot open results file\n";
    return kExitConfigError;
  }
  try {
    rows = read_results_csv(in);
  } catch (const ConfigError& e) {
    err << "error: " << req.results_path << ": " << e.what() << '\n';
    return kExitConfigError;
  }
  try {
    const AnalysisOutputs a = analyze_rows(rows, req.out_dir, RowFilter{req.min_queues});
    write_regression_text(log, "Reduced model", a.reduced.model);
    return kExitOk;
  } catch (const SingularDesignError& e) {
    err << "analysis error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace sigcap
