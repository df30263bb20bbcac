#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sigcap/analysis.hpp"
#include "sigcap/engine.hpp"
#include "sigcap/measurement.hpp"

namespace sigcap {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;      // analysis or I/O failure
inline constexpr int kExitConfigError = 2;  // malformed or invalid input
inline constexpr int kExitInvariant = 3;    // simulation invariant breached

/// Raised by run_sweep when one replication fails; in-flight runs are drained first.
class SweepFailure : public std::runtime_error {
 public:
  SweepFailure(int scenario_id, std::uint64_t seed, const std::string& what);
  int scenario_id;
  std::uint64_t seed;
};

/// Invariant breaches as one message per line; empty when the run is clean.
std::vector<std::string> invariant_breaches(const InvariantStats& stats);

/// Folds `next` into `total` (minimums of gaps, sums of counts).
void merge_stats(InvariantStats& total, const InvariantStats& next);

void write_invariants_csv(std::ostream& out, std::span<const RunLog* const> logs);

/// Signal changes and stop-bar crossings in time order.
void write_events_csv(std::ostream& out, const RunLog& log);

/// `base` with the fleet shares of `mix`, the given id and seed.
Scenario scenario_for_mix(const Scenario& base, const ShareMix& mix, int scenario_id,
                          std::uint64_t seed);

struct SweepJob {
  Scenario base;
  std::vector<ShareMix> grid = scenario_grid(0.2);
  std::vector<std::uint64_t> seeds = seed_range(1, 10);
  std::filesystem::path output_dir;
  int parallelism = 1;

  static std::vector<std::uint64_t> seed_range(std::uint64_t base_seed, int count);
  /// Throws ConfigError for an empty grid, repeated seeds, or parallelism < 1.
  void validate() const;
};

struct SweepResult {
  std::vector<ResultRow> rows;  // sorted by (scenario_id, seed, lane_group)
  InvariantStats stats;         // merged over every run
  std::vector<std::pair<int, std::uint64_t>> breached_runs;
  std::size_t runs = 0;
};

/// Scenario ids are 1-based positions in the grid. Output does not depend on parallelism.
SweepResult run_sweep(const SweepJob& job);

void sort_rows(std::vector<ResultRow>& rows);
void write_manifest_csv(std::ostream& out, std::span<const ShareMix> grid);

/// Regression report with columns: term, coefficient, standard
/// error, t, p, 95% bounds.
void write_regression_text(std::ostream& out, const std::string& title,
                           const RegressionResult& r);
/// One row per (model, term) plus fit statistics rows.
void write_coefficients_csv(std::ostream& out,
                            std::span<const std::pair<std::string, const RegressionResult*>> models);
/// Predicted headway and CAF for every share mix and lane-group type.
void write_caf_table(std::ostream& out, const RegressionResult& coeffs,
                     std::span<const ShareMix> grid);

struct AnalysisOutputs {
  HeadwayFit reduced;
  std::optional<HeadwayFit> full;  // absent when the data carry no shared-lane rows
};

/// Fits the models and writes every analysis artifact to `out_dir`.
AnalysisOutputs analyze_rows(std::span<const ResultRow> rows, const std::filesystem::path& out_dir,
                             RowFilter filter = {});

struct RunRequest {
  std::string scenario_path;  // empty: default testbed
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir;
  std::string profiles_path;
  bool trajectories = false;
};

struct SweepRequest {
  std::string scenario_path;
  std::uint64_t seed_base = 1;
  int reps = 10;
  std::filesystem::path out_dir;
  int parallelism = 1;
  std::string profiles_path;
};

struct CalibrateRequest {
  std::string config_path;  // empty: default grids on the default testbed
  std::filesystem::path out_dir;
  int parallelism = 1;
};

struct AnalyzeRequest {
  std::string results_path;
  std::filesystem::path out_dir;
  int min_queues = 1;
};

/// Commands return an exit status and print diagnostics to `err`, progress to `log`.
int cmd_run(const RunRequest& req, std::ostream& log, std::ostream& err);
int cmd_sweep(const SweepRequest& req, std::ostream& log, std::ostream& err);
int cmd_calibrate(const CalibrateRequest& req, std::ostream& log, std::ostream& err);
int cmd_analyze(const AnalyzeRequest& req, std::ostream& log, std::ostream& err);

/// Writes the calibrated HV and CV standstill gap and headway time as a profile file.
void write_calibrated_profiles(std::ostream& out, const CalibrationResult& result);

}  // namespace sigcap
