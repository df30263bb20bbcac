#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sigcap/engine.hpp"

namespace sigcap {

inline constexpr double kPeriodLength = 900.0;  // s, one aggregation bucket
inline constexpr int kFirstTimedVehicle = 4;
inline constexpr int kLastTimedVehicle = 10;

struct QueueDischargeRecord {
  int lane_group = 0;
  int lane = 0;
  int cycle_index = 0;
  int period_index = 0;
  double green_onset = 0.0;
  int stopped_at_green = 0;     // every vehicle standing at onset
  int queue_size_at_green = 0;  // those among them that discharge before the amber ends
  std::vector<double> crossing_times;  // queued vehicles 1..n in discharge order
  bool valid = false;
};

/// Queues standing at each measured green onset, with their stop-bar crossing times.
/// Standing vehicles left over for a later green are not part of the queue. Onsets
/// outside the measurement window produce no record.
std::vector<QueueDischargeRecord> extract_discharges(const RunLog& log);

/// Headway from vehicle 4 to the last of vehicles 7..10. Requires a valid record.
double discharge_headway(const QueueDischargeRecord& record);

struct HeadwayEstimate {
  std::optional<double> h_s;  // absent when no valid record contributed
  int n_queues = 0;
  bool low_sample = true;
};

/// Mean of per-record headways over valid records (optionally only those in one period).
/// `low_sample` always reflects every valid record passed in.
HeadwayEstimate saturation_headway(std::span<const QueueDischargeRecord> records,
                                   std::optional<int> period = std::nullopt);

/// Traversal time minus free-flow time; absent for vehicles that never exited.
std::optional<double> control_delay(const VehicleRecord& vehicle);
std::optional<double> travel_time(const VehicleRecord& vehicle);

struct QueueThroughput {
  std::vector<double> mean_queue;        // per lane group, vehicles
  std::vector<std::size_t> throughput;   // per lane group, crossings in the measured window
  double mean_queue_all = 0.0;           // mean over lane groups
  std::size_t throughput_all = 0;
};

QueueThroughput queue_length_and_throughput(const RunLog& log);

struct GroupSummary {
  std::string lane_group;  // "ALL" for the intersection
  LaneGroupType type = LaneGroupType::Other;
  double right_turn_pct = 0.0;
  HeadwayEstimate headway;
  std::array<HeadwayEstimate, 4> periods;
  std::optional<double> delay;
  std::optional<double> travel_time;
  double queue_length = 0.0;
  double throughput = 0.0;  // veh/h
  std::size_t arrivals = 0;
};

struct MobilitySummary {
  std::vector<GroupSummary> groups;
  GroupSummary intersection;
};

/// Per-group and intersection summary of the measured window. Delay and travel time
/// average vehicles that entered during the window and exited before the run ended.
/// The intersection headway is the throughput-weighted mean of group headways.
MobilitySummary summarize(const RunLog& log);

/// One row of the results table consumed by the analysis tools.
struct ResultRow {
  int scenario_id = 0;
  std::uint64_t seed = 0;
  std::array<double, 4> shares{};  // hv, cv, av, cav
  std::string lane_group;
  std::string group_type;
  int d_exl = 0;
  int d_exr = 0;
  int d_shtr = 0;
  double rt_pct = 0.0;
  std::optional<double> h_s;
  int n_queues = 0;
  bool low_sample = true;
  std::optional<double> delay;
  std::optional<double> travel_time;
  double queue_length = 0.0;
  double throughput = 0.0;
  std::size_t arrivals = 0;
};

std::vector<ResultRow> result_rows(const RunLog& log, const MobilitySummary& summary);

extern const std::vector<std::string> kResultColumns;

/// Header plus rows; floats at six significant digits; absent values as empty fields.
void write_results_csv(std::ostream& out, std::span<const ResultRow> rows);
/// Throws ConfigError naming any missing required column or malformed cell.
std::vector<ResultRow> read_results_csv(std::istream& in);

/// Per-period headways, one row per lane group and period.
void write_period_csv(std::ostream& out, const RunLog& log, const MobilitySummary& summary);

std::string format_number(double x);

}  // namespace sigcap
