#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sigcap/core.hpp"
#include "sigcap/driver_model.hpp"
#include "sigcap/rng.hpp"
#include "sigcap/signal.hpp"

namespace sigcap {

struct LaneSpec {
  std::vector<Movement> movements;  // movements this lane may carry

  bool permits(Movement m) const;
  std::string code() const;  // e.g. "TR"
};

struct ApproachSpec {
  double demand_vph = 0.0;
  std::array<double, 3> turning_pct{0.0, 100.0, 0.0};  // left, through, right
  std::vector<LaneSpec> lanes;
};

struct Scenario {
  int scenario_id = 0;
  std::uint64_t seed = 1;
  std::array<double, 4> shares{1.0, 0.0, 0.0, 0.0};  // hv, cv, av, cav
  std::array<ApproachSpec, 4> approaches;            // indexed by Approach
  SignalPlan plan;
  std::array<DriverProfile, 4> profiles;  // indexed by Fleet
  double duration = 3600.0;
  double warmup = 600.0;
  double dt = 0.1;
  double v_base = 15.6;
  double link_length = 600.0;
  double through_exit = 100.0;  // m past the bar where through vehicles leave
  double turn_exit = 30.0;      // m past the bar where turning vehicles leave
  double turn_speed_cap = 8.0;
  double turn_cap_distance = 30.0;  // m before the bar where the cap starts

  const DriverProfile& profile(Fleet f) const { return profiles[index_of(f)]; }
  double horizon() const { return warmup + duration; }
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Built-in profiles for all four fleets.
std::array<DriverProfile, 4> builtin_profiles();

/// Four-leg testbed: EB exclusive L/T/R lanes at 900 vph; NB/WB/SB an exclusive left plus
/// two shared through-right lanes at 1200 vph; 15% lefts everywhere; rights 15/5/15/25%
/// for EB/NB/WB/SB.
Scenario default_testbed();

enum class LaneGroupType : std::uint8_t {
  ExclusiveLeft,
  ExclusiveThrough,
  ExclusiveRight,
  SharedThroughRight,
  Other
};
std::string_view to_string(LaneGroupType t);

struct LaneGroupInfo {
  std::string id;  // e.g. "EB_T", "NB_TR"
  Approach approach = Approach::EB;
  LaneGroupType type = LaneGroupType::Other;
  std::vector<int> lanes;
  double right_turn_pct = 0.0;
  std::string signal_group;  // movement group whose indication governs the lanes
  double green = 0.0;
  double amber = 0.0;
  double cycle = 0.0;
};

struct VehicleState {
  std::uint64_t id = 0;
  Fleet fleet = Fleet::HV;
  Approach approach = Approach::EB;
  Movement movement = Movement::Through;
  int lane = 0;
  double position = 0.0;  // front bumper; stop bar at 0, upstream negative
  double speed = 0.0;
  double accel = 0.0;
  double length = kVehicleLength;
  double desired_speed = 0.0;
  double accel_multiplier = 1.0;
  double entry_time = 0.0;  // arrival at the network edge (before any holding)
  std::optional<double> stopbar_crossing_time;
  std::optional<StopGo> amber_latch;
  double injection_time = 0.0;
  int stops = 0;
  std::optional<double> exit_time;  // set on the step the vehicle reaches its exit point
};

struct VehicleRecord {
  std::uint64_t id = 0;
  Fleet fleet = Fleet::HV;
  Approach approach = Approach::EB;
  Movement movement = Movement::Through;
  int lane = 0;
  int group = 0;
  double desired_speed = 0.0;
  double entry_time = 0.0;
  double injection_time = 0.0;
  std::optional<double> crossing_time;
  std::optional<double> exit_time;
  double free_flow_time = 0.0;
  int stops = 0;
  bool crossed_on_red = false;
};

struct SignalEvent {
  double t = 0.0;
  std::string group;
  Indication indication = Indication::Red;
};

/// Vehicles standing upstream of the bar, front first, when a lane's green begins.
struct GreenOnsetQueue {
  int lane = 0;
  int group = 0;
  double t = 0.0;
  std::vector<std::uint64_t> vehicle_ids;
};

struct InvariantStats {
  double min_net_gap = 1e300;
  std::size_t brick_wall_violations = 0;
  double worst_brick_wall_margin = 1e300;  // min over AV steps of gap - v^2/(2 b_emax)
  std::size_t red_runs = 0;                // unlatched red crossings
  std::size_t latched_red_crossings = 0;
  std::size_t standstill_spacing_violations = 0;
  std::size_t fifo_violations = 0;
  std::size_t conservation_failures = 0;
};

struct RunLog {
  int scenario_id = 0;
  std::uint64_t seed = 0;
  std::array<double, 4> shares{};
  double measure_start = 0.0;
  double measure_end = 0.0;
  double dt = 0.1;
  std::vector<LaneGroupInfo> groups;
  std::vector<VehicleRecord> vehicles;  // sorted by id
  std::vector<SignalEvent> signal_events;
  std::vector<GreenOnsetQueue> green_onsets;
  std::vector<std::vector<std::uint16_t>> queue_samples;  // [group][measured step]
  InvariantStats stats;
  std::size_t entered = 0;
  std::size_t exited = 0;
  std::size_t in_network = 0;
  std::size_t in_holding = 0;
};

/// Random streams owned by one world. Arrival timing, movement, and lane choice draw from
/// a stream keyed on the seed alone, so scenarios that differ only in fleet mix see the
/// same demand; fleet type and per-vehicle attributes draw from a (scenario, seed) stream.
struct ArrivalStreams {
  RngStream arrivals;
  RngStream attributes;

  static ArrivalStreams for_scenario(const Scenario& s);
};

/// Bernoulli-per-step Poisson arrivals for every approach at time t. New vehicles carry
/// their lane, fleet, desired speed, and multiplier but are not yet placed on the link.
std::vector<VehicleState> generate_arrivals(const Scenario& scenario, double t, double dt,
                                            ArrivalStreams& rng, std::uint64_t& next_id);

/// Travel time from link entry to the exit point driving alone at the desired speed
/// (turning cap included).
double free_flow_time(const Scenario& scenario, Movement movement, double desired_speed,
                      double accel_multiplier, const DriverProfile& profile);

class World {
 public:
  explicit World(Scenario scenario, std::ostream* trajectory = nullptr);

  /// Advisory, stop/go, car-following, integration, crossings, exits, arrivals.
  void step();
  bool done() const;
  double time() const { return static_cast<double>(step_index_) * scenario_.dt; }
  RunLog finish();

  const Scenario& scenario() const { return scenario_; }
  std::size_t vehicles_in_network() const;
  std::size_t vehicles_holding() const;
  /// Places a vehicle directly on its lane behind the current last vehicle (tests only).
  void place(VehicleState v);
  const std::deque<VehicleState>& lane_vehicles(int lane) const { return lanes_[lane].vehicles; }

 private:
  struct LaneState {
    Approach approach = Approach::EB;
    LaneSpec spec;
    int group = 0;
    int phase = 0;
    std::deque<VehicleState> vehicles;  // downstream first
    std::deque<VehicleState> holding;
  };

  double exit_distance(Movement m) const;
  void refresh_signals(double t, bool initial);
  void snapshot_green_onsets(double t);
  void open_record(const VehicleState& v, int group);
  void finalize(const VehicleState& v, double exit_time);
  void inject(LaneState& lane, double t);
  void check_lane(const LaneState& lane, double t);

  Scenario scenario_;
  std::ostream* trajectory_;
  ArrivalStreams rng_;
  std::vector<LaneState> lanes_;
  std::vector<LaneGroupInfo> groups_;
  std::vector<Indication> phase_state_;
  std::vector<Indication> prev_phase_state_;
  std::vector<GreenWindow> windows_;
  std::vector<GreenWindow> following_;
  std::uint64_t step_index_ = 0;
  std::uint64_t total_steps_ = 0;
  std::uint64_t measure_start_step_ = 0;
  std::uint64_t next_id_ = 1;
  RunLog log_;
  std::vector<double> accel_scratch_;
  std::vector<double> last_crossing_by_lane_;
  std::vector<std::uint64_t> last_crossing_id_by_lane_;
};

/// One replication: warmup + measured duration.
RunLog run(const Scenario& scenario, std::ostream* trajectory = nullptr);

}  // namespace sigcap
