#include "sigcap/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>

namespace sigcap {

namespace {

constexpr double kShareTolerance = 1e-9;
constexpr double kTurningTolerance = 1e-6;
constexpr double kTurnApproachDecel = 2.0;  // m/s^2, shapes the speed profile into the cap
constexpr double kMaxLeaders = 4;
constexpr double kBrickWallTolerance = 0.05;  // m, numerical slack on the AV brick-wall check

bool same_phase(const Phase& a, const Phase& b) { return &a == &b; }

}  // namespace

bool LaneSpec::permits(Movement m) const {
  return std::find(movements.begin(), movements.end(), m) != movements.end();
}

std::string LaneSpec::code() const {
  std::string c;
  for (Movement m : kAllMovements)
    if (permits(m)) c.push_back(movement_code(m));
  return c;
}

std::string_view to_string(LaneGroupType t) {
  switch (t) {
    case LaneGroupType::ExclusiveLeft: return "EXL";
    case LaneGroupType::ExclusiveThrough: return "EXT";
    case LaneGroupType::ExclusiveRight: return "EXR";
    case LaneGroupType::SharedThroughRight: return "SHTR";
    case LaneGroupType::Other: return "OTHER";
  }
  return "?";
}

void Scenario::validate() const {
  double share_sum = 0.0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    if (!(shares[i] >= 0.0))
      throw ConfigError("scenario.shares." + std::string(to_string(kAllFleets[i])) +
                        ": must be >= 0");
    share_sum += shares[i];
  }
  if (std::abs(share_sum - 1.0) > kShareTolerance) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "scenario.shares: sum to %.6g, expected 1", share_sum);
    throw ConfigError(buf);
  }
  if (!(dt > 0.0)) throw ConfigError("scenario.dt: must be > 0");
  if (!(warmup >= 0.0)) throw ConfigError("scenario.warmup: must be >= 0");
  if (!(duration > warmup)) throw ConfigError("scenario.duration: must exceed warmup");
  if (!(v_base > 0.0)) throw ConfigError("scenario.v_base: must be > 0");
  if (!(link_length > 0.0)) throw ConfigError("scenario.link_length: must be > 0");
  if (!(through_exit >= 0.0) || !(turn_exit >= 0.0))
    throw ConfigError("scenario.exit: exit distances must be >= 0");
  if (!(turn_speed_cap > 0.0)) throw ConfigError("scenario.turn_speed_cap: must be > 0");
  plan.validate();
  for (std::size_t f = 0; f < profiles.size(); ++f) {
    if (profiles[f].fleet != kAllFleets[f])
      throw ConfigError("profile " + std::string(to_string(kAllFleets[f])) +
                        ": fleet field does not match its slot");
    profiles[f].validate();
  }
  for (Approach a : kAllApproaches) {
    const ApproachSpec& ap = approaches[index_of(a)];
    const std::string where = "approach " + std::string(to_string(a));
    if (!(ap.demand_vph >= 0.0)) throw ConfigError(where + ".demand: must be >= 0");
    double turn_sum = 0.0;
    for (double p : ap.turning_pct) {
      if (!(p >= 0.0)) throw ConfigError(where + ".turning: percentages must be >= 0");
      turn_sum += p;
    }
    if (std::abs(turn_sum - 100.0) > kTurningTolerance)
      throw ConfigError(where + ".turning: percentages must sum to 100");
    if (ap.demand_vph > 0.0 && ap.lanes.empty())
      throw ConfigError(where + ".lanes: demand without lanes");
    for (Movement m : kAllMovements) {
      if (ap.turning_pct[index_of(m)] <= 0.0 || ap.demand_vph <= 0.0) continue;
      const bool carried = std::any_of(ap.lanes.begin(), ap.lanes.end(),
                                       [m](const LaneSpec& l) { return l.permits(m); });
      if (!carried)
        throw ConfigError(where + ".lanes: no lane carries movement " +
                          std::string(to_string(m)));
    }
    for (std::size_t li = 0; li < ap.lanes.size(); ++li) {
      const LaneSpec& lane = ap.lanes[li];
      const std::string lw = where + ".lanes[" + std::to_string(li + 1) + "]";
      if (lane.movements.empty()) throw ConfigError(lw + ": no movements");
      const Phase* first = nullptr;
      for (Movement m : lane.movements) {
        const std::string g = movement_group_id(a, m);
        if (!plan.serves(g)) throw ConfigError(lw + ": movement group " + g + " has no phase");
        const Phase& p = plan.phase_for(g);
        if (first == nullptr) first = &p;
        else if (!same_phase(*first, p))
          throw ConfigError(lw + ": movements on one lane must share a phase");
      }
    }
  }
}

std::array<DriverProfile, 4> builtin_profiles() {
  return {builtin_profile(Fleet::HV), builtin_profile(Fleet::CV), builtin_profile(Fleet::AV),
          builtin_profile(Fleet::CAV)};
}

Scenario default_testbed() {
  Scenario s;
  s.plan = default_plan();
  s.profiles = builtin_profiles();
  const LaneSpec left{{Movement::Left}};
  const LaneSpec through{{Movement::Through}};
  const LaneSpec right{{Movement::Right}};
  const LaneSpec shared{{Movement::Through, Movement::Right}};

  ApproachSpec& eb = s.approaches[index_of(Approach::EB)];
  eb.demand_vph = 900.0;
  eb.turning_pct = {15.0, 70.0, 15.0};
  eb.lanes = {left, through, right};

  const std::array<std::pair<Approach, double>, 3> others{
      {{Approach::NB, 5.0}, {Approach::WB, 15.0}, {Approach::SB, 25.0}}};
  for (const auto& [a, rt] : others) {
    ApproachSpec& ap = s.approaches[index_of(a)];
    ap.demand_vph = 1200.0;
    ap.turning_pct = {15.0, 85.0 - rt, rt};
    ap.lanes = {left, shared, shared};
  }
  return s;
}

ArrivalStreams ArrivalStreams::for_scenario(const Scenario& s) {
  return ArrivalStreams{
      RngStream(derive_seed({hash_label("arrivals"), s.seed})),
      RngStream(derive_seed({hash_label("attributes"),
                             static_cast<std::uint64_t>(static_cast<std::int64_t>(s.scenario_id)),
                             s.seed}))};
}

std::vector<VehicleState> generate_arrivals(const Scenario& scenario, double t, double dt,
                                            ArrivalStreams& rng, std::uint64_t& next_id) {
  std::vector<VehicleState> out;
  int lane_base = 0;
  for (Approach a : kAllApproaches) {
    const ApproachSpec& ap = scenario.approaches[index_of(a)];
    const int lane_count = static_cast<int>(ap.lanes.size());
    // One draw per approach per step keeps the arrival stream aligned across scenarios.
    const bool arrives = rng.arrivals.bernoulli(ap.demand_vph / 3600.0 * dt);
    if (arrives && lane_count > 0) {
      const double u_move = rng.arrivals.uniform() * 100.0;
      Movement movement = Movement::Through;
      double cum = 0.0;
      for (Movement m : kAllMovements) {
        if (ap.turning_pct[index_of(m)] <= 0.0) continue;
        movement = m;
        cum += ap.turning_pct[index_of(m)];
        if (u_move < cum) break;
      }
      std::vector<int> candidates;
      for (int l = 0; l < lane_count; ++l)
        if (ap.lanes[l].permits(movement)) candidates.push_back(l);
      const std::size_t pick = rng.arrivals.index(candidates.size());

      const double u_fleet = rng.attributes.uniform();
      Fleet fleet = Fleet::HV;
      double fcum = 0.0;
      for (Fleet f : kAllFleets) {
        if (scenario.shares[index_of(f)] <= 0.0) continue;
        fleet = f;
        fcum += scenario.shares[index_of(f)];
        if (u_fleet < fcum) break;
      }
      const DriverProfile& profile = scenario.profile(fleet);

      VehicleState v;
      v.id = next_id++;
      v.fleet = fleet;
      v.approach = a;
      v.movement = movement;
      v.lane = lane_base + candidates[pick];
      v.position = -scenario.link_length;
      v.desired_speed = sample_desired_speed(profile, scenario.v_base, rng.attributes);
      v.accel_multiplier = sample_accel_multiplier(profile, rng.attributes);
      v.entry_time = t;
      out.push_back(v);
    }
    lane_base += lane_count;
  }
  return out;
}

namespace {

double capped_desired_speed(const Scenario& s, Movement movement, double position,
                            double desired) {
  if (movement == Movement::Through) return desired;
  const double cap = s.turn_speed_cap;
  const double to_cap = -s.turn_cap_distance - position;
  if (to_cap <= 0.0) return std::min(desired, cap);
  return std::min(desired, std::sqrt(cap * cap + 2.0 * kTurnApproachDecel * to_cap));
}

}  // namespace

double free_flow_time(const Scenario& scenario, Movement movement, double desired_speed,
                      double accel_multiplier, const DriverProfile& profile) {
  const double exit =
      movement == Movement::Through ? scenario.through_exit : scenario.turn_exit;
  const double dt = scenario.dt;
  double x = -scenario.link_length;
  double v = desired_speed;
  double a = 0.0;
  double t = 0.0;
  while (x < exit) {
    FollowerState self{v, a, accel_multiplier};
    FollowingContext ctx{capped_desired_speed(scenario, movement, x, desired_speed), false, dt};
    a = compute_acceleration(self, std::span<const LeaderView>{}, profile, ctx);
    const double v_next = std::max(0.0, v + a * dt);
    const double x_next = x + 0.5 * (v + v_next) * dt;
    if (x_next >= exit) return t + dt * (exit - x) / (x_next - x);
    x = x_next;
    v = v_next;
    t += dt;
  }
  return t;
}

World::World(Scenario scenario, std::ostream* trajectory)
    : scenario_(std::move(scenario)),
      trajectory_(trajectory),
      rng_(ArrivalStreams::for_scenario(scenario_)) {
  scenario_.validate();
  const SignalPlan& plan = scenario_.plan;

  for (Approach a : kAllApproaches) {
    const ApproachSpec& ap = scenario_.approaches[index_of(a)];
    std::map<std::string, int> group_by_code;
    for (const LaneSpec& spec : ap.lanes) {
      LaneState lane;
      lane.approach = a;
      lane.spec = spec;
      const std::string signal_group = movement_group_id(a, spec.movements.front());
      const Phase& phase = plan.phase_for(signal_group);
      lane.phase = static_cast<int>(&phase - plan.phases.data());
      const std::string code = spec.code();
      auto it = group_by_code.find(code);
      if (it == group_by_code.end()) {
        LaneGroupInfo info;
        info.id = std::string(to_string(a)) + "_" + code;
        info.approach = a;
        if (code == "L") info.type = LaneGroupType::ExclusiveLeft;
        else if (code == "T") info.type = LaneGroupType::ExclusiveThrough;
        else if (code == "R") info.type = LaneGroupType::ExclusiveRight;
        else if (code == "TR") info.type = LaneGroupType::SharedThroughRight;
        else info.type = LaneGroupType::Other;
        info.right_turn_pct = ap.turning_pct[index_of(Movement::Right)];
        info.signal_group = signal_group;
        info.green = phase.green();
        info.amber = phase.amber;
        info.cycle = plan.cycle_length;
        groups_.push_back(info);
        it = group_by_code.emplace(code, static_cast<int>(groups_.size()) - 1).first;
      }
      lane.group = it->second;
      groups_[it->second].lanes.push_back(static_cast<int>(lanes_.size()));
      lanes_.push_back(std::move(lane));
    }
  }

  phase_state_.assign(plan.phases.size(), Indication::Red);
  prev_phase_state_.assign(plan.phases.size(), Indication::Red);
  windows_.assign(plan.phases.size(), {});
  following_.assign(plan.phases.size(), {});
  last_crossing_by_lane_.assign(lanes_.size(), -1.0);
  last_crossing_id_by_lane_.assign(lanes_.size(), 0);

  total_steps_ = static_cast<std::uint64_t>(std::llround(scenario_.horizon() / scenario_.dt));
  measure_start_step_ =
      static_cast<std::uint64_t>(std::llround(scenario_.warmup / scenario_.dt));

  log_.scenario_id = scenario_.scenario_id;
  log_.seed = scenario_.seed;
  log_.shares = scenario_.shares;
  log_.measure_start = scenario_.warmup;
  log_.measure_end = scenario_.horizon();
  log_.dt = scenario_.dt;
  log_.groups = groups_;
  log_.queue_samples.assign(groups_.size(), {});
  for (auto& q : log_.queue_samples) q.reserve(total_steps_ - measure_start_step_ + 1);

  if (trajectory_ != nullptr) *trajectory_ << "t,id,fleet,lane,position,speed\n";
  refresh_signals(0.0, true);
}

bool World::done() const { return step_index_ >= total_steps_; }

std::size_t World::vehicles_in_network() const {
  std::size_t n = 0;
  for (const LaneState& l : lanes_) n += l.vehicles.size();
  return n;
}

std::size_t World::vehicles_holding() const {
  std::size_t n = 0;
  for (const LaneState& l : lanes_) n += l.holding.size();
  return n;
}

double World::exit_distance(Movement m) const {
  return m == Movement::Through ? scenario_.through_exit : scenario_.turn_exit;
}

void World::refresh_signals(double t, bool initial) {
  const SignalPlan& plan = scenario_.plan;
  prev_phase_state_ = phase_state_;
  for (std::size_t p = 0; p < plan.phases.size(); ++p) {
    const Phase& phase = plan.phases[p];
    const Indication ind = indication(plan, phase, t);
    phase_state_[p] = ind;
    windows_[p] = next_green_window(plan, phase, t);
    following_[p] = following_green_window(plan, phase, t);
    if (initial || ind != prev_phase_state_[p])
      for (const std::string& g : phase.movement_groups)
        log_.signal_events.push_back({t, g, ind});
  }
}

void World::snapshot_green_onsets(double t) {
  for (std::size_t li = 0; li < lanes_.size(); ++li) {
    const LaneState& lane = lanes_[li];
    const auto p = static_cast<std::size_t>(lane.phase);
    if (phase_state_[p] != Indication::Green || prev_phase_state_[p] == Indication::Green)
      continue;
    GreenOnsetQueue q;
    q.lane = static_cast<int>(li);
    q.group = lane.group;
    q.t = t;
    for (const VehicleState& v : lane.vehicles) {
      if (v.position >= 0.0) continue;  // already past the bar
      if (v.speed >= kStopSpeed) break;
      q.vehicle_ids.push_back(v.id);
    }
    if (!q.vehicle_ids.empty()) log_.green_onsets.push_back(std::move(q));
  }
}

void World::place(VehicleState v) {
  if (v.lane < 0 || static_cast<std::size_t>(v.lane) >= lanes_.size())
    throw ConfigError("place: lane index out of range");
  LaneState& lane = lanes_[static_cast<std::size_t>(v.lane)];
  if (!lane.spec.permits(v.movement)) throw ConfigError("place: lane does not carry movement");
  if (!lane.vehicles.empty()) {
    const VehicleState& last = lane.vehicles.back();
    if (v.position >= last.position - last.length)
      throw StateCorruption("place: vehicle overlaps the last vehicle in its lane");
  }
  v.id = next_id_++;
  if (v.desired_speed <= 0.0) v.desired_speed = scenario_.v_base;
  v.injection_time = v.entry_time;
  lane.vehicles.push_back(v);
  open_record(v, lane.group);
  ++log_.entered;
}

void World::open_record(const VehicleState& v, int group) {
  VehicleRecord r;
  r.id = v.id;
  r.fleet = v.fleet;
  r.approach = v.approach;
  r.movement = v.movement;
  r.lane = v.lane;
  r.group = group;
  r.desired_speed = v.desired_speed;
  r.entry_time = v.entry_time;
  r.injection_time = v.injection_time;
  if (log_.vehicles.size() < v.id) log_.vehicles.resize(v.id);
  log_.vehicles[v.id - 1] = r;
}

void World::finalize(const VehicleState& v, double exit_time) {
  VehicleRecord& r = log_.vehicles[v.id - 1];
  r.exit_time = exit_time;
  r.stops = v.stops;
  r.free_flow_time = free_flow_time(scenario_, v.movement, v.desired_speed, v.accel_multiplier,
                                    scenario_.profile(v.fleet));
  ++log_.exited;
}

constexpr double kEntryDecel = 3.0;  // m/s^2, braking assumed when sizing entry speed

void World::inject(LaneState& lane, double t) {
  if (lane.holding.empty()) return;
  VehicleState& v = lane.holding.front();
  const DriverProfile& profile = scenario_.profile(v.fleet);
  const double x0 = -scenario_.link_length;
  double speed = v.desired_speed;
  if (!lane.vehicles.empty()) {
    const VehicleState& last = lane.vehicles.back();
    const double gap = last.position - last.length - x0;
    if (gap < profile.cc0 + v.length) return;
    const double sdx = profile.cc0 + profile.cc1 * speed + profile.cc2;
    if (gap < sdx) speed = std::min(speed, last.speed);
    // Enter slow enough to stop behind a queue that has spilled back to the entry.
    speed = std::min(speed, std::sqrt(last.speed * last.speed +
                                      2.0 * kEntryDecel * std::max(0.0, gap - profile.cc0)));
    if (profile.eabd_enabled)
      speed = std::min(speed, std::sqrt(2.0 * kEmergencyDecel * gap));
  }
  v.position = x0;
  v.speed = speed;
  v.accel = 0.0;
  v.injection_time = t;
  log_.vehicles[v.id - 1].injection_time = t;
  lane.vehicles.push_back(v);
  lane.holding.pop_front();
}

void World::step() {
  if (done()) return;
  const double dt = scenario_.dt;
  const double t = time();
  const double t_next = static_cast<double>(step_index_ + 1) * dt;

  // Decisions from the state at t (synchronous update).
  for (LaneState& lane : lanes_) {
    const auto p = static_cast<std::size_t>(lane.phase);
    const Indication ind = phase_state_[p];
    const std::size_t n = lane.vehicles.size();
    accel_scratch_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      VehicleState& v = lane.vehicles[i];
      const DriverProfile& profile = scenario_.profile(v.fleet);
      double desired = capped_desired_speed(scenario_, v.movement, v.position, v.desired_speed);
      const bool upstream = v.position < 0.0;
      const double dist = -v.position;

      if (upstream && (v.fleet == Fleet::CV || v.fleet == Fleet::CAV) && dist > 0.0)
        desired = std::min(desired, advisory_speed(dist, windows_[p], following_[p], desired));

      bool stop_at_bar = false;
      if (upstream) {
        if (ind == Indication::Green) {
          v.amber_latch.reset();
        } else {
          const std::optional<StopGo> latch =
              ind == Indication::Amber && profile.amber_mode == AmberMode::ContinuousCheck
                  ? std::nullopt
                  : v.amber_latch;
          const StopGo d = stop_go_decision(v.fleet, profile.amber_mode, ind, dist, v.speed, latch);
          if (ind == Indication::Amber) v.amber_latch = d;
          stop_at_bar = d == StopGo::Stop;
        }
      }

      std::array<LeaderView, static_cast<std::size_t>(kMaxLeaders) + 1> views{};
      std::size_t nv = 0;
      const std::size_t want =
          std::min<std::size_t>(static_cast<std::size_t>(profile.interaction_vehicle_count),
                                static_cast<std::size_t>(kMaxLeaders));
      for (std::size_t k = 1; k <= want && k <= i; ++k) {
        const VehicleState& lead = lane.vehicles[i - k];
        const double gap = lead.position - lead.length - v.position;
        if (gap < 0.0)
          throw StateCorruption("negative gap behind vehicle " + std::to_string(lead.id));
        views[nv++] = LeaderView{gap, lead.speed, lead.accel, false};
      }
      if (stop_at_bar) views[nv++] = LeaderView::stop_bar(std::max(0.0, dist));

      const bool in_zone = v.position >= -profile.reduced_safety_upstream &&
                           v.position <= profile.reduced_safety_downstream;
      const FollowerState self{v.speed, v.accel, v.accel_multiplier};
      const bool green_known =
          upstream && ind == Indication::Green && (v.fleet == Fleet::CV || v.fleet == Fleet::CAV);
      const FollowingContext ctx{desired, in_zone, dt, green_known};
      accel_scratch_[i] = compute_acceleration(self, std::span<const LeaderView>(views.data(), nv),
                                               profile, ctx);
    }

    // Integrate.
    for (std::size_t i = 0; i < n; ++i) {
      VehicleState& v = lane.vehicles[i];
      const double a = accel_scratch_[i];
      const double v_next = std::max(0.0, v.speed + a * dt);
      const double x_next = v.position + 0.5 * (v.speed + v_next) * dt;
      if (v.speed >= kStopSpeed && v_next < kStopSpeed && v.position < 0.0) ++v.stops;

      if (v.position < 0.0 && x_next >= 0.0) {
        const double t_cross = t + dt * (0.0 - v.position) / (x_next - v.position);
        VehicleRecord& r = log_.vehicles[v.id - 1];
        r.crossing_time = t_cross;
        v.stopbar_crossing_time = t_cross;
        if (ind == Indication::Red) {
          r.crossed_on_red = true;
          if (v.amber_latch == StopGo::Proceed) ++log_.stats.latched_red_crossings;
          else ++log_.stats.red_runs;
        }
        const auto li = static_cast<std::size_t>(v.lane);
        if (t_cross < last_crossing_by_lane_[li] || v.id < last_crossing_id_by_lane_[li])
          ++log_.stats.fifo_violations;
        last_crossing_by_lane_[li] = t_cross;
        last_crossing_id_by_lane_[li] = v.id;
      }
      const double exit = exit_distance(v.movement);
      if (x_next >= exit && x_next > v.position)
        v.exit_time = t + dt * std::clamp((exit - v.position) / (x_next - v.position), 0.0, 1.0);
      v.accel = v_next > 0.0 || v.speed > 0.0 ? (v_next - v.speed) / dt : 0.0;
      v.speed = v_next;
      v.position = x_next;
    }
  }

  // Invariant checks on the integrated state.
  for (const LaneState& lane : lanes_) check_lane(lane, t_next);

  // Exits.
  for (LaneState& lane : lanes_) {
    for (auto it = lane.vehicles.begin(); it != lane.vehicles.end();) {
      if (it->exit_time) {
        finalize(*it, *it->exit_time);
        it = lane.vehicles.erase(it);
      } else {
        ++it;
      }
    }
  }

  // Arrivals at t_next, then injection from the holding buffers.
  for (VehicleState& v : generate_arrivals(scenario_, t_next, dt, rng_, next_id_)) {
    v.injection_time = t_next;
    LaneState& lane = lanes_[static_cast<std::size_t>(v.lane)];
    open_record(v, lane.group);
    ++log_.entered;
    lane.holding.push_back(v);
  }
  for (LaneState& lane : lanes_) inject(lane, t_next);

  if (log_.entered != log_.exited + vehicles_in_network() + vehicles_holding())
    ++log_.stats.conservation_failures;

  ++step_index_;
  refresh_signals(t_next, false);
  snapshot_green_onsets(t_next);

  if (step_index_ >= measure_start_step_) {
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      std::size_t q = 0;
      for (int li : groups_[g].lanes)
        for (const VehicleState& v : lanes_[static_cast<std::size_t>(li)].vehicles)
          if (v.position < 0.0 && v.speed < kStopSpeed) ++q;
      log_.queue_samples[g].push_back(static_cast<std::uint16_t>(std::min<std::size_t>(q, 65535)));
    }
  }

  if (trajectory_ != nullptr) {
    char buf[160];
    for (const LaneState& lane : lanes_)
      for (const VehicleState& v : lane.vehicles) {
        std::snprintf(buf, sizeof buf, "%.1f,%llu,%s,%d,%.3f,%.3f\n", t_next,
                      static_cast<unsigned long long>(v.id), to_string(v.fleet).data(), v.lane,
                      v.position, v.speed);
        *trajectory_ << buf;
      }
  }
}

void World::check_lane(const LaneState& lane, double t) {
  InvariantStats& st = log_.stats;
  for (std::size_t i = 0; i < lane.vehicles.size(); ++i) {
    const VehicleState& v = lane.vehicles[i];
    if (!(v.speed >= 0.0))
      throw StateCorruption("vehicle " + std::to_string(v.id) + " has negative speed");
    if (i == 0) continue;
    const VehicleState& lead = lane.vehicles[i - 1];
    const double gap = lead.position - lead.length - v.position;
    st.min_net_gap = std::min(st.min_net_gap, gap);
    if (!(gap > 0.0)) {
      char buf[200];
      std::snprintf(buf, sizeof buf,
                    "collision at t=%.1f: vehicle %llu reaches vehicle %llu (net gap %.4f m)", t,
                    static_cast<unsigned long long>(v.id),
                    static_cast<unsigned long long>(lead.id), gap);
      throw StateCorruption(buf);
    }
    if (v.fleet == Fleet::AV) {
      const double margin = gap - v.speed * v.speed / (2.0 * kEmergencyDecel);
      st.worst_brick_wall_margin = std::min(st.worst_brick_wall_margin, margin);
      if (margin < -kBrickWallTolerance) ++st.brick_wall_violations;
    }
    if (v.speed == 0.0 && lead.speed == 0.0 && v.accel == 0.0 && lead.accel == 0.0 &&
        v.position < 0.0) {
      const DriverProfile& p = scenario_.profile(v.fleet);
      if (gap < p.cc0 - 0.1 || gap > p.cc0 + p.cc2 + 0.1) ++st.standstill_spacing_violations;
    }
  }
}

RunLog World::finish() {
  log_.in_network = vehicles_in_network();
  log_.in_holding = vehicles_holding();
  RunLog out = std::move(log_);
  log_ = RunLog{};
  return out;
}

RunLog run(const Scenario& scenario, std::ostream* trajectory) {
  World world(scenario, trajectory);
  while (!world.done()) world.step();
  return world.finish();
}

}  // namespace sigcap
