#include "sigcap/driver_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sigcap {

namespace {

constexpr double kSpeedRelaxationTime = 1.0;  // s, free-driving approach to desired speed
constexpr double kMinRoom = 0.05;             // m, guards the kinematic braking formula

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ConfigError(std::string("profile field ") + field + ": " + what);
}

double free_acceleration(double speed, double desired_speed, double a_max) {
  const double toward = (desired_speed - speed) / kSpeedRelaxationTime;
  return std::clamp(toward, -0.5 * kEmergencyDecel, a_max);
}

// Distance a leader covers over `horizon` beyond what it would cover at constant speed,
// given its communicated acceleration. A braking leader is not extrapolated past a stop.
double anticipated_gain(double leader_speed, double leader_accel, double horizon) {
  if (leader_accel >= 0.0 || leader_speed + leader_accel * horizon >= 0.0)
    return 0.5 * leader_accel * horizon * horizon;
  const double stop_distance = leader_speed * leader_speed / (-2.0 * leader_accel);
  return stop_distance - leader_speed * horizon;
}

}  // namespace

void DriverProfile::validate() const {
  require(cc0 > 0.0, "cc0", "must be > 0");
  require(cc1 > 0.0, "cc1", "must be > 0");
  require(cc2 >= 0.0, "cc2", "must be >= 0");
  require(cc4 <= 0.0, "cc4", "must be <= 0");
  require(cc5 >= 0.0, "cc5", "must be >= 0");
  require(cc6 >= 0.0, "cc6", "must be >= 0");
  require(cc7 >= 0.0, "cc7", "must be >= 0");
  require(cc8 > 0.0, "cc8", "must be > 0");
  require(cc9 > 0.0, "cc9", "must be > 0");
  require(reduced_safety_factor > 0.0 && reduced_safety_factor <= 1.0, "reduced_safety_factor",
          "must lie in (0, 1]");
  require(reduced_safety_upstream >= 0.0, "reduced_safety_upstream", "must be >= 0");
  require(reduced_safety_downstream >= 0.0, "reduced_safety_downstream", "must be >= 0");
  require(interaction_vehicle_count >= 1, "interaction_vehicle_count", "must be >= 1");
  require(fleet == Fleet::CAV || interaction_vehicle_count == 1, "interaction_vehicle_count",
          "only CAV may interact with more than one vehicle");
  require(desired_accel_multiplier_range.low > 0.0 &&
              desired_accel_multiplier_range.low <= desired_accel_multiplier_range.high,
          "desired_accel_multiplier_range", "needs 0 < low <= high");
  require(anticipation_horizon >= 0.0, "anticipation_horizon", "must be >= 0");
}

DriverProfile builtin_profile(Fleet fleet) {
  DriverProfile p;
  p.fleet = fleet;
  switch (fleet) {
    case Fleet::HV:
      break;  // member defaults are the human-driver column
    case Fleet::CV:
      p.cc2 = 2.0;
      p.desired_accel_multiplier_range = {1.0, 1.0};
      break;
    case Fleet::AV:
      p.cc1 = 2.2;
      p.cc2 = 0.0;
      p.cc3 = -10.0;
      p.cc4 = -0.1;
      p.cc5 = 0.1;
      p.cc6 = 0.0;
      p.cc7 = 0.1;
      p.cc8 = 2.0;
      p.cc9 = 1.2;
      p.red_amber_go = false;
      p.reduced_safety_factor = 1.0;
      p.eabd_enabled = true;
      p.implicit_stochasticity = false;
      p.desired_accel_multiplier_range = {1.0, 1.0};
      break;
    case Fleet::CAV:
      p.cc0 = 1.0;
      p.cc1 = 1.0;
      p.cc2 = 0.0;
      p.cc3 = -6.0;
      p.cc4 = -0.1;
      p.cc5 = 0.1;
      p.cc6 = 0.0;
      p.cc7 = 0.1;
      p.cc8 = 4.0;
      p.cc9 = 2.0;
      p.amber_mode = AmberMode::OneDecision;
      p.red_amber_go = false;
      p.reduced_safety_factor = 1.0;
      p.implicit_stochasticity = false;
      p.interaction_vehicle_count = 2;
      p.desired_accel_multiplier_range = {1.1, 1.1};
      p.anticipation_horizon = 1.7;
      break;
  }
  return p;
}

double max_acceleration(const DriverProfile& profile, double speed, double multiplier) {
  const double frac = std::clamp(speed / kSpeed50Mph, 0.0, 1.0);
  return multiplier * (profile.cc8 + (profile.cc9 - profile.cc8) * frac);
}

AccelDecision single_leader_acceleration(const FollowerState& self, const LeaderView& leader,
                                         const DriverProfile& profile,
                                         const FollowingContext& ctx) {
  if (!(leader.net_gap >= 0.0))
    throw StateCorruption("negative net gap " + std::to_string(leader.net_gap) +
                          " passed to the car-following law");

  const double v = self.speed;
  const double a_max = max_acceleration(profile, v, self.accel_multiplier);
  const double a_free = free_acceleration(v, ctx.desired_speed, a_max);

  double gap = leader.net_gap;
  double v_lead = leader.leader_speed;
  const double a_lead = leader.leader_accel;
  if (profile.anticipation_horizon > 0.0 && !leader.is_signal_stop_bar) {
    const double horizon = profile.anticipation_horizon;
    gap = std::max(0.0, gap + anticipated_gain(v_lead, a_lead, horizon));
    v_lead = std::max(0.0, v_lead + a_lead * horizon);
  }

  // The reduced safety distance applies near the bar when closing on the bar itself or on
  // a standing queue; it scales only the speed-dependent part so standstill spacing is kept.
  const bool queue_ahead = leader.is_signal_stop_bar || leader.leader_speed < kStopSpeed;
  const double factor =
      ctx.in_reduced_safety_zone && queue_ahead ? profile.reduced_safety_factor : 1.0;
  const double ax = leader.is_signal_stop_bar ? kStopBarStandoff : profile.cc0;
  const double abx = ax + factor * profile.cc1 * v;
  const double sdx = abx + profile.cc2;
  const double closing_speed = v - v_lead;
  const double sdv = profile.cc6 * gap * gap * 1e-4;
  const double closing_threshold = -profile.cc4 + sdv;
  const double perception = sdx - profile.cc3 * std::max(closing_speed, 0.0);

  AccelDecision out;
  if (gap < abx) {
    out.regime = Regime::Emergency;
    if (closing_speed > 0.0) {
      const double room = gap - ax;
      out.accel = room > kMinRoom
                      ? std::min(a_lead, 0.0) - closing_speed * closing_speed / (2.0 * room)
                      : -kEmergencyDecel;
    } else {
      out.accel = v > 0.0 ? -profile.cc7 : 0.0;
    }
  } else if (closing_speed > closing_threshold && gap < perception) {
    out.regime = Regime::Closing;
    const double target = ax + factor * profile.cc1 * v_lead;
    const double room = std::max(gap - target, kMinRoom);
    out.accel = std::min(a_lead, 0.0) - closing_speed * closing_speed / (2.0 * room);
  } else if (gap <= sdx) {
    out.regime = Regime::Following;
    if (v <= 0.0 && self.accel <= 0.0 && !ctx.green_known) {
      out.accel = 0.0;  // standing in the band: wait until the gap opens past SDX
    } else {
      out.accel = a_lead + std::clamp(-closing_speed, -profile.cc7, profile.cc7);
    }
  } else {
    out.regime = Regime::FreeDriving;
    out.accel = a_free;
  }
  out.accel = std::clamp(std::min(out.accel, a_free), -kEmergencyDecel, a_max);
  return out;
}

double compute_acceleration(const FollowerState& self, std::span<const LeaderView> leaders,
                            const DriverProfile& profile, const FollowingContext& ctx) {
  if (!(self.speed >= 0.0))
    throw StateCorruption("negative speed passed to the car-following law");
  const double a_max = max_acceleration(profile, self.speed, self.accel_multiplier);
  double accel = free_acceleration(self.speed, ctx.desired_speed, a_max);
  const LeaderView* nearest_vehicle = nullptr;
  for (const LeaderView& leader : leaders) {
    accel = std::min(accel, single_leader_acceleration(self, leader, profile, ctx).accel);
    if (!leader.is_signal_stop_bar && nearest_vehicle == nullptr) nearest_vehicle = &leader;
  }
  if (profile.eabd_enabled && nearest_vehicle != nullptr)
    accel = enforce_absolute_braking(accel, self.speed, nearest_vehicle->net_gap,
                                     kEmergencyDecel, ctx.dt);
  if (profile.anticipation_horizon > 0.0 && nearest_vehicle != nullptr) {
    // Anticipation never overrides the measured gap: the follower must be able to stop
    // behind a leader braking at b_emax while keeping half its standstill gap.
    const double v_lead = nearest_vehicle->leader_speed;
    const double room = nearest_vehicle->net_gap - 0.5 * profile.cc0 +
                        v_lead * v_lead / (2.0 * kEmergencyDecel);
    accel = std::min(accel, braking_limit(self.speed, std::max(room, 0.0), kEmergencyDecel, ctx.dt));
  }
  return std::clamp(accel, -kEmergencyDecel, a_max);
}

double braking_limit(double speed, double net_gap, double b_emax, double dt) {
  // Solve v'^2/(2b) + v' dt/2 + (v dt/2 - gap) <= 0 for the largest admissible v'.
  const double qa = 1.0 / (2.0 * b_emax);
  const double qb = 0.5 * dt;
  const double qc = 0.5 * speed * dt - net_gap;
  if (qc > 0.0) return -b_emax;
  const double v_next = (-qb + std::sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa);
  return (v_next - speed) / dt;
}

double enforce_absolute_braking(double accel_candidate, double speed, double net_gap,
                                double b_emax, double dt) {
  if (speed <= 0.0) return accel_candidate;
  return std::max(std::min(accel_candidate, braking_limit(speed, net_gap, b_emax, dt)), -b_emax);
}

double sample_desired_speed(const DriverProfile& profile, double v_base, RngStream& rng) {
  const double u = rng.uniform();
  if (!profile.implicit_stochasticity) return v_base;
  return v_base * (0.95 + 0.10 * u);
}

double sample_accel_multiplier(const DriverProfile& profile, RngStream& rng) {
  const auto& r = profile.desired_accel_multiplier_range;
  const double u = rng.uniform();
  return r.low == r.high ? r.low : r.low + (r.high - r.low) * u;
}

}  // namespace sigcap
