#pragma once

#include <span>

#include "sigcap/core.hpp"
#include "sigcap/rng.hpp"

namespace sigcap {

enum class AmberMode : std::uint8_t { ContinuousCheck, OneDecision };

struct MultiplierRange {
  double low = 1.0;
  double high = 1.0;
};

/// Per-fleet Wiedemann-99 parameters plus the signal and automation attributes
/// that distinguish human, connected, automated, and connected-automated drivers.
struct DriverProfile {
  Fleet fleet = Fleet::HV;
  double cc0 = 1.5;   // standstill net gap, m
  double cc1 = 1.6;   // speed-dependent headway, s
  double cc2 = 4.0;   // following variation, m
  double cc3 = -8.0;  // following-entry threshold, s
  double cc4 = -0.35; // negative following threshold, m/s
  double cc5 = 0.35;  // positive following threshold, m/s
  double cc6 = 11.44; // oscillation speed dependency (x 1e-4 per m/s per m^2)
  double cc7 = 0.25;  // oscillation acceleration, m/s^2
  double cc8 = 3.5;   // standstill acceleration, m/s^2
  double cc9 = 1.5;   // acceleration at 50 mph, m/s^2
  AmberMode amber_mode = AmberMode::ContinuousCheck;
  bool red_amber_go = true;  // kept for completeness; plans carry no red+amber interval
  double reduced_safety_factor = 0.6;
  double reduced_safety_upstream = 100.0;    // m before the stop bar
  double reduced_safety_downstream = 100.0;  // m past the stop bar
  bool eabd_enabled = false;
  bool implicit_stochasticity = true;
  int interaction_vehicle_count = 1;
  MultiplierRange desired_accel_multiplier_range{1.0, 1.1};
  // Horizon over which V2V-informed drivers extrapolate their leaders' communicated
  // speed and acceleration when judging spacing. Zero disables anticipation.
  double anticipation_horizon = 0.0;

  /// Throws ConfigError naming the first violated field.
  void validate() const;
};

/// What a follower sees ahead: a real vehicle or a standing virtual leader at a stop bar.
struct LeaderView {
  double net_gap = 0.0;      // follower front bumper to leader rear bumper (or to the bar), m
  double leader_speed = 0.0;
  double leader_accel = 0.0;
  bool is_signal_stop_bar = false;

  static LeaderView stop_bar(double distance_to_bar) {
    return LeaderView{distance_to_bar, 0.0, 0.0, true};
  }
};

/// The subset of a vehicle's state the car-following law reads.
struct FollowerState {
  double speed = 0.0;
  double accel = 0.0;  // acceleration applied over the previous step
  double accel_multiplier = 1.0;
};

enum class Regime : std::uint8_t { FreeDriving, Closing, Following, Emergency };

struct AccelDecision {
  double accel = 0.0;
  Regime regime = Regime::FreeDriving;
};

struct FollowingContext {
  double desired_speed = 0.0;
  bool in_reduced_safety_zone = false;
  double dt = 0.1;
  // The driver knows its signal is green (SPaT): a standing vehicle starts with its
  // leader instead of waiting for the gap to open past the following band.
  bool green_known = false;
};

// A vehicle stopping for a signal aims for a front-bumper position this far before the bar.
inline constexpr double kStopBarStandoff = 0.25;

DriverProfile builtin_profile(Fleet fleet);

/// Maximum acceleration at speed v: cc8 at standstill, cc9 at 50 mph, linear in
/// between, flat beyond, scaled by the vehicle's sampled multiplier.
double max_acceleration(const DriverProfile& profile, double speed, double multiplier);

/// Single-leader W99 regime evaluation. Exposed for testing the multi-leader rule.
AccelDecision single_leader_acceleration(const FollowerState& self, const LeaderView& leader,
                                         const DriverProfile& profile,
                                         const FollowingContext& ctx);

/// Full longitudinal law: minimum over all leaders (nearest first, cumulative gaps),
/// free driving when there are none, brick-wall constraint for EABD profiles, a measured-gap
/// bound for anticipating profiles, and
/// clamped into [-b_emax, a_max(v)].
double compute_acceleration(const FollowerState& self, std::span<const LeaderView> leaders,
                            const DriverProfile& profile, const FollowingContext& ctx);

/// Acceleration that leaves exactly enough room to stop within `net_gap` after one step
/// (may be below -b_emax when the gap is already too short).
double braking_limit(double speed, double net_gap, double b_emax, double dt);

/// Largest acceleration <= candidate such that after one step the follower can still
/// stop before a leader that halts instantly: gap' >= v'^2 / (2 b_emax).
double enforce_absolute_braking(double accel_candidate, double speed, double net_gap,
                                double b_emax, double dt);

/// HV/CV draw uniformly on [0.95, 1.05] * v_base; automated fleets drive exactly v_base.
double sample_desired_speed(const DriverProfile& profile, double v_base, RngStream& rng);

double sample_accel_multiplier(const DriverProfile& profile, RngStream& rng);

}  // namespace sigcap
