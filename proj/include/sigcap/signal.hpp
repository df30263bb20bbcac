#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sigcap/core.hpp"
#include "sigcap/driver_model.hpp"

namespace sigcap {

enum class Indication : std::uint8_t { Green, Amber, Red };
std::string_view to_string(Indication i);

/// Movement groups are named approach + movement code, e.g. "EBL", "NBT", "SBR".
std::string movement_group_id(Approach a, Movement m);

struct Phase {
  std::vector<std::string> movement_groups;
  double green_start = 0.0;  // s into the cycle
  double green_end = 0.0;
  double amber = 3.0;
  double all_red = 1.0;

  double green() const { return green_end - green_start; }
  double end() const { return green_end + amber + all_red; }
};

/// Fixed-time plan. Phases run back to back: green, amber, all-red.
struct SignalPlan {
  double cycle_length = 0.0;
  double offset = 0.0;
  std::vector<Phase> phases;

  /// Throws ConfigError unless the phases tile [0, cycle) in order and every movement
  /// group is served by exactly one phase.
  void validate() const;
  /// Throws ConfigError for unknown groups.
  const Phase& phase_for(std::string_view group) const;
  bool serves(std::string_view group) const;
};

struct PhaseSpec {
  std::vector<std::string> movement_groups;
  double green = 0.0;
  double amber = 3.0;
  double all_red = 1.0;
};

/// Lays phases out back to back starting at 0; the cycle is their total duration.
SignalPlan sequential_plan(const std::vector<PhaseSpec>& specs, double offset = 0.0);

/// EB/WB lefts 15 s, EB/WB through+right 40 s, NB/SB lefts 15 s, NB/SB through+right 38 s,
/// each followed by 3 s amber and 1 s all-red (124 s cycle).
SignalPlan default_plan();

Indication indication(const SignalPlan& plan, std::string_view group, double t);
Indication indication(const SignalPlan& plan, const Phase& phase, double t);

struct GreenWindow {
  double starts_in = 0.0;
  double ends_in = 0.0;
};

GreenWindow next_green_window(const SignalPlan& plan, std::string_view group, double t);
GreenWindow next_green_window(const SignalPlan& plan, const Phase& phase, double t);

/// The green window after `next_green_window(plan, group, t)`.
GreenWindow following_green_window(const SignalPlan& plan, std::string_view group, double t);
GreenWindow following_green_window(const SignalPlan& plan, const Phase& phase, double t);

/// Speed that brings a vehicle to the bar inside `window`, never below the crawl floor.
/// When `window` is out of reach at the desired speed the following window is tried;
/// failing that the vehicle keeps its desired speed and will stop at the bar.
double advisory_speed(double dist_to_bar, const GreenWindow& window, const GreenWindow& following,
                      double v_desired, double crawl_floor = kCrawlFloor);

double advisory_speed(const SignalPlan& plan, std::string_view group, double t,
                      double dist_to_bar, double v_desired, double crawl_floor = kCrawlFloor);

enum class StopGo : std::uint8_t { Proceed, Stop };

/// Green proceeds, red stops (unless an amber Proceed is latched), amber applies the
/// fleet's dilemma-zone rule: HV/CV proceed iff they cannot stop comfortably, AV/CAV stop
/// whenever physically able. One-decision drivers keep their amber-onset choice.
StopGo stop_go_decision(Fleet fleet, AmberMode mode, Indication ind, double dist_to_bar,
                        double speed, std::optional<StopGo> latch);

}  // namespace sigcap
