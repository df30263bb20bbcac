#pragma once

#include <array>
#include <iosfwd>
#include <string>

#include "sigcap/analysis.hpp"
#include "sigcap/driver_model.hpp"
#include "sigcap/engine.hpp"

namespace sigcap {

// Config files are line-oriented: `[section]` headers, `key = value` pairs, `#` comments.
// Errors are ConfigError with a "source:line: " prefix.

/// Scenario file. Starts from default_testbed(); sections override what they name.
///   [scenario]   id, seed, shares (hv cv av cav), duration, warmup, dt, v_base,
///                link_length, through_exit, turn_exit, turn_speed_cap, turn_cap_distance
///   [approach EB]  demand, turning (left through right, percent), lanes (e.g. "L TR TR")
///   [plan]       offset, cycle (checked against the phases), and one or more
///                `phase = EBL,WBL 15 3 1` lines (groups, green, amber, all-red)
///   [profiles]   same keys as a profile override file
Scenario parse_scenario(std::istream& in, const std::string& source = "<scenario>");
Scenario load_scenario(const std::string& path);

/// Profile override file: `HV.cc0 = 1.2`, `CAV.anticipation_horizon = 1.5`, ...
void apply_profile_overrides(std::array<DriverProfile, 4>& profiles, std::istream& in,
                             const std::string& source = "<profiles>");
void load_profile_overrides(std::array<DriverProfile, 4>& profiles, const std::string& path);
/// Sets one `FLEET.field` key; throws ConfigError without a line prefix.
void set_profile_field(std::array<DriverProfile, 4>& profiles, const std::string& key,
                       const std::string& value);

struct CalibrationConfig {
  CalibrationOptions options;
  std::string scenario_path;  // empty: default testbed
};

///   [calibration]  target, cc0, cc1 (lists "1.0 1.25" or ranges "lo:hi:step"),
///                  replications, seed, scenario
CalibrationConfig parse_calibration(std::istream& in, const std::string& source = "<calibration>");
CalibrationConfig load_calibration(const std::string& path);

}  // namespace sigcap
