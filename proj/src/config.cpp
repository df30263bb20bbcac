#include "sigcap/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

namespace sigcap {

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + s + "'");
}

std::vector<double> to_doubles(const std::string& s, const std::string& key, std::size_t n) {
  const std::vector<std::string> w = words(s);
  if (n != 0 && w.size() != n)
    throw ConfigError(key + ": expected " + std::to_string(n) + " numbers, got " +
                      std::to_string(w.size()));
  std::vector<double> out;
  for (const std::string& x : w) out.push_back(to_double(x, key));
  return out;
}

long to_integer(const std::string& s, const std::string& key) {
  const double v = to_double(s, key);
  if (v != static_cast<double>(static_cast<long>(v)))
    throw ConfigError(key + ": expected an integer, got '" + s + "'");
  return static_cast<long>(v);
}

bool to_bool(const std::string& s, const std::string& key) {
  std::string v = s;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + s + "'");
}

struct Line {
  std::size_t number = 0;
  std::string section;  // e.g. "scenario", "approach EB"
  std::string key;
  std::string value;
};

/// Calls `handle` for every key/value line with errors prefixed by "source:line: ".
void for_each_entry(std::istream& in, const std::string& source,
                    const std::function<void(const Line&)>& handle,
                    const std::function<void(const std::string&, std::size_t)>& on_section = {}) {
  std::string raw;
  std::string section;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string where = source + ":" + std::to_string(number) + ": ";
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        if (on_section) on_section(section, number);
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("expected 'key = value'");
      Line l{number, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
      if (l.key.empty()) throw ConfigError("empty key");
      handle(l);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

std::vector<LaneSpec> parse_lanes(const std::string& value, const std::string& key) {
  std::vector<LaneSpec> lanes;
  for (const std::string& token : words(value)) {
    LaneSpec lane;
    for (char c : token) {
      const Movement m = parse_movement_code(static_cast<char>(std::toupper(c)));
      if (lane.permits(m)) throw ConfigError(key + ": movement repeated in lane '" + token + "'");
      lane.movements.push_back(m);
    }
    lanes.push_back(std::move(lane));
  }
  if (lanes.empty()) throw ConfigError(key + ": at least one lane is required");
  return lanes;
}

PhaseSpec parse_phase(const std::string& value) {
  const std::vector<std::string> w = words(value);
  if (w.size() != 4)
    throw ConfigError("plan.phase: expected 'GROUPS green amber all_red', e.g. 'EBL,WBL 15 3 1'");
  PhaseSpec spec;
  std::istringstream groups(w[0]);
  for (std::string g; std::getline(groups, g, ',');) {
    g = trim(g);
    if (g.empty()) continue;
    if (g.size() != 3) throw ConfigError("plan.phase: bad movement group '" + g + "'");
    parse_approach(g.substr(0, 2));
    parse_movement_code(g[2]);
    spec.movement_groups.push_back(g);
  }
  if (spec.movement_groups.empty()) throw ConfigError("plan.phase: no movement groups");
  spec.green = to_double(w[1], "plan.phase green");
  spec.amber = to_double(w[2], "plan.phase amber");
  spec.all_red = to_double(w[3], "plan.phase all_red");
  return spec;
}

std::vector<double> parse_grid(const std::string& value, const std::string& key) {
  if (trim(value).empty()) throw ConfigError(key + ": grid is empty");
  if (value.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::istringstream in(value);
    for (std::string p; std::getline(in, p, ':');) parts.push_back(trim(p));
    if (parts.size() != 3) throw ConfigError(key + ": ranges are written lo:hi:step");
    const double lo = to_double(parts[0], key);
    const double hi = to_double(parts[1], key);
    const double step = to_double(parts[2], key);
    if (!(step > 0.0) || hi < lo) throw ConfigError(key + ": need step > 0 and hi >= lo");
    std::vector<double> out;
    const auto n = static_cast<long>((hi - lo) / step + 1e-9);
    for (long i = 0; i <= n; ++i) out.push_back(lo + step * static_cast<double>(i));
    return out;
  }
  return to_doubles(value, key, 0);
}

}  // namespace

void set_profile_field(std::array<DriverProfile, 4>& profiles, const std::string& key,
                       const std::string& value) {
  const auto dot = key.find('.');
  if (dot == std::string::npos)
    throw ConfigError("profile key '" + key + "' must look like FLEET.field");
  DriverProfile& p = profiles[index_of(parse_fleet(key.substr(0, dot)))];
  const std::string field = key.substr(dot + 1);
  std::map<std::string, double*> numbers{
      {"cc0", &p.cc0},
      {"cc1", &p.cc1},
      {"cc2", &p.cc2},
      {"cc3", &p.cc3},
      {"cc4", &p.cc4},
      {"cc5", &p.cc5},
      {"cc6", &p.cc6},
      {"cc7", &p.cc7},
      {"cc8", &p.cc8},
      {"cc9", &p.cc9},
      {"reduced_safety_factor", &p.reduced_safety_factor},
      {"reduced_safety_upstream", &p.reduced_safety_upstream},
      {"reduced_safety_downstream", &p.reduced_safety_downstream},
      {"anticipation_horizon", &p.anticipation_horizon},
  };
  if (auto it = numbers.find(field); it != numbers.end()) {
    *it->second = to_double(value, key);
  } else if (field == "amber_mode") {
    if (value == "continuous_check") p.amber_mode = AmberMode::ContinuousCheck;
    else if (value == "one_decision") p.amber_mode = AmberMode::OneDecision;
    else throw ConfigError(key + ": expected continuous_check or one_decision");
  } else if (field == "red_amber_go") {
    p.red_amber_go = to_bool(value, key);
  } else if (field == "eabd_enabled") {
    p.eabd_enabled = to_bool(value, key);
  } else if (field == "implicit_stochasticity") {
    p.implicit_stochasticity = to_bool(value, key);
  } else if (field == "interaction_vehicle_count") {
    p.interaction_vehicle_count = static_cast<int>(to_integer(value, key));
  } else if (field == "desired_accel_multiplier_range") {
    const std::vector<double> r = to_doubles(value, key, 2);
    p.desired_accel_multiplier_range = {r[0], r[1]};
  } else {
    throw ConfigError("unknown profile field '" + field + "'");
  }
}

void apply_profile_overrides(std::array<DriverProfile, 4>& profiles, std::istream& in,
                             const std::string& source) {
  for_each_entry(in, source, [&](const Line& l) {
    if (!l.section.empty() && l.section != "profiles")
      throw ConfigError("unexpected section [" + l.section + "] in a profile file");
    set_profile_field(profiles, l.key, l.value);
  });
  for (const DriverProfile& p : profiles) {
    try {
      p.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(source + ": " + std::string(to_string(p.fleet)) + " " + e.what());
    }
  }
}

void load_profile_overrides(std::array<DriverProfile, 4>& profiles, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open profile file");
  apply_profile_overrides(profiles, in, path);
}

Scenario parse_scenario(std::istream& in, const std::string& source) {
  Scenario s = default_testbed();
  std::vector<PhaseSpec> phases;
  double offset = 0.0;
  std::optional<double> cycle;
  std::map<std::string, std::size_t> key_lines;  // "scenario.shares" -> line

  auto on_section = [&](const std::string& section, std::size_t) {
    const std::vector<std::string> w = words(section);
    const bool known = (w.size() == 1 && (w[0] == "scenario" || w[0] == "plan" ||
                                          w[0] == "profiles")) ||
                       (w.size() == 2 && w[0] == "approach");
    if (!known) throw ConfigError("unknown section [" + section + "]");
    if (w.size() == 2) parse_approach(w[1]);
  };

  for_each_entry(
      in, source,
      [&](const Line& l) {
        const std::vector<std::string> sec = words(l.section);
        if (sec.empty()) throw ConfigError("key '" + l.key + "' outside any section");
        if (sec[0] == "scenario") {
          const std::string key = "scenario." + l.key;
          key_lines[key] = l.number;
          if (l.key == "id") s.scenario_id = static_cast<int>(to_integer(l.value, key));
          else if (l.key == "seed") s.seed = static_cast<std::uint64_t>(to_integer(l.value, key));
          else if (l.key == "shares") {
            const std::vector<double> v = to_doubles(l.value, key, 4);
            std::copy(v.begin(), v.end(), s.shares.begin());
          } else if (l.key == "duration") s.duration = to_double(l.value, key);
          else if (l.key == "warmup") s.warmup = to_double(l.value, key);
          else if (l.key == "dt") s.dt = to_double(l.value, key);
          else if (l.key == "v_base") s.v_base = to_double(l.value, key);
          else if (l.key == "link_length") s.link_length = to_double(l.value, key);
          else if (l.key == "through_exit") s.through_exit = to_double(l.value, key);
          else if (l.key == "turn_exit") s.turn_exit = to_double(l.value, key);
          else if (l.key == "turn_speed_cap") s.turn_speed_cap = to_double(l.value, key);
          else if (l.key == "turn_cap_distance") s.turn_cap_distance = to_double(l.value, key);
          else throw ConfigError("unknown key '" + l.key + "' in [scenario]");
        } else if (sec[0] == "approach") {
          const Approach a = parse_approach(sec[1]);
          ApproachSpec& ap = s.approaches[index_of(a)];
          const std::string key = "approach " + sec[1] + "." + l.key;
          key_lines[key] = l.number;
          if (l.key == "demand") ap.demand_vph = to_double(l.value, key);
          else if (l.key == "turning") {
            const std::vector<double> v = to_doubles(l.value, key, 3);
            std::copy(v.begin(), v.end(), ap.turning_pct.begin());
          } else if (l.key == "lanes") ap.lanes = parse_lanes(l.value, key);
          else throw ConfigError("unknown key '" + l.key + "' in [" + l.section + "]");
        } else if (sec[0] == "plan") {
          key_lines["plan." + l.key] = l.number;
          if (l.key == "phase") phases.push_back(parse_phase(l.value));
          else if (l.key == "offset") offset = to_double(l.value, "plan.offset");
          else if (l.key == "cycle") cycle = to_double(l.value, "plan.cycle");
          else throw ConfigError("unknown key '" + l.key + "' in [plan]");
        } else if (sec[0] == "profiles") {
          set_profile_field(s.profiles, l.key, l.value);
        }
      },
      on_section);

  if (!phases.empty()) s.plan = sequential_plan(phases, offset);
  else s.plan.offset = offset;
  if (cycle) {
    if (std::abs(*cycle - s.plan.cycle_length) > 1e-9)
      throw ConfigError(source + ":" + std::to_string(key_lines["plan.cycle"]) +
                        ": plan.cycle: phases sum to " + format_number(s.plan.cycle_length) +
                        " s but cycle is " + format_number(*cycle) + " s");
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    std::size_t line = 0;
    std::size_t best = 0;
    for (const auto& [key, number] : key_lines)
      if (msg.rfind(key, 0) == 0 && key.size() > best) {
        best = key.size();
        line = number;
      }
    if (line == 0) {
      for (const auto& [key, number] : key_lines) {
        const auto dot = key.find('.');
        if (dot != std::string::npos && msg.rfind(key.substr(0, dot + 1), 0) == 0 &&
            (line == 0 || number < line))
          line = number;
      }
    }
    throw ConfigError(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + msg);
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open scenario file");
  return parse_scenario(in, path);
}

CalibrationConfig parse_calibration(std::istream& in, const std::string& source) {
  CalibrationConfig c;
  c.options.cc0_grid = default_cc0_grid();
  c.options.cc1_grid = default_cc1_grid();
  for_each_entry(in, source, [&](const Line& l) {
    if (l.section != "calibration")
      throw ConfigError("key '" + l.key + "' outside the [calibration] section");
    const std::string key = "calibration." + l.key;
    if (l.key == "target") c.options.target_h = to_double(l.value, key);
    else if (l.key == "cc0") c.options.cc0_grid = parse_grid(l.value, key);
    else if (l.key == "cc1") c.options.cc1_grid = parse_grid(l.value, key);
    else if (l.key == "replications") {
      c.options.replications = static_cast<int>(to_integer(l.value, key));
      if (c.options.replications < 1) throw ConfigError(key + ": must be >= 1");
    } else if (l.key == "seed") c.options.seed_base = static_cast<std::uint64_t>(to_integer(l.value, key));
    else if (l.key == "scenario") c.scenario_path = l.value;
    else throw ConfigError("unknown key '" + l.key + "' in [calibration]");
  });
  if (!(c.options.target_h > 0.0)) throw ConfigError(source + ": calibration.target: must be > 0");
  return c;
}

CalibrationConfig load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open calibration file");
  return parse_calibration(in, path);
}

}  // namespace sigcap
