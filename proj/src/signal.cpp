#include "sigcap/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace sigcap {

namespace {

constexpr double kTilingTolerance = 1e-9;
constexpr double kWindowEpsilon = 0.1;  // s, guards v_max at the window start

double cycle_time(const SignalPlan& plan, double t) {
  double tc = std::fmod(t - plan.offset, plan.cycle_length);
  if (tc < 0.0) tc += plan.cycle_length;
  return tc;
}

}  // namespace

std::string_view to_string(Indication i) {
  switch (i) {
    case Indication::Green: return "Green";
    case Indication::Amber: return "Amber";
    case Indication::Red: return "Red";
  }
  return "?";
}

std::string movement_group_id(Approach a, Movement m) {
  std::string id(to_string(a));
  id.push_back(movement_code(m));
  return id;
}

void SignalPlan::validate() const {
  if (!(cycle_length > 0.0)) throw ConfigError("plan.cycle: must be > 0");
  if (phases.empty()) throw ConfigError("plan: needs at least one phase");
  std::set<std::string> seen;
  double cursor = 0.0;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const Phase& p = phases[i];
    const std::string where = "plan.phase[" + std::to_string(i + 1) + "]";
    if (p.movement_groups.empty()) throw ConfigError(where + ": no movement groups");
    if (!(p.green() > 0.0)) throw ConfigError(where + ": green must be > 0");
    if (p.amber < 0.0 || p.all_red < 0.0)
      throw ConfigError(where + ": amber and all-red must be >= 0");
    if (std::abs(p.green_start - cursor) > kTilingTolerance)
      throw ConfigError(where + ": does not start where the previous phase ends");
    cursor = p.end();
    for (const auto& g : p.movement_groups)
      if (!seen.insert(g).second)
        throw ConfigError(where + ": movement group " + g + " is served by more than one phase");
  }
  if (std::abs(cursor - cycle_length) > kTilingTolerance)
    throw ConfigError("plan.cycle: phases sum to " + std::to_string(cursor) +
                      " s but cycle is " + std::to_string(cycle_length) + " s");
}

const Phase& SignalPlan::phase_for(std::string_view group) const {
  for (const Phase& p : phases)
    if (std::find(p.movement_groups.begin(), p.movement_groups.end(), group) !=
        p.movement_groups.end())
      return p;
  throw ConfigError("unknown movement group '" + std::string(group) + "'");
}

bool SignalPlan::serves(std::string_view group) const {
  for (const Phase& p : phases)
    if (std::find(p.movement_groups.begin(), p.movement_groups.end(), group) !=
        p.movement_groups.end())
      return true;
  return false;
}

SignalPlan sequential_plan(const std::vector<PhaseSpec>& specs, double offset) {
  SignalPlan plan;
  plan.offset = offset;
  double cursor = 0.0;
  for (const PhaseSpec& s : specs) {
    Phase p;
    p.movement_groups = s.movement_groups;
    p.green_start = cursor;
    p.green_end = cursor + s.green;
    p.amber = s.amber;
    p.all_red = s.all_red;
    cursor = p.end();
    plan.phases.push_back(std::move(p));
  }
  plan.cycle_length = cursor;
  return plan;
}

SignalPlan default_plan() {
  return sequential_plan({
      {{"EBL", "WBL"}, 15.0, 3.0, 1.0},
      {{"EBT", "EBR", "WBT", "WBR"}, 40.0, 3.0, 1.0},
      {{"NBL", "SBL"}, 15.0, 3.0, 1.0},
      {{"NBT", "NBR", "SBT", "SBR"}, 38.0, 3.0, 1.0},
  });
}

Indication indication(const SignalPlan& plan, const Phase& p, double t) {
  const double tc = cycle_time(plan, t);
  if (tc >= p.green_start && tc < p.green_end) return Indication::Green;
  if (tc >= p.green_end && tc < p.green_end + p.amber) return Indication::Amber;
  return Indication::Red;
}

Indication indication(const SignalPlan& plan, std::string_view group, double t) {
  return indication(plan, plan.phase_for(group), t);
}

GreenWindow next_green_window(const SignalPlan& plan, const Phase& p, double t) {
  const double tc = cycle_time(plan, t);
  if (tc >= p.green_start && tc < p.green_end) return {0.0, p.green_end - tc};
  double starts_in = p.green_start - tc;
  if (starts_in <= 0.0) starts_in += plan.cycle_length;
  return {starts_in, starts_in + p.green()};
}

GreenWindow next_green_window(const SignalPlan& plan, std::string_view group, double t) {
  return next_green_window(plan, plan.phase_for(group), t);
}

GreenWindow following_green_window(const SignalPlan& plan, const Phase& p, double t) {
  const GreenWindow now = next_green_window(plan, p, t);
  if (now.starts_in > 0.0)
    return {now.starts_in + plan.cycle_length, now.ends_in + plan.cycle_length};
  // Green now: the next window opens one cycle after the current green started.
  const double started_ago = p.green() - now.ends_in;
  const double start = plan.cycle_length - started_ago;
  return {start, start + p.green()};
}

GreenWindow following_green_window(const SignalPlan& plan, std::string_view group, double t) {
  return following_green_window(plan, plan.phase_for(group), t);
}

double advisory_speed(double dist_to_bar, const GreenWindow& window, const GreenWindow& following,
                      double v_desired, double crawl_floor) {
  auto advise = [&](const GreenWindow& w) -> std::optional<double> {
    const double v_min = dist_to_bar / w.ends_in;
    if (v_min > v_desired) return std::nullopt;
    if (w.starts_in <= 0.0) return v_desired;
    const double v_max = dist_to_bar / std::max(w.starts_in, kWindowEpsilon);
    return std::min(v_desired, std::max(v_max, crawl_floor));
  };
  if (auto v = advise(window)) return *v;
  if (auto v = advise(following)) return *v;
  return v_desired;
}

double advisory_speed(const SignalPlan& plan, std::string_view group, double t,
                      double dist_to_bar, double v_desired, double crawl_floor) {
  return advisory_speed(dist_to_bar, next_green_window(plan, group, t),
                        following_green_window(plan, group, t), v_desired, crawl_floor);
}

StopGo stop_go_decision(Fleet fleet, AmberMode mode, Indication ind, double dist_to_bar,
                        double speed, std::optional<StopGo> latch) {
  switch (ind) {
    case Indication::Green:
      return StopGo::Proceed;
    case Indication::Red:
      return latch == StopGo::Proceed ? StopGo::Proceed : StopGo::Stop;
    case Indication::Amber:
      break;
  }
  if (mode == AmberMode::OneDecision && latch.has_value()) return *latch;
  const double d_req = dist_to_bar > 0.0 ? speed * speed / (2.0 * dist_to_bar)
                      : speed > 0.0     ? std::numeric_limits<double>::infinity()
                                        : 0.0;
  if (fleet == Fleet::HV || fleet == Fleet::CV)
    return d_req > kComfortDecel ? StopGo::Proceed : StopGo::Stop;
  return d_req <= kEmergencyDecel ? StopGo::Stop : StopGo::Proceed;
}

}  // namespace sigcap
