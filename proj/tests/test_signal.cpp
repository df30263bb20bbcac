#include <doctest.h>

#include <random>

#include "sigcap/signal.hpp"

using namespace sigcap;

TEST_CASE("default plan layout") {
  const SignalPlan plan = default_plan();
  CHECK_NOTHROW(plan.validate());
  CHECK(plan.cycle_length == 124.0);
  REQUIRE(plan.phases.size() == 4);
  CHECK(plan.phase_for("EBL").green() == 15.0);
  CHECK(plan.phase_for("WBR").green() == 40.0);
  CHECK(plan.phase_for("SBL").green() == 15.0);
  CHECK(plan.phase_for("NBT").green() == 38.0);
  CHECK(plan.phase_for("EBT").green_start == 19.0);
  for (const Phase& p : plan.phases) {
    CHECK(p.amber == 3.0);
    CHECK(p.all_red == 1.0);
  }
  CHECK(plan.serves("NBR"));
  CHECK_FALSE(plan.serves("XXL"));
  CHECK_THROWS_AS(plan.phase_for("XXL"), ConfigError);
}

TEST_CASE("indication over one cycle") {
  const SignalPlan plan = default_plan();
  CHECK(indication(plan, "EBL", 0.0) == Indication::Green);
  CHECK(indication(plan, "EBL", 14.99) == Indication::Green);
  CHECK(indication(plan, "EBL", 15.0 + 1.5) == Indication::Amber);
  CHECK(indication(plan, "EBL", 18.5) == Indication::Red);
  CHECK(indication(plan, "EBT", 0.0) == Indication::Red);
  CHECK(indication(plan, "EBT", 19.0) == Indication::Green);
  CHECK(indication(plan, "EBT", 60.0) == Indication::Amber);
  CHECK(indication(plan, "NBT", 123.9) == Indication::Red);
  CHECK(indication(plan, "NBT", 120.5) == Indication::Amber);
  CHECK(indication(plan, "EBL", 124.0) == Indication::Green);
  CHECK(indication(plan, "EBL", -1.0) == Indication::Red);  // all-red of the last phase
}

TEST_CASE("offset shifts the whole plan") {
  SignalPlan plan = default_plan();
  plan.offset = 10.0;
  CHECK(indication(plan, "EBL", 5.0) == Indication::Red);
  CHECK(indication(plan, "EBL", 10.0) == Indication::Green);
  CHECK(indication(plan, "EBL", 24.99) == Indication::Green);
}

TEST_CASE("exactly one phase shows a non-red indication at any time") {
  const SignalPlan plan = default_plan();
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> t(0.0, 1000.0);
  for (int i = 0; i < 2000; ++i) {
    const double when = t(gen);
    int green = 0, amber = 0;
    for (const Phase& p : plan.phases) {
      const Indication ind = indication(plan, p, when);
      green += ind == Indication::Green;
      amber += ind == Indication::Amber;
    }
    CHECK(green + amber <= 1);
  }
}

TEST_CASE("indication and green windows are periodic in the cycle") {
  const SignalPlan plan = default_plan();
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> t(0.0, 500.0);
  std::uniform_int_distribution<int> k(1, 20);
  const char* groups[] = {"EBL", "EBT", "NBL", "SBR"};
  for (int i = 0; i < 4000; ++i) {
    const double when = t(gen);
    const double later = when + k(gen) * plan.cycle_length;
    const char* g = groups[i % 4];
    CHECK(indication(plan, g, when) == indication(plan, g, later));
    const GreenWindow a = next_green_window(plan, g, when);
    const GreenWindow b = next_green_window(plan, g, later);
    CHECK(a.starts_in == doctest::Approx(b.starts_in).epsilon(1e-9));
    CHECK(a.ends_in == doctest::Approx(b.ends_in).epsilon(1e-9));
  }
}

TEST_CASE("green windows") {
  const SignalPlan plan = default_plan();
  SUBCASE("inside green: window is open now") {
    const GreenWindow w = next_green_window(plan, "EBT", 47.0);
    CHECK(w.starts_in == 0.0);
    CHECK(w.ends_in == doctest::Approx(12.0));
    const GreenWindow f = following_green_window(plan, "EBT", 47.0);
    CHECK(f.starts_in == doctest::Approx(96.0));
    CHECK(f.ends_in == doctest::Approx(136.0));
  }
  SUBCASE("before green") {
    const GreenWindow w = next_green_window(plan, "EBT", 0.0);
    CHECK(w.starts_in == doctest::Approx(19.0));
    CHECK(w.ends_in == doctest::Approx(59.0));
    const GreenWindow f = following_green_window(plan, "EBT", 0.0);
    CHECK(f.starts_in == doctest::Approx(143.0));
    CHECK(f.ends_in == doctest::Approx(183.0));
  }
  SUBCASE("during amber the next window is a cycle away") {
    const GreenWindow w = next_green_window(plan, "EBL", 16.0);
    CHECK(w.starts_in == doctest::Approx(108.0));
    CHECK(w.ends_in == doctest::Approx(123.0));
  }
  SUBCASE("window starts lie in (0, C] and widths equal the green") {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> t(0.0, 1000.0);
    for (int i = 0; i < 2000; ++i) {
      const double when = t(gen);
      for (const Phase& p : plan.phases) {
        const GreenWindow w = next_green_window(plan, p, when);
        const GreenWindow f = following_green_window(plan, p, when);
        CHECK(w.starts_in >= 0.0);
        CHECK(w.starts_in <= plan.cycle_length);
        CHECK(w.ends_in > w.starts_in);
        if (w.starts_in > 0.0)
          CHECK(f.starts_in - w.starts_in == doctest::Approx(plan.cycle_length));
        else
          CHECK(f.starts_in == doctest::Approx(plan.cycle_length - (p.green() - w.ends_in)));
        CHECK(f.ends_in - f.starts_in == doctest::Approx(p.green()));
      }
    }
  }
}

TEST_CASE("advisory speed examples") {
  const GreenWindow window{20.0, 50.0};
  const GreenWindow following{144.0, 174.0};
  // 200 m to cover before a window opening in 20 s: 10 m/s.
  CHECK(advisory_speed(200.0, window, following, 15.6) == doctest::Approx(10.0));
  // 47 m in 20 s is 2.35 m/s, just above the 5 mph crawl floor.
  CHECK(advisory_speed(47.0, window, following, 15.6) == doctest::Approx(2.35));
  // 30 m in 20 s would be 1.5 m/s: the crawl floor applies.
  CHECK(advisory_speed(30.0, window, following, 15.6) == doctest::Approx(kCrawlFloor));
  // Green already open: drive the desired speed.
  CHECK(advisory_speed(100.0, {0.0, 30.0}, following, 15.6) == 15.6);
  // The current window cannot be reached: aim for the following one.
  CHECK(advisory_speed(500.0, {0.0, 5.0}, {40.0, 70.0}, 15.6) == doctest::Approx(12.5));
  // Neither window is reachable: keep the desired speed.
  CHECK(advisory_speed(5000.0, {0.0, 5.0}, {40.0, 70.0}, 15.6) == 15.6);
}

TEST_CASE("advised vehicles arrive while their window is green") {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> dist(10.0, 600.0), start(0.0, 120.0), len(5.0, 60.0),
      desired(10.0, 20.0);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const double d = dist(gen);
    const double s = start(gen);
    const GreenWindow w{s, s + len(gen)};
    const GreenWindow f{w.starts_in + 124.0, w.ends_in + 124.0};
    const double vd = desired(gen);
    const double v = advisory_speed(d, w, f, vd);
    CHECK(v > 0.0);
    CHECK(v <= vd);
    CHECK(v >= std::min(vd, kCrawlFloor));
    const GreenWindow* target = d / w.ends_in <= vd ? &w : d / f.ends_in <= vd ? &f : nullptr;
    if (target == nullptr) {
      CHECK(v == vd);
      continue;
    }
    const double arrival = d / v;
    CHECK(arrival <= target->ends_in + 1e-9);
    // Only the crawl floor may bring a vehicle in early.
    if (v > kCrawlFloor + 1e-12 && target->starts_in >= 0.1) {
      CHECK(arrival >= target->starts_in - 1e-9);
      ++checked;
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("stop/go decisions") {
  SUBCASE("green always proceeds, red stops unless a proceed is latched") {
    for (Fleet f : kAllFleets) {
      CHECK(stop_go_decision(f, AmberMode::ContinuousCheck, Indication::Green, 5.0, 15.0,
                             StopGo::Stop) == StopGo::Proceed);
      CHECK(stop_go_decision(f, AmberMode::ContinuousCheck, Indication::Red, 100.0, 15.0,
                             std::nullopt) == StopGo::Stop);
      CHECK(stop_go_decision(f, AmberMode::ContinuousCheck, Indication::Red, 2.0, 15.0,
                             StopGo::Proceed) == StopGo::Proceed);
    }
  }
  SUBCASE("human drivers proceed on amber when a comfortable stop is impossible") {
    // 15 m/s at 10 m needs 11.25 m/s^2.
    CHECK(stop_go_decision(Fleet::HV, AmberMode::ContinuousCheck, Indication::Amber, 10.0, 15.0,
                           std::nullopt) == StopGo::Proceed);
    // At 40 m it needs 2.81 m/s^2, under the 3.5 comfort threshold.
    CHECK(stop_go_decision(Fleet::CV, AmberMode::ContinuousCheck, Indication::Amber, 40.0, 15.0,
                           std::nullopt) == StopGo::Stop);
    // 15 m/s at 25 m needs 4.5: an automated vehicle stops, a human proceeds.
    CHECK(stop_go_decision(Fleet::HV, AmberMode::ContinuousCheck, Indication::Amber, 25.0, 15.0,
                           std::nullopt) == StopGo::Proceed);
    CHECK(stop_go_decision(Fleet::AV, AmberMode::ContinuousCheck, Indication::Amber, 25.0, 15.0,
                           std::nullopt) == StopGo::Stop);
  }
  SUBCASE("automated vehicles proceed only beyond b_emax") {
    CHECK(stop_go_decision(Fleet::AV, AmberMode::ContinuousCheck, Indication::Amber, 10.0, 15.0,
                           std::nullopt) == StopGo::Proceed);
  }
  SUBCASE("one-decision drivers keep their amber-onset choice") {
    CHECK(stop_go_decision(Fleet::CAV, AmberMode::OneDecision, Indication::Amber, 5.0, 15.0,
                           StopGo::Stop) == StopGo::Stop);
    CHECK(stop_go_decision(Fleet::CAV, AmberMode::OneDecision, Indication::Amber, 100.0, 15.0,
                           StopGo::Proceed) == StopGo::Proceed);
    // Continuous checkers re-evaluate.
    CHECK(stop_go_decision(Fleet::AV, AmberMode::ContinuousCheck, Indication::Amber, 100.0, 15.0,
                           StopGo::Proceed) == StopGo::Stop);
  }
  SUBCASE("a vehicle at the bar cannot stop") {
    CHECK(stop_go_decision(Fleet::AV, AmberMode::ContinuousCheck, Indication::Amber, 0.0, 3.0,
                           std::nullopt) == StopGo::Proceed);
  }
}

TEST_CASE("plan validation") {
  SUBCASE("a group served twice") {
    SignalPlan p = sequential_plan({{{"EBL"}, 10.0}, {{"EBL", "WBL"}, 10.0}});
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("more than one phase"), ConfigError);
  }
  SUBCASE("cycle mismatch") {
    SignalPlan p = sequential_plan({{{"EBL"}, 10.0}, {{"WBL"}, 10.0}});
    p.cycle_length = 30.0;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("plan.cycle"), ConfigError);
  }
  SUBCASE("gap between phases") {
    SignalPlan p = sequential_plan({{{"EBL"}, 10.0}, {{"WBL"}, 10.0}});
    p.phases[1].green_start += 1.0;
    p.phases[1].green_end += 1.0;
    p.cycle_length += 1.0;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("phase[2]"), ConfigError);
  }
  SUBCASE("empty green") {
    SignalPlan p = sequential_plan({{{"EBL"}, 0.0}, {{"WBL"}, 10.0}});
    CHECK_THROWS_AS(p.validate(), ConfigError);
  }
  SUBCASE("sequential plans tile the cycle") {
    SignalPlan p = sequential_plan({{{"EBL"}, 10.0, 4.0, 2.0}, {{"WBL"}, 20.0, 3.0, 1.0}}, 5.0);
    CHECK(p.cycle_length == 40.0);
    CHECK(p.offset == 5.0);
    CHECK_NOTHROW(p.validate());
  }
}
