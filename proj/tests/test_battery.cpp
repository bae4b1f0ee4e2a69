#include <doctest.h>

#include <expreuse/battery.hpp>
#include <expreuse/error.hpp>
#include <expreuse/registry.hpp>
#include <expreuse/reuse.hpp>

#include "oracles.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace expreuse;
using battery::Layout;

namespace {

battery::BatteryMetrics run(const Layout& l) {
  return battery::metrics_of(battery::simulate_battery(l, battery::DriveCycle::standard()));
}

}  // namespace

TEST_CASE("standard drive cycle") {
  const auto c = battery::DriveCycle::standard();
  CHECK(c.power.size() == 1800);
  CHECK(c.duration() == 1800.0);
  double energy = 0;
  for (double p : c.power) {
    CHECK(p > 0);
    energy += p * c.dt;
  }
  CHECK(energy == doctest::Approx(9e7));
}

TEST_CASE("zero-loss layout") {
  const auto m = run({300, 800, 0});
  CHECK(m.tbl == 0.0);
  CHECK(m.soc == doctest::Approx(75.0));
}

TEST_CASE("weak layout is unstable") {
  CHECK(run({200, 400, 0.5}).soc < battery::kUnstableSoC);
}

TEST_CASE("metrics agree with the oracle") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> V(200, 600), T(400, 1000), R(0.02, 0.5);
  for (int i = 0; i < 200; ++i) {
    const Layout l{V(rng), T(rng), R(rng)};
    const auto got = battery::simulate_battery(l, battery::DriveCycle::standard());
    const auto want = oracle::battery(l.voltage, l.max_torque, l.internal_res);
    const auto* soc = got.trace("SoC");
    REQUIRE(soc);
    double mn = 100;
    for (double s : soc->value) mn = std::min(mn, s);
    CHECK(mn == doctest::Approx(want.min_soc).epsilon(1e-9));
    CHECK(soc->value.back() == doctest::Approx(want.final_soc).epsilon(1e-9));
    CHECK(battery::metrics_of(got).tbl == doctest::Approx(want.tbl).epsilon(1e-9));
    CHECK(soc->value.size() == 1801);
  }
}

TEST_CASE("doubling voltage strictly lowers losses") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> V(200, 300), T(400, 1000), R(0.02, 0.5);
  for (int i = 0; i < 200; ++i) {
    const Layout l{V(rng), T(rng), R(rng)};
    CHECK(run({2 * l.voltage, l.max_torque, l.internal_res}).tbl < run(l).tbl);
  }
}

TEST_CASE("monotonicity on ordered pairs") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> V(200, 600), T(400, 1000), R(0.02, 0.5);
  for (int i = 0; i < 2000; ++i) {
    Layout a{V(rng), T(rng), R(rng)};
    Layout b{V(rng), T(rng), R(rng)};
    if (b.voltage < a.voltage) std::swap(a.voltage, b.voltage);
    if (b.max_torque < a.max_torque) std::swap(a.max_torque, b.max_torque);
    if (b.internal_res > a.internal_res) std::swap(a.internal_res, b.internal_res);
    // b is at least as good as a on every axis.
    const auto ma = oracle::battery(a.voltage, a.max_torque, a.internal_res);
    const auto mb = oracle::battery(b.voltage, b.max_torque, b.internal_res);
    CHECK(mb.min_soc >= ma.min_soc);
    CHECK(mb.tbl <= ma.tbl);
    CHECK(run(b).soc >= run(a).soc);
  }
}

TEST_CASE("invalid layouts") {
  const auto c = battery::DriveCycle::standard();
  CHECK_THROWS_AS(battery::simulate_battery({0, 800, 0.1}, c), Error);
  CHECK_THROWS_AS(battery::simulate_battery({300, 0, 0.1}, c), Error);
  CHECK_THROWS_AS(battery::simulate_battery({300, 800, -0.1}, c), Error);
}

TEST_CASE("compute restricts to the poi and rejects empty input") {
  const auto res = battery::simulate_battery({300, 800, 0.1}, battery::DriveCycle::standard());
  const auto soc = battery::battery_compute(battery::layout_request({300, 800, 0.1}, {"SoC"}), std::vector{res});
  CHECK(soc.binding.size() == 1);
  CHECK(soc.binding.count("SoC") == 1);
  const auto both = battery::battery_compute(battery::layout_request({300, 800, 0.1}, {"SoC", "TBL"}), std::vector{res});
  CHECK(both.binding.size() == 2);
  CHECK_THROWS_AS(battery::battery_compute(battery::layout_request({300, 800, 0.1}, {"SoC"}), {}), Error);
  ExperimentResult no_signal;
  CHECK_THROWS_AS(battery::battery_compute(battery::layout_request({300, 800, 0.1}, {"SoC"}), std::vector{no_signal}),
                  Error);
}

TEST_CASE("instability rule") {
  // Stored (300, 900, 0.1) with SoC 45 and fresh (250, 800, 0.2): fresh is weaker on every axis.
  CHECK(battery::battery_justify_unstable({250, 800, 0.2}, {300, 900, 0.1}, 45));
  CHECK_FALSE(battery::battery_justify_unstable({250, 800, 0.2}, {300, 900, 0.1}, 55));
  CHECK_FALSE(battery::battery_justify_unstable({350, 800, 0.2}, {300, 900, 0.1}, 45));
  Layout other_cycle{250, 800, 0.2, "other"};
  CHECK_FALSE(battery::battery_justify_unstable(other_cycle, {300, 900, 0.1}, 45));
}

TEST_CASE("instability rule never skips a stable layout") {
  std::mt19937_64 rng(13);
  // Stored layouts from the weak corner, where most are unstable.
  std::uniform_real_distribution<double> V(200, 300), T(400, 600), R(0.2, 0.5);
  std::size_t fired = 0;
  for (int i = 0; i < 20000 && fired < 1000; ++i) {
    const Layout s{V(rng), T(rng), R(rng)};
    const auto ms = oracle::battery(s.voltage, s.max_torque, s.internal_res);
    if (ms.min_soc >= 50) continue;
    const Layout f{s.voltage - 50 * (rng() % 100) / 100.0, s.max_torque - 100 * (rng() % 100) / 100.0,
                   s.internal_res + 0.1 * (rng() % 100) / 100.0};
    if (f.voltage <= 0 || f.max_torque <= 0) continue;
    if (!battery::battery_justify_unstable(f, s, ms.min_soc)) continue;
    ++fired;
    CHECK(oracle::battery(f.voltage, f.max_torque, f.internal_res).min_soc < 50);
  }
  CHECK(fired > 100);
}

TEST_CASE("box query aggregation is the non-dominated set of stable points") {
  LanguageRegistry r;
  battery::register_battery(r);
  BoxConstraint box{{{"Voltage", 200, 400, 50, true}, {"MaxTorque", 400, 1000, 150, true},
                     {"InternalRes", 0.02, 0.5, 0.12, true}}};
  const auto a = std::get<ParetoFront>(answer_without_reuse(r, battery::box_query(box)));
  std::vector<oracle::Point> pts;
  std::vector<std::array<double, 3>> layouts;
  for (double v : box.axes[0].values())
    for (double t : box.axes[1].values())
      for (double x : box.axes[2].values()) {
        const auto m = oracle::battery(v, t, x);
        if (m.min_soc < 50) continue;
        pts.push_back({m.tbl, m.min_soc});
        layouts.push_back({v, t, x});
      }
  const auto front = oracle::nondominated(pts);
  REQUIRE(a.points.size() == front.size());
  for (std::size_t i = 0; i < front.size(); ++i) {
    bool found = false;
    for (const auto& p : a.points)
      found = found || (p.at("Voltage").number() == layouts[front[i]][0] &&
                        p.at("MaxTorque").number() == layouts[front[i]][1] &&
                        p.at("InternalRes").number() == layouts[front[i]][2]);
    CHECK(found);
  }
}

TEST_CASE("a box of only unstable points reports an explained empty front") {
  LanguageRegistry r;
  battery::register_battery(r);
  BoxConstraint box{{{"Voltage", 200, 201, 1, true}, {"MaxTorque", 400, 401, 1, true},
                     {"InternalRes", 0.5, 0.5, 1, true}}};
  const auto a = std::get<ParetoFront>(answer_without_reuse(r, battery::box_query(box)));
  CHECK(a.points.empty());
  CHECK(a.all_skipped);
}

TEST_CASE("box query needs all three axes") {
  BoxConstraint two{{{"Voltage", 200, 210, 1, false}, {"MaxTorque", 400, 410, 1, false}}};
  CHECK_THROWS_AS(battery::box_query(two), Error);
}

TEST_CASE("drive cycle files") {
  const auto dir = std::filesystem::temp_directory_path() / "expreuse-cycle-test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "ok.txt");
    f << "# t P\n0 1000\n2 2000\n4 3000\n";
  }
  const auto c = battery::DriveCycle::load("ok", dir / "ok.txt");
  CHECK(c.dt == 2.0);
  CHECK(c.power == std::vector<double>{1000, 2000, 3000});
  {
    std::ofstream f(dir / "uneven.txt");
    f << "0 1000\n1 2000\n3 3000\n";
  }
  CHECK_THROWS_AS(battery::DriveCycle::load("u", dir / "uneven.txt"), Error);
  CHECK_THROWS_AS(battery::DriveCycle::load("m", dir / "missing.txt"), Error);

  battery::CycleLibrary lib;
  CHECK(lib.contains(battery::kStandardCycle));
  lib.add(c);
  CHECK(lib.get("ok").power.size() == 3);
  CHECK_THROWS_AS((void)lib.get("nope"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("tolerance distance on requests") {
  LanguageRegistry r;
  battery::BatteryConfig cfg;
  cfg.tolerances = {5, 5, 0.05};
  battery::register_battery(r, cfg);
  const auto* s = r.request_scheme(battery::kRequestLanguage);
  REQUIRE(s);
  const auto a = s->featurize(battery::layout_request({300, 800, 0.1}, {"SoC", "TBL"}));
  const auto near = s->featurize(battery::layout_request({304, 796, 0.14}, {"SoC", "TBL"}));
  const auto far = s->featurize(battery::layout_request({306, 800, 0.1}, {"SoC", "TBL"}));
  const auto other_poi = s->featurize(battery::layout_request({300, 800, 0.1}, {"SoC"}));
  CHECK(s->get_distance(a, near) < s->t_get);
  CHECK_FALSE(s->get_distance(a, far) < s->t_get);
  CHECK_FALSE(s->get_distance(a, other_poi) < s->t_get);
}
