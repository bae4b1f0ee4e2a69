#include <doctest.h>

#include <expreuse/eval.hpp>

#include "oracles.hpp"

#include <filesystem>
#include <fstream>

using namespace expreuse;
using namespace expreuse::eval;

TEST_CASE("battery threshold sets, smallest first") {
  const auto sets = battery_threshold_sets();
  REQUIRE(sets.size() == 4);
  CHECK(sets[0].t == battery::Tolerances{0.5, 0.5, 0.01});
  CHECK(sets[1].t == battery::Tolerances{1, 1, 0.02});
  CHECK(sets[2].t == battery::Tolerances{2, 2, 0.03});
  CHECK(sets[3].t == battery::Tolerances{5, 5, 0.05});
}

TEST_CASE("space sizes") {
  CHECK(rq1_desk_box().grid_size() == 500);
  CHECK(rq1_full_box().grid_size() == 490000);
  CHECK(rq2_desk_space().grid_size() == 10000);
  CHECK(rq2_full_space().grid_size() == 117600);
}

TEST_CASE("train sampling is deterministic and inside the box") {
  std::mt19937_64 a(5), b(5);
  for (int i = 0; i < 1000; ++i) {
    const auto x = sample_train(a);
    const auto y = sample_train(b);
    CHECK(x.params.m == y.params.m);
    CHECK(x.dist == y.dist);
    CHECK(x.params.theta >= -25);
    CHECK(x.params.theta <= 25);
    CHECK(x.params.v >= 10);
  }
}

TEST_CASE("rq1-train smoke run") {
  Rq1TrainPlan plan;
  plan.queries = 600;
  plan.window = 200;
  plan.shadow_fraction = 0.1;
  const auto rep = run_rq1_train(plan);
  CHECK(rep.failures.empty());
  CHECK(rep.rows.size() == 3);
  CHECK(rep.final_ratio < 1.0);
  CHECK(rep.shadow.mismatches == 0);
  const auto again = run_rq1_train(plan);
  CHECK(again.executed == rep.executed);

  plan.reuse = false;
  CHECK(run_rq1_train(plan).final_ratio == 1.0);
}

TEST_CASE("rq2-battery smoke run") {
  Rq2BatteryPlan plan;
  plan.queries = 4;
  plan.sub = 4;
  const auto rep = run_rq2_battery(plan);
  CHECK(rep.failures.empty());
  CHECK(rep.rows.size() == 4);
  CHECK(rep.rows[0].executed <= 64);
  const auto csv = to_csv(rep, plan);
  CHECK(csv.find("space_points=10000") != std::string::npos);
}

TEST_CASE("rq2-train setups") {
  Rq2TrainPlan plan;
  plan.queries = 200;
  plan.interval = 100;
  const auto rep = run_rq2_train(plan);
  CHECK(rep.failures.empty());
  REQUIRE(rep.last(StoreSetup::NoStore));
  CHECK(rep.last(StoreSetup::NoStore)->executed == 200);
  CHECK(rep.last(StoreSetup::MetricsNoReuse)->executed == 200);
  CHECK(rep.last(StoreSetup::MetricsReuse)->executed < 200);
  CHECK(rep.last(StoreSetup::MetricsReuse)->trace_bytes == 0);
  CHECK(rep.last(StoreSetup::TracesReuse)->trace_bytes < rep.last(StoreSetup::TracesNoReuse)->trace_bytes);
  for (auto s : plan.setups) CHECK(parse_store_setup(to_string(s)) == s);
}

TEST_CASE("outputs land on disk") {
  const auto dir = std::filesystem::temp_directory_path() / "expreuse-eval-out";
  std::filesystem::remove_all(dir);
  write_outputs(dir, "demo", "a,b\n1,2\n", true);
  CHECK(std::filesystem::exists(dir / "demo.csv"));
  std::ifstream gp(dir / "demo.gp");
  std::string text((std::istreambuf_iterator<char>(gp)), {});
  CHECK(text.find("demo.csv") != std::string::npos);
  std::filesystem::remove_all(dir);
}
