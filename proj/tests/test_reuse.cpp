#include <doctest.h>

#include <expreuse/battery.hpp>
#include <expreuse/events.hpp>
#include <expreuse/registry.hpp>
#include <expreuse/reuse.hpp>
#include <expreuse/store.hpp>
#include <expreuse/train.hpp>

#include "oracles.hpp"

#include <random>

using namespace expreuse;
using train::TrainParams;

namespace {

struct Bench {
  LanguageRegistry registry;
  ExperimentStore store;
  EventLog events;
  ReuseEngine engine;
  explicit Bench(const train::TrainConfig& tc = {}, const battery::BatteryConfig& bc = {})
      : store((init(registry, tc, bc), registry)), engine(registry, &store, &events) {}
  static int init(LanguageRegistry& r, const train::TrainConfig& tc, const battery::BatteryConfig& bc) {
    train::register_train(r, tc);
    battery::register_battery(r, bc);
    return 0;
  }
};

train::TrainConfig plain_train() {
  train::TrainConfig tc;
  tc.user_tolerances.reset();
  tc.request_tolerances.reset();
  tc.symbolic = false;
  tc.user_recomputation = false;
  return tc;
}

const TrainParams kP{500, 1.0, 120, 0.2, 0};
const BoxConstraint kBox{{{"Voltage", 200, 400, 50, true}, {"MaxTorque", 400, 1000, 200, true},
                          {"InternalRes", 0.02, 0.5, 0.16, true}}};

}  // namespace

TEST_CASE("re-posed query is answered directly with no execution") {
  Bench b;
  const auto q = train::eng_query(kP, 800);
  const auto first = b.engine.process(q);
  CHECK(first.summary.executed == 1);
  CHECK(first.user_mechanism == Mechanism::None);
  const auto again = b.engine.process(q);
  CHECK(again.summary.executed == 0);
  CHECK(again.user_mechanism == Mechanism::Direct);
  CHECK(again.answer == first.answer);
}

TEST_CASE("shared requests are reused across query languages") {
  Bench b(plain_train());
  const auto cat = train::default_catalog();
  b.engine.process(train::sale_query("t1", "lvl1"));
  const auto& t = cat.trains.at("t1");
  const auto& s = cat.situations.at("lvl1");
  const auto r = b.engine.process(train::eng_query({t.m, t.F_B, s.v, s.mu, s.theta}, 5000));
  CHECK(r.summary.executed == 0);
  CHECK(r.summary.decomposition.direct == 1);
  CHECK(std::get<bool>(r.answer) == oracle::safe(t.m, t.F_B, s.v, s.mu, s.theta, 5000));
}

TEST_CASE("execution-layer direct reuse") {
  Bench b(plain_train());
  const Request r{train::kRequestLanguage, train::binding_of(kP), {"stopDist"}};
  const auto specs = complete(b.registry, r);
  CHECK_FALSE(b.engine.reuse_execution(specs[0]).value);
  b.engine.process(train::eng_query(kP, 800));
  const auto hit = b.engine.reuse_execution(specs[0]);
  REQUIRE(hit.value);
  CHECK(hit.mechanism == Mechanism::Direct);
}

TEST_CASE("symbolic reuse on the user layer answers without execution") {
  train::TrainConfig tc = plain_train();
  tc.symbolic = true;
  Bench b(tc);
  b.engine.process(train::eng_query(kP, 800));
  TrainParams easier = kP;
  easier.v = 100;
  easier.F_B = 1.5;
  const double d = oracle::stop_distance(kP.m, kP.F_B, kP.v, kP.mu, kP.theta) + 1;
  const auto r = b.engine.process(train::eng_query(easier, d));
  CHECK(r.user_mechanism == Mechanism::Symbolic);
  CHECK(r.summary.executed == 0);
  CHECK(std::get<bool>(r.answer));
  CHECK(b.store.consistency_check().clean());
}

TEST_CASE("fuzzy recomputation re-aggregates stored responses") {
  train::TrainConfig tc = plain_train();
  tc.user_recomputation = true;
  Bench b(tc);
  b.engine.process(train::eng_query(kP, 800));
  const double stop = oracle::stop_distance(kP.m, kP.F_B, kP.v, kP.mu, kP.theta);
  for (double d : {stop * 0.5, stop * 2}) {
    const auto r = b.engine.process(train::eng_query(kP, d));
    CHECK(r.user_mechanism == Mechanism::FuzzyRecomputation);
    CHECK(r.summary.executed == 0);
    CHECK(std::get<bool>(r.answer) == (stop < d));
  }
}

TEST_CASE("fuzzy retrieval stays within the tolerances and is tainted") {
  train::TrainConfig tc = plain_train();
  tc.user_tolerances = train::kThresholdSetA;
  Bench b(tc);
  b.engine.process(train::eng_query(kP, 800));
  TrainParams near = kP;
  near.m += 50;
  const auto hit = b.engine.process(train::eng_query(near, 800.5));
  CHECK(hit.user_mechanism == Mechanism::FuzzyRetrieval);
  CHECK(hit.fuzzy);
  TrainParams far = kP;
  far.m += 150;
  const auto miss = b.engine.process(train::eng_query(far, 800));
  CHECK(miss.user_mechanism == Mechanism::None);
  CHECK(miss.summary.executed == 1);
}

TEST_CASE("direct beats symbolic beats fuzzy") {
  train::TrainConfig tc;
  tc.request_tolerances.reset();
  Bench b(tc);
  const auto q = train::eng_query(kP, 800);
  b.engine.process(q);
  CHECK(b.engine.process(q).user_mechanism == Mechanism::Direct);
  // Same parameters, slightly larger dist: justify, retrieval and recomputation all apply.
  const auto r = b.engine.process(train::eng_query(kP, 800.2));
  CHECK(r.user_mechanism == Mechanism::Symbolic);
}

TEST_CASE("reuse disabled always executes") {
  Bench b;
  ProcessOptions po;
  po.reuse = false;
  const auto q = train::eng_query(kP, 800);
  b.engine.process(q, po);
  const auto r = b.engine.process(q, po);
  CHECK(r.summary.executed == 1);
  CHECK(r.user_mechanism == Mechanism::None);
}

TEST_CASE("a null store runs the plain pipeline") {
  LanguageRegistry r;
  train::register_train(r);
  ReuseEngine e(r, nullptr);
  const auto q = train::eng_query(kP, 800);
  CHECK(e.process(q).answer == answer_without_reuse(r, q));
  CHECK(e.process(q).summary.executed == 1);
}

TEST_CASE("battery skips are sound and the answer matches the plain pipeline") {
  Bench b;
  ProcessOptions po;
  po.batch_size = 1;
  const auto q = battery::box_query(kBox);
  const auto r = b.engine.process(q, po);
  CHECK(r.summary.decomposition.symbolic > 0);
  CHECK(r.summary.executed + r.summary.decomposition.symbolic == r.summary.requests);
  CHECK(r.answer == answer_without_reuse(b.registry, q));
  for (const auto& e : b.store.responses()) {
    if (!e.response.skipped) continue;
    const auto l = battery::layout_of(e.request.binding);
    CHECK(oracle::battery(l.voltage, l.max_torque, l.internal_res).min_soc < 50);
  }
  CHECK(b.store.consistency_check().clean());
}

TEST_CASE("one batch sees no skips from its own results") {
  Bench b;
  const auto r = b.engine.process(battery::box_query(kBox));
  CHECK(r.summary.decomposition.symbolic == 0);
  CHECK(r.summary.executed == r.summary.requests);
}

TEST_CASE("a single-objective request recomputes from stored traces") {
  Bench b;
  const auto soc = b.engine.process(battery::box_query(kBox, battery::kStandardCycle, "SoC"));
  CHECK(soc.summary.executed > 0);
  const auto tbl = b.engine.process(battery::box_query(kBox, battery::kStandardCycle, "TBL"));
  CHECK(tbl.summary.executed == 0);
  CHECK(tbl.summary.decomposition.fuzzy_recomputation == tbl.summary.requests);
  for (const auto& e : b.store.responses()) {
    if (!e.request.poi.count("TBL") || e.request.poi.size() != 1) continue;
    const auto l = battery::layout_of(e.request.binding);
    const double want = oracle::battery(l.voltage, l.max_torque, l.internal_res).tbl;
    CHECK(e.response.binding.at("TBL").number() == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("shuffled and threaded runs give the same answer") {
  const auto q = battery::box_query(kBox);
  Bench a;
  Bench b;
  ProcessOptions po;
  po.shuffle_seed = 99;
  po.threads = 3;
  CHECK(a.engine.process(q).answer == b.engine.process(q, po).answer);
}

TEST_CASE("every decision is published") {
  Bench b;
  b.engine.process(train::eng_query(kP, 800));
  const auto evs = b.events.since(0);
  REQUIRE(evs.size() >= 3);
  CHECK(evs.front().seq == 1);
  bool executed = false;
  for (const auto& e : evs) executed = executed || e.mechanism == Mechanism::Executed;
  CHECK(executed);
  CHECK(to_json_line(evs.front()).find("\"seq\":1") != std::string::npos);
  CHECK(b.events.since(b.events.last_seq()).empty());
}

TEST_CASE("insensitivity checks catch a too-wide tolerance") {
  LanguageRegistry r;
  train::TrainConfig tc;
  tc.user_tolerances = train::Tolerances{1e9, 1e9, 1e9, 1e9, 1e9};
  train::register_train(r, tc);
  const auto* s = r.query_scheme(train::kEngLanguage);
  REQUIRE(s);
  std::vector<std::pair<Query, Query>> pairs{{train::eng_query({500, 1, 50, 0.2, 0}, 800),
                                              train::eng_query({500, 0.02, 600, 0, -20}, 800)}};
  const std::function<Answer(const Query&)> truth = [&](const Query& q) { return answer_without_reuse(r, q); };
  const std::function<double(const Answer&, const Answer&)> dist = [](const Answer& a, const Answer& b) {
    return a == b ? 0.0 : 1.0;
  };
  const auto rep = check_insensitivity<Query, Answer>(*s, pairs, truth, dist, 0.5);
  CHECK(rep.checked == 1);
  CHECK_FALSE(rep.passed());
}
