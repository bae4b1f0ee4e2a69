// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.

#include <expreuse/battery.hpp>
#include <expreuse/error.hpp>
#include <expreuse/eval.hpp>
#include <expreuse/registry.hpp>
#include <expreuse/reuse.hpp>
#include <expreuse/store.hpp>
#include <expreuse/train.hpp>

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace expreuse;
using train::TrainParams;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %-22s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

TrainParams random_train(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> m(100, 20000), fb(0.02, 2.5), v(10, 600), mu(0, 1), th(-25, 25);
  return {m(rng), fb(rng), v(rng), mu(rng), th(rng)};
}

bool oracle_safe(const TrainParams& p, double dist) {
  return oracle::safe(p.m, p.F_B, p.v, p.mu, p.theta, dist);
}

/// Random box of n^3 points on the RQ2 lattice, its lowest corner drawn from the
/// first `v_span`, `t_span` lattice steps and the last `r_span` ones.
BoxConstraint random_box(std::mt19937_64& rng, int n, int v_span = 40, int t_span = 60, int r_span = 49) {
  const int vi = static_cast<int>(rng() % static_cast<unsigned>(std::min(v_span, 40 - n + 1)));
  const int ti = static_cast<int>(rng() % static_cast<unsigned>(std::min(t_span, 60 - n + 1)));
  const int ri = 49 - n - static_cast<int>(rng() % static_cast<unsigned>(std::min(r_span, 49 - n + 1)));
  const double v0 = 200 + 10.0 * vi, t0 = 400 + 10.0 * ti, r0 = snap(0.02 + 0.01 * ri);
  return {{{"Voltage", v0, v0 + 10.0 * (n - 1), 10, true},
           {"MaxTorque", t0, t0 + 10.0 * (n - 1), 10, true},
           {"InternalRes", r0, snap(r0 + 0.01 * (n - 1)), 0.01, true}}};
}

/// Non-dominated stable points of a box, brute force over the oracle simulation.
std::set<std::vector<double>> oracle_front(const BoxConstraint& box, bool* all_unstable) {
  std::vector<oracle::Point> pts;
  std::vector<std::vector<double>> layouts;
  for (double v : box.axes[0].values())
    for (double t : box.axes[1].values())
      for (double r : box.axes[2].values()) {
        const auto m = oracle::battery(v, t, r);
        if (m.min_soc < 50) continue;
        pts.push_back({m.tbl, m.min_soc});
        layouts.push_back({v, t, r});
      }
  *all_unstable = pts.empty();
  std::set<std::vector<double>> out;
  for (auto i : oracle::nondominated(pts)) out.insert(layouts[i]);
  return out;
}

std::set<std::vector<double>> layouts_of(const ParetoFront& f) {
  std::set<std::vector<double>> out;
  for (const auto& p : f.points)
    out.insert({p.at("Voltage").number(), p.at("MaxTorque").number(), p.at("InternalRes").number()});
  return out;
}

// ---------------------------------------------------------------------------

void soundness() {
  const auto t0 = std::chrono::steady_clock::now();
  LanguageRegistry reg;
  train::register_train(reg);
  battery::BatteryConfig bc;
  bc.tolerances = {1, 1, 0.02};
  battery::register_battery(reg, bc);
  ExperimentStore store(reg);
  ReuseEngine engine(reg, &store);

  std::mt19937_64 rng(2024);
  std::vector<std::pair<TrainParams, double>> seen;
  std::vector<BoxConstraint> boxes;
  const auto cat = train::default_catalog();
  std::vector<std::string> trains, sits;
  for (const auto& [k, _] : cat.trains) trains.push_back(k);
  for (const auto& [k, _] : cat.situations) sits.push_back(k);
  std::uniform_real_distribution<double> u01(0, 1), dist(200, 2000);

  std::size_t calls = 0, errors = 0;
  for (int i = 0; i < 1000; ++i) {
    const double pick = u01(rng);
    Query q;
    if (pick < 0.45) {
      TrainParams p;
      double d;
      const double kind = u01(rng);
      if (seen.empty() || kind < 0.4) {
        p = random_train(rng);
        d = dist(rng);
      } else {
        std::tie(p, d) = seen[rng() % seen.size()];
        if (kind < 0.6) {
          // exact repeat
        } else if (kind < 0.8) {
          p.m += 80 * (u01(rng) - 0.5);  // near-duplicate
          p.v += 0.6 * (u01(rng) - 0.5);
          d += 5 * (u01(rng) - 0.5);
        } else {
          p.v *= 0.9;  // dominated
          p.F_B *= 1.1;
          d *= 1.05;
        }
      }
      seen.push_back({p, d});
      q = train::eng_query(p, d);
    } else if (pick < 0.6) {
      const auto& t = trains[rng() % trains.size()];
      q = u01(rng) < 0.3 ? train::sale_query(t) : train::sale_query(t, sits[rng() % sits.size()]);
    } else {
      BoxConstraint b;
      if (boxes.empty() || u01(rng) < 0.5) {
        b = random_box(rng, 3);
        boxes.push_back(b);
      } else {
        b = boxes[rng() % boxes.size()];
      }
      const char* pois[] = {"TBL,SoC", "SoC", "TBL"};
      q = battery::box_query(b, battery::kStandardCycle, pois[rng() % 3]);
    }
    ProcessOptions po;
    po.storage = u01(rng) < 0.8 ? StorageMode::Traces : StorageMode::Metrics;
    po.batch_size = rng() % 3;
    if (u01(rng) < 0.5) po.shuffle_seed = rng();
    try {
      engine.process(q, po);
      ++calls;
    } catch (const Error&) {
      ++errors;
    }
  }
  const auto rep = store.consistency_check();
  const double secs = seconds_since(t0);
  std::string detail = fmt("calls=%zu errors=%zu checked=%zu unverifiable=%zu violations=%zu t=%.1fs", calls, errors,
                           rep.checked, rep.unverifiable, rep.violations.size(), secs);
  if (!rep.violations.empty()) detail += " first: " + rep.violations.front().detail;
  report("soundness", calls == 1000 && rep.clean() && secs < 120, detail);
}

void direct_reuse() {
  LanguageRegistry reg;
  train::register_train(reg);
  battery::register_battery(reg);
  ExperimentStore store(reg);
  ReuseEngine engine(reg, &store);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> dist(200, 2000);
  std::vector<Query> qs;
  for (int i = 0; i < 60; ++i) qs.push_back(train::eng_query(random_train(rng), dist(rng)));
  const char* trains[] = {"t1", "t2", "t3"};
  const char* sits[] = {"lvl1", "lvl2"};
  for (int i = 0; i < 20; ++i)
    qs.push_back(i % 3 ? train::sale_query(trains[i % 3], std::string(sits[i % 2])) : train::sale_query(trains[i % 3]));
  for (int i = 0; i < 20; ++i) qs.push_back(battery::box_query(random_box(rng, 2)));

  std::vector<std::string> first;
  for (const auto& q : qs) first.push_back(canonical(engine.process(q).answer));
  std::size_t executed = 0, mismatched = 0, direct = 0;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const auto r = engine.process(qs[i]);
    executed += r.summary.executed;
    mismatched += canonical(r.answer) != first[i];
    direct += r.user_mechanism == Mechanism::Direct;
  }
  report("direct-reuse", executed == 0 && mismatched == 0 && direct == qs.size(),
         fmt("queries=%zu executed=%zu mismatched=%zu direct=%zu", qs.size(), executed, mismatched, direct));
}

void symbolic_train() {
  train::TrainConfig tc;
  tc.user_tolerances.reset();
  tc.request_tolerances.reset();
  tc.user_recomputation = false;
  LanguageRegistry reg;
  train::register_train(reg, tc);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u01(0, 1), dist(200, 2000);

  std::size_t fired = 0, wrong = 0, executed = 0, tried = 0;
  ProcessOptions po;
  po.storage = StorageMode::Metrics;
  while (fired < 10000 && tried < 200000) {
    ExperimentStore store(reg);
    ReuseEngine engine(reg, &store);
    const auto s = random_train(rng);
    const double sd = dist(rng);
    engine.process(train::eng_query(s, sd), po);
    for (int k = 0; k < 8; ++k) {
      ++tried;
      TrainParams f = s;
      // Mostly moves that keep the stored case comparable, some that do not.
      f.v *= 1 + 0.3 * (u01(rng) - 0.7);
      f.F_B *= 1 + 0.3 * (u01(rng) - 0.3);
      f.mu = std::clamp(f.mu + 0.2 * (u01(rng) - 0.3), 0.0, 1.0);
      f.theta = std::clamp(f.theta + 4 * (u01(rng) - 0.3), -25.0, 25.0);
      f.m *= 1 + 0.3 * (u01(rng) - 0.5);
      const double fd = u01(rng) < 0.5 ? sd * (0.5 + u01(rng)) : dist(rng);
      const auto q = train::eng_query(f, fd);
      const auto r = engine.process(q, po);
      if (r.user_mechanism != Mechanism::Symbolic) continue;
      ++fired;
      executed += r.summary.executed;
      wrong += std::get<bool>(r.answer) != oracle_safe(f, fd);
    }
  }
  report("symbolic-train", fired >= 10000 && wrong == 0 && executed == 0,
         fmt("fired=%zu tried=%zu wrong=%zu executed=%zu", fired, tried, wrong, executed));
}

void battery_audit() {
  LanguageRegistry reg;
  battery::BatteryConfig bc;
  bc.recomputation = false;
  battery::register_battery(reg, bc);
  std::mt19937_64 rng(5);
  std::set<std::string> audited;
  std::size_t false_skips = 0, queries = 0;
  ProcessOptions po;
  po.batch_size = 1;
  while (audited.size() < 1000 && queries < 5000) {
    ExperimentStore store(reg);
    ReuseEngine engine(reg, &store);
    po.shuffle_seed = rng();
    // Fine 5x5x5 boxes in the low voltage, low torque, high resistance corner, where
    // the unstable layouts are.
    const double v0 = 200 + 2.0 * static_cast<double>(rng() % 40);
    const double t0 = 400 + 2.0 * static_cast<double>(rng() % 25);
    const double r0 = snap(0.3 + 0.005 * static_cast<double>(rng() % 33));
    const BoxConstraint box{{{"Voltage", v0, v0 + 8, 2, true},
                             {"MaxTorque", t0, t0 + 8, 2, true},
                             {"InternalRes", r0, snap(r0 + 0.02), 0.005, true}}};
    engine.process(battery::box_query(box), po);
    ++queries;
    for (const auto& e : store.responses()) {
      if (!e.response.skipped || !audited.insert(e.key).second) continue;
      const auto l = battery::layout_of(e.request.binding);
      false_skips += oracle::battery(l.voltage, l.max_torque, l.internal_res).min_soc >= 50;
    }
  }

  std::mt19937_64 prng(6);
  std::uniform_real_distribution<double> V(200, 600), T(400, 1000), R(0.02, 0.5), u01(0, 1);
  const auto cycle = battery::DriveCycle::standard();
  std::size_t pairs = 0, broken = 0;
  for (; pairs < 10000; ++pairs) {
    battery::Layout a{V(prng), T(prng), R(prng)};
    battery::Layout b = a;
    const int axis = static_cast<int>(pairs % 3);
    if (axis == 0) b.voltage = a.voltage + (600 - a.voltage) * u01(prng);
    if (axis == 1) b.max_torque = a.max_torque + (1000 - a.max_torque) * u01(prng);
    if (axis == 2) b.internal_res = a.internal_res + (0.5 - a.internal_res) * u01(prng);
    const auto ma = battery::metrics_of(battery::simulate_battery(a, cycle));
    const auto mb = battery::metrics_of(battery::simulate_battery(b, cycle));
    // b has the larger coordinate on one axis.
    const bool ok = axis == 2 ? (mb.soc <= ma.soc && mb.tbl >= ma.tbl) : (mb.soc >= ma.soc && mb.tbl <= ma.tbl);
    broken += !ok;
  }
  report("battery-skip-audit", audited.size() >= 1000 && false_skips == 0 && broken == 0,
         fmt("audited=%zu false_skips=%zu monotone_pairs=%zu broken=%zu", audited.size(), false_skips, pairs,
             broken));
}

void fuzzy_recomputation() {
  LanguageRegistry reg;
  battery::register_battery(reg);
  ExperimentStore store(reg);
  ReuseEngine engine(reg, &store);
  const BoxConstraint box{{{"Voltage", 250, 450, 50, true}, {"MaxTorque", 500, 900, 100, true},
                           {"InternalRes", 0.05, 0.35, 0.1, true}}};
  const auto soc = engine.process(battery::box_query(box, battery::kStandardCycle, "SoC"));
  const auto tbl = engine.process(battery::box_query(box, battery::kStandardCycle, "TBL"));
  const auto cycle = battery::DriveCycle::standard();
  std::size_t checked = 0, off = 0;
  double worst = 0;
  for (double v : box.axes[0].values())
    for (double t : box.axes[1].values())
      for (double r : box.axes[2].values()) {
        const battery::Layout l{v, t, r};
        const auto got = store.get_response(battery::layout_request(l, {"TBL"}));
        const double want = battery::metrics_of(battery::simulate_battery(l, cycle)).tbl;
        ++checked;
        if (!got || got->binding.count("TBL") == 0) {
          ++off;
          continue;
        }
        const double rel = want == 0 ? std::abs(got->binding.at("TBL").number())
                                     : std::abs(got->binding.at("TBL").number() - want) / std::abs(want);
        worst = std::max(worst, rel);
        off += !(rel <= 1e-9);
      }
  report("fuzzy-recomputation",
         soc.summary.requests == 100 && tbl.summary.executed == 0 && checked == 100 && off == 0,
         fmt("requests=%llu first_executed=%llu second_executed=%llu recomputed=%llu worst_rel=%.2e",
             static_cast<unsigned long long>(soc.summary.requests),
             static_cast<unsigned long long>(soc.summary.executed),
             static_cast<unsigned long long>(tbl.summary.executed),
             static_cast<unsigned long long>(tbl.summary.decomposition.fuzzy_recomputation), worst));
}

void compatibility() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> dist(200, 2000), u01(0, 1);
  std::size_t eng_checked = 0, sale_checked = 0, tms_checked = 0, failed = 0;
  std::string first;
  auto note = [&](const CompatibilityReport& r) {
    failed += r.failures.size();
    if (first.empty() && !r.failures.empty()) first = r.failures.front().query_key + ": " + r.failures.front().reason;
  };

  {
    LanguageRegistry reg;
    train::register_train(reg);
    std::vector<Query> qs;
    for (int i = 0; i < 150; ++i) qs.push_back(train::eng_query(random_train(rng), dist(rng)));
    const auto rep = check_compatibility(reg, train::kEngLanguage, qs, [](const Query& q, const Answer& a) {
      const auto p = train::params_of(q.binding);
      return std::get<bool>(a) == oracle_safe(p, q.binding.at("dist").number());
    });
    eng_checked = rep.checked;
    note(rep);
  }

  for (int c = 0; c < 12; ++c) {
    train::TrainConfig tc;
    tc.catalog.trains.clear();
    tc.catalog.situations.clear();
    std::map<std::string, oracle::Situation> sits;
    for (int s = 0; s < 3; ++s) {
      const auto p = random_train(rng);
      const train::Situation sit{p.v, p.mu, p.theta, dist(rng)};
      tc.catalog.situations["s" + std::to_string(s)] = sit;
      sits["s" + std::to_string(s)] = {sit.v, sit.mu, sit.theta, sit.dist};
    }
    std::map<std::string, std::pair<double, double>> trains;
    for (int t = 0; t < 4; ++t) {
      const auto p = random_train(rng);
      tc.catalog.trains["t" + std::to_string(t)] = {p.m, p.F_B};
      trains["t" + std::to_string(t)] = {p.m, p.F_B};
    }
    LanguageRegistry reg;
    train::register_train(reg, tc);
    std::vector<Query> qs;
    for (const auto& [t, _] : trains) {
      qs.push_back(train::sale_query(t));
      for (const auto& [s, _2] : sits) qs.push_back(train::sale_query(t, s));
    }
    const auto rep = check_compatibility(reg, train::kSaleLanguage, qs, [&](const Query& q, const Answer& a) {
      const auto& [m, fb] = trains.at(q.binding.at("train").as_symbol().name);
      std::vector<oracle::Situation> chosen;
      if (auto it = q.binding.find("situation"); it != q.binding.end())
        chosen.push_back(sits.at(it->second.as_symbol().name));
      else
        for (const auto& [_, s] : sits) chosen.push_back(s);
      return std::get<bool>(a) == oracle::sale_verdict(m, fb, chosen);
    });
    sale_checked += rep.checked;
    note(rep);
  }

  {
    LanguageRegistry reg;
    battery::register_battery(reg);
    std::vector<Query> qs;
    for (int i = 0; i < 100; ++i) qs.push_back(battery::box_query(random_box(rng, 2 + static_cast<int>(rng() % 3))));
    const auto rep = check_compatibility(reg, battery::kQueryLanguage, qs, [](const Query& q, const Answer& a) {
      bool all_unstable = false;
      const auto want = oracle_front(q.binding.at("Constr").as_box(), &all_unstable);
      const auto& f = std::get<ParetoFront>(a);
      return layouts_of(f) == want && f.all_skipped == all_unstable;
    });
    tms_checked = rep.checked;
    note(rep);
  }
  std::string detail = fmt("eng=%zu sale=%zu tms=%zu failures=%zu", eng_checked, sale_checked, tms_checked, failed);
  if (!first.empty()) detail += " first: " + first;
  report("compatibility", eng_checked >= 100 && sale_checked >= 100 && tms_checked >= 100 && failed == 0, detail);
}

void rq1_battery_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  eval::Rq1BatteryPlan plan;
  const auto rep = eval::run_rq1_battery(plan);
  const double secs = seconds_since(t0);
  bool decreasing = true;
  std::ostringstream counts;
  for (int round = 1; round <= plan.rounds; ++round) {
    std::vector<std::uint64_t> row;
    for (const auto& r : rep.rows)
      if (r.round == round) row.push_back(r.executed);
    for (std::size_t i = 1; i < row.size(); ++i) decreasing = decreasing && row[i] < row[i - 1];
    counts << (round > 1 ? " | " : "");
    for (std::size_t i = 0; i < row.size(); ++i) counts << (i ? "," : "") << row[i];
    decreasing = decreasing && row.size() >= 3;
  }
  report("rq1-battery-trend", decreasing && rep.failures.empty() && secs < 300,
         fmt("grid=%zu executed per set [%s] t=%.1fs", plan.box.grid_size(), counts.str().c_str(), secs));
}

void rq1_train_ratio() {
  eval::Rq1TrainPlan plan;
  const auto rep = eval::run_rq1_train(plan);
  eval::Rq1TrainPlan off = plan;
  off.reuse = false;
  const auto base = eval::run_rq1_train(off);
  const bool ok = rep.final_ratio < 0.6 && rep.final_ratio < rep.first_window_ratio && base.final_ratio == 1.0 &&
                  rep.failures.empty() && rep.shadow.mismatches == 0;
  const bool in_band = rep.final_ratio >= 0.05 && rep.final_ratio <= 0.6;
  report("rq1-train-ratio", ok,
         fmt("queries=%zu final=%.4f first_window=%.4f no_reuse=%.4f reference_band=%s", plan.queries,
             rep.final_ratio, rep.first_window_ratio, base.final_ratio, in_band ? "inside" : "outside"));
}

void rq2_overlap() {
  eval::Rq2BatteryPlan plan;
  const auto rep = eval::run_rq2_battery(plan);
  const std::size_t after = (rep.space_points + 999) / 1000;
  double sum = 0;
  std::size_t n = 0;
  for (const auto& r : rep.rows)
    if (r.index > after) {
      sum += static_cast<double>(r.executed);
      ++n;
    }
  const double first = rep.rows.empty() ? 0.0 : static_cast<double>(rep.rows.front().executed);
  const double mean = n ? sum / static_cast<double>(n) : 0.0;
  report("rq2-overlap", n > 0 && mean < 0.5 * first && rep.failures.empty(),
         fmt("space=%zu queries=%zu first=%.0f mean_after_%zu=%.1f", rep.space_points, rep.rows.size(), first, after,
             mean));
}

void trace_vs_closed() {
  std::mt19937_64 rng(99);
  std::size_t configs = 0, off = 0;
  double worst = 0;
  while (configs < 10000) {
    const auto p = random_train(rng);
    const double tstop = oracle::stop_time(p.m, p.F_B, p.v, p.mu, p.theta);
    if (!(tstop <= oracle::kTimeCap - 1)) continue;
    ++configs;
    const auto tr = train::simulate_trace(p);
    const double closed = oracle::stop_distance(p.m, p.F_B, p.v, p.mu, p.theta);
    const double err = tr.stopped ? std::abs(tr.displacement.back() - closed) : oracle::kInf;
    const double bound = p.v / 3.6 * train::kDt + 1e-6;
    worst = std::max(worst, err / bound);
    off += !(err <= bound);
  }
  report("trace-vs-closed-form", off == 0, fmt("configs=%zu outside=%zu worst_err_over_bound=%.3g", configs, off, worst));
}

void store_growth() {
  eval::Rq2TrainPlan plan;
  plan.setups = {eval::StoreSetup::TracesReuse, eval::StoreSetup::TracesNoReuse};
  const auto rep = eval::run_rq2_train(plan);
  const auto* a = rep.last(eval::StoreSetup::TracesReuse);
  const auto* b = rep.last(eval::StoreSetup::TracesNoReuse);
  const bool ok = a && b && a->trace_bytes < b->trace_bytes && a->end == 2000 && b->end == 2000;
  report("store-growth", ok,
         fmt("queries=%zu reuse_bytes=%llu no_reuse_bytes=%llu", plan.queries,
             static_cast<unsigned long long>(a ? a->trace_bytes : 0),
             static_cast<unsigned long long>(b ? b->trace_bytes : 0)));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void()>>> criteria = {
      {"soundness", soundness},
      {"direct-reuse", direct_reuse},
      {"symbolic-train", symbolic_train},
      {"battery-skip-audit", battery_audit},
      {"fuzzy-recomputation", fuzzy_recomputation},
      {"compatibility", compatibility},
      {"rq1-battery-trend", rq1_battery_trend},
      {"rq1-train-ratio", rq1_train_ratio},
      {"rq2-overlap", rq2_overlap},
      {"trace-vs-closed-form", trace_vs_closed},
      {"store-growth", store_growth},
  };
  for (const auto& [name, fn] : criteria) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(name, false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
