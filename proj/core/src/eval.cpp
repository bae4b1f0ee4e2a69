#include <expreuse/eval.hpp>

#include <expreuse/error.hpp>
#include <expreuse/value.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace expreuse::eval {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t front_size(const Answer& a) {
  const auto* f = std::get_if<ParetoFront>(&a);
  return f ? f->points.size() : 0;
}

std::string tolerances_text(const battery::Tolerances& t) {
  return format_double(t[0]) + ";" + format_double(t[1]) + ";" + format_double(t[2]);
}

std::string axis_text(const BoxAxis& a) {
  return a.variable + "=" + format_double(a.min) + (a.include_max ? ".." : "..<") + format_double(a.max) + "/" +
         format_double(a.step) + "(" + std::to_string(a.count()) + ")";
}

std::string box_text(const BoxConstraint& b) {
  std::string out;
  for (const auto& a : b.axes) out += (out.empty() ? "" : " ") + axis_text(a);
  return out;
}

void merge(ShadowReport& into, const ShadowReport& from) {
  into.sampled += from.sampled;
  into.compared += from.compared;
  into.fuzzy += from.fuzzy;
  into.mismatches += from.mismatches;
}

void note_shadow(const ShadowReport& s, std::vector<std::string>& failures) {
  if (s.mismatches)
    failures.push_back(std::to_string(s.mismatches) + " of " + std::to_string(s.compared) +
                       " shadow-checked answers differ from the plain pipeline");
}

std::uint64_t shadow_seed(std::uint64_t seed) { return seed ^ 0x5eed5eed5eedULL; }

}  // namespace

TrainSample sample_train(std::mt19937_64& rng, const TrainBox& b) {
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  TrainSample s;
  s.params.m = u(b.m_min, b.m_max);
  s.params.F_B = u(b.fb_min, b.fb_max);
  s.params.v = u(b.v_min, b.v_max);
  s.params.mu = u(b.mu_min, b.mu_max);
  s.params.theta = u(b.theta_min, b.theta_max);
  s.dist = u(b.dist_min, b.dist_max);
  return s;
}

ShadowOracle::ShadowOracle(const LanguageRegistry& registry, double fraction, std::uint64_t seed)
    : registry_(registry), pick_(std::clamp(fraction, 0.0, 1.0)), rng_(seed) {}

void ShadowOracle::observe(const Query& q, const ProcessResult& r) {
  if (!pick_(rng_)) return;
  ++report_.sampled;
  if (r.fuzzy) {
    ++report_.fuzzy;
    return;
  }
  ++report_.compared;
  if (!(answer_without_reuse(registry_, q) == r.answer)) ++report_.mismatches;
}

std::vector<NamedBatteryTolerances> battery_threshold_sets() {
  return {{"t1", {0.5, 0.5, 0.01}}, {"t2", {1, 1, 0.02}}, {"t3", {2, 2, 0.03}}, {"t4", {5, 5, 0.05}}};
}

BoxConstraint rq1_desk_box() {
  return {{{"Voltage", 200, 210, 1, false}, {"MaxTorque", 400, 410, 1, false}, {"InternalRes", 0.02, 0.5, 0.12, true}}};
}

BoxConstraint rq1_full_box() {
  return {{{"Voltage", 200, 210, 0.1, false},
           {"MaxTorque", 400, 410, 0.1, false},
           {"InternalRes", 0.02, 0.5, 0.01, true}}};
}

BoxConstraint rq2_desk_space() {
  return {{{"Voltage", 200, 600, 20, false}, {"MaxTorque", 400, 1000, 30, false}, {"InternalRes", 0.02, 0.5, 0.02, true}}};
}

BoxConstraint rq2_full_space() {
  return {{{"Voltage", 200, 600, 10, false}, {"MaxTorque", 400, 1000, 10, false}, {"InternalRes", 0.02, 0.5, 0.01, true}}};
}

// --- rq1-battery ----------------------------------------------------------

Rq1BatteryReport run_rq1_battery(const Rq1BatteryPlan& plan) {
  Rq1BatteryReport report;
  const Query q = battery::box_query(plan.box);
  const auto cycles = std::make_shared<const battery::CycleLibrary>();
  for (const auto& set : plan.thresholds) {
    LanguageRegistry registry;
    battery::BatteryConfig cfg;
    cfg.tolerances = set.t;
    cfg.symbolic = plan.symbolic;
    cfg.cycles = cycles;
    battery::register_battery(registry, cfg);
    ShadowOracle shadow(registry, plan.shadow_fraction, shadow_seed(plan.seed));
    for (int round = 1; round <= plan.rounds; ++round) {
      ExperimentStore store(registry);
      ReuseEngine engine(registry, &store);
      ProcessOptions opts;
      opts.batch_size = plan.batch_size;
      opts.shuffle_seed = plan.seed + static_cast<std::uint64_t>(round) - 1;
      opts.threads = plan.threads;
      const auto t0 = Clock::now();
      const auto r = engine.process(q, opts);
      Rq1BatteryRow row;
      row.thresholds = set.name;
      row.t = set.t;
      row.round = round;
      row.grid = r.summary.requests;
      row.executed = r.summary.executed;
      row.symbolic = r.summary.decomposition.symbolic;
      row.fuzzy = r.summary.decomposition.fuzzy_retrieval;
      row.front_size = front_size(r.answer);
      row.elapsed_s = seconds_since(t0);
      report.rows.push_back(row);
      shadow.observe(q, r);

      for (const auto& e : store.responses()) {
        if (e.provenance.origin != Origin::Symbolic) continue;
        ++report.skips_audited;
        const auto sim = battery::simulate_battery(battery::layout_of(e.request.binding), cycles->get(battery::kStandardCycle));
        if (!(battery::metrics_of(sim).soc < battery::kUnstableSoC)) ++report.false_skips;
      }
    }
    merge(report.shadow, shadow.report());
  }
  if (report.false_skips)
    report.failures.push_back(std::to_string(report.false_skips) + " symbolic skips hit stable layouts");
  note_shadow(report.shadow, report.failures);
  return report;
}

// --- rq1-train ------------------------------------------------------------

namespace {

train::TrainConfig train_config(const std::optional<train::Tolerances>& tolerances) {
  train::TrainConfig cfg;
  cfg.user_tolerances = tolerances;
  cfg.request_tolerances = tolerances;
  return cfg;
}

}  // namespace

Rq1TrainReport run_rq1_train(const Rq1TrainPlan& plan) {
  Rq1TrainReport report;
  LanguageRegistry registry;
  train::register_train(registry, train_config(plan.tolerances));
  ExperimentStore store(registry);
  ReuseEngine engine(registry, &store);
  ShadowOracle shadow(registry, plan.shadow_fraction, shadow_seed(plan.seed));
  std::mt19937_64 rng(plan.seed);
  ProcessOptions opts;
  opts.reuse = plan.reuse;
  opts.storage = plan.storage;
  const std::size_t window = std::max<std::size_t>(1, plan.window);
  std::uint64_t in_window = 0;
  for (std::size_t i = 1; i <= plan.queries; ++i) {
    const auto s = sample_train(rng, plan.box);
    const Query q = train::eng_query(s.params, s.dist);
    const auto r = engine.process(q, opts);
    shadow.observe(q, r);
    report.executed += r.summary.executed;
    in_window += r.summary.executed;
    if (i % window == 0 || i == plan.queries) {
      const std::size_t size = i % window == 0 ? window : i % window;
      Rq1TrainRow row;
      row.end = i;
      row.window_executed = in_window;
      row.executed = report.executed;
      row.window_ratio = static_cast<double>(in_window) / static_cast<double>(size);
      row.ratio = static_cast<double>(report.executed) / static_cast<double>(i);
      report.rows.push_back(row);
      in_window = 0;
    }
  }
  if (!report.rows.empty()) {
    report.final_ratio = report.rows.back().ratio;
    report.first_window_ratio = report.rows.front().window_ratio;
  }
  report.shadow = shadow.report();
  if (!plan.reuse && plan.queries > 0 && report.final_ratio != 1.0)
    report.failures.push_back("ratio without reuse is " + format_double(report.final_ratio) + ", not 1");
  if (report.final_ratio > 1.0) report.failures.push_back("more executions than queries");
  note_shadow(report.shadow, report.failures);
  return report;
}

// --- rq2-battery ----------------------------------------------------------

Rq2BatteryReport run_rq2_battery(const Rq2BatteryPlan& plan) {
  Rq2BatteryReport report;
  report.space_points = plan.space.grid_size();
  LanguageRegistry registry;
  battery::BatteryConfig cfg;
  cfg.tolerances = plan.tolerances;
  cfg.symbolic = plan.symbolic;
  battery::register_battery(registry, cfg);
  ExperimentStore store(registry);
  ReuseEngine engine(registry, &store);
  ShadowOracle shadow(registry, plan.shadow_fraction, shadow_seed(plan.seed));
  std::mt19937_64 rng(plan.seed);
  ProcessOptions opts;
  opts.reuse = plan.reuse;
  opts.storage = plan.storage;
  opts.threads = plan.threads;
  for (const auto& a : plan.space.axes)
    if (a.count() < plan.sub)
      throw Error(ErrorCode::ConfigError, "axis " + a.variable + " has fewer than " + std::to_string(plan.sub) + " points");
  for (std::size_t i = 1; i <= plan.queries; ++i) {
    BoxConstraint box;
    for (const auto& a : plan.space.axes) {
      const auto vals = a.values();
      std::uniform_int_distribution<std::size_t> start(0, vals.size() - plan.sub);
      const std::size_t k = start(rng);
      box.axes.push_back({a.variable, vals[k], vals[k + plan.sub - 1], a.step, true});
    }
    const Query q = battery::box_query(box);
    const auto t0 = Clock::now();
    const auto r = engine.process(q, opts);
    Rq2BatteryRow row;
    row.index = i;
    row.requests = r.summary.requests;
    row.executed = r.summary.executed;
    row.front_size = front_size(r.answer);
    row.elapsed_s = seconds_since(t0);
    report.rows.push_back(row);
    shadow.observe(q, r);
  }
  report.shadow = shadow.report();
  if (!report.rows.empty() && report.rows.front().executed != report.rows.front().requests)
    report.failures.push_back("first query on an empty store did not execute its whole grid");
  if (!plan.reuse)
    for (const auto& row : report.rows)
      if (row.executed != row.requests) {
        report.failures.push_back("query " + std::to_string(row.index) + " reused results with reuse disabled");
        break;
      }
  note_shadow(report.shadow, report.failures);
  return report;
}

// --- rq2-train ------------------------------------------------------------

std::string_view to_string(StoreSetup s) noexcept {
  switch (s) {
    case StoreSetup::NoStore: return "no-store";
    case StoreSetup::MetricsReuse: return "metrics-reuse";
    case StoreSetup::MetricsNoReuse: return "metrics-no-reuse";
    case StoreSetup::TracesReuse: return "traces-reuse";
    case StoreSetup::TracesNoReuse: return "traces-no-reuse";
  }
  return "?";
}

std::optional<StoreSetup> parse_store_setup(std::string_view s) {
  for (auto v : {StoreSetup::NoStore, StoreSetup::MetricsReuse, StoreSetup::MetricsNoReuse, StoreSetup::TracesReuse,
                 StoreSetup::TracesNoReuse})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

const Rq2TrainRow* Rq2TrainReport::last(StoreSetup s) const {
  const Rq2TrainRow* out = nullptr;
  for (const auto& r : rows)
    if (r.setup == s) out = &r;
  return out;
}

Rq2TrainReport run_rq2_train(const Rq2TrainPlan& plan) {
  Rq2TrainReport report;
  LanguageRegistry registry;
  train::register_train(registry, train_config(plan.tolerances));
  const std::size_t interval = std::max<std::size_t>(1, plan.interval);
  for (const auto setup : plan.setups) {
    const bool has_store = setup != StoreSetup::NoStore;
    std::unique_ptr<ExperimentStore> store = has_store ? std::make_unique<ExperimentStore>(registry) : nullptr;
    ReuseEngine engine(registry, store.get());
    ShadowOracle shadow(registry, plan.shadow_fraction, shadow_seed(plan.seed));
    ProcessOptions opts;
    opts.reuse = setup == StoreSetup::MetricsReuse || setup == StoreSetup::TracesReuse;
    opts.storage = !has_store                                                              ? StorageMode::None
                   : setup == StoreSetup::MetricsReuse || setup == StoreSetup::MetricsNoReuse ? StorageMode::Metrics
                                                                                          : StorageMode::Traces;
    std::mt19937_64 rng(plan.seed);
    std::uint64_t executed = 0;
    double window_s = 0.0;
    std::size_t window_n = 0;
    for (std::size_t i = 1; i <= plan.queries; ++i) {
      const auto s = sample_train(rng, plan.box);
      const Query q = train::eng_query(s.params, s.dist);
      const auto t0 = Clock::now();
      const auto r = engine.process(q, opts);
      window_s += seconds_since(t0);
      ++window_n;
      executed += r.summary.executed;
      shadow.observe(q, r);
      if (i % interval == 0 || i == plan.queries) {
        Rq2TrainRow row;
        row.setup = setup;
        row.end = i;
        row.mean_latency_ms = 1000.0 * window_s / static_cast<double>(window_n);
        row.executed = executed;
        if (store) {
          const auto st = store->stats();
          row.trace_bytes = st.trace_bytes;
          row.record_bytes = st.record_bytes;
        }
        report.rows.push_back(row);
        window_s = 0.0;
        window_n = 0;
      }
    }
    if (store && !opts.reuse && store->stats().executed > plan.queries)
      report.failures.push_back(std::string(to_string(setup)) + ": more stored executions than queries");
    merge(report.shadow, shadow.report());
  }
  note_shadow(report.shadow, report.failures);
  return report;
}

// --- output ---------------------------------------------------------------

std::string to_csv(const Rq1BatteryReport& r, const Rq1BatteryPlan& plan) {
  std::ostringstream out;
  out << "# scenario=rq1-battery seed=" << plan.seed << " rounds=" << plan.rounds << " batch_size=" << plan.batch_size
      << " grid=" << plan.box.grid_size() << " box=" << box_text(plan.box) << "\n";
  out << "# skips_audited=" << r.skips_audited << " false_skips=" << r.false_skips
      << " shadow_compared=" << r.shadow.compared << " shadow_mismatches=" << r.shadow.mismatches << "\n";
  out << "thresholds,t_voltage,t_maxtorque,t_internalres,round,grid,executed,symbolic,fuzzy,front_size\n";
  for (const auto& row : r.rows)
    out << row.thresholds << ',' << format_double(row.t[0]) << ',' << format_double(row.t[1]) << ','
        << format_double(row.t[2]) << ',' << row.round << ',' << row.grid << ',' << row.executed << ','
        << row.symbolic << ',' << row.fuzzy << ',' << row.front_size << '\n';
  return out.str();
}

std::string to_csv(const Rq1TrainReport& r, const Rq1TrainPlan& plan) {
  std::ostringstream out;
  out << "# scenario=rq1-train seed=" << plan.seed << " queries=" << plan.queries << " window=" << plan.window
      << " reuse=" << (plan.reuse ? 1 : 0) << " storage=" << to_string(plan.storage) << " tolerances="
      << (plan.tolerances ? format_double((*plan.tolerances)[0]) + ";" + format_double((*plan.tolerances)[1]) + ";" +
                                format_double((*plan.tolerances)[2]) + ";" + format_double((*plan.tolerances)[3]) +
                                ";" + format_double((*plan.tolerances)[4])
                          : std::string("off"))
      << "\n";
  out << "# executed=" << r.executed << " final_ratio=" << format_double(r.final_ratio)
      << " first_window_ratio=" << format_double(r.first_window_ratio) << " shadow_compared=" << r.shadow.compared
      << " shadow_mismatches=" << r.shadow.mismatches << "\n";
  out << "queries,window_executed,executed,window_ratio,ratio\n";
  for (const auto& row : r.rows)
    out << row.end << ',' << row.window_executed << ',' << row.executed << ',' << format_double(row.window_ratio) << ','
        << format_double(row.ratio) << '\n';
  return out.str();
}

std::string to_csv(const Rq2BatteryReport& r, const Rq2BatteryPlan& plan) {
  std::ostringstream out;
  out << "# scenario=rq2-battery seed=" << plan.seed << " queries=" << plan.queries << " sub=" << plan.sub
      << " space_points=" << r.space_points << " overlap_after=" << (r.space_points + 999) / 1000
      << " reuse=" << (plan.reuse ? 1 : 0) << " tolerances=" << tolerances_text(plan.tolerances)
      << " space=" << box_text(plan.space) << "\n";
  out << "# shadow_compared=" << r.shadow.compared << " shadow_mismatches=" << r.shadow.mismatches << "\n";
  out << "query,requests,executed,front_size,elapsed_s\n";
  for (const auto& row : r.rows)
    out << row.index << ',' << row.requests << ',' << row.executed << ',' << row.front_size << ','
        << format_double(row.elapsed_s) << '\n';
  return out.str();
}

std::string to_csv(const Rq2TrainReport& r, const Rq2TrainPlan& plan) {
  std::ostringstream out;
  out << "# scenario=rq2-train seed=" << plan.seed << " queries=" << plan.queries << " interval=" << plan.interval
      << "\n";
  out << "# shadow_compared=" << r.shadow.compared << " shadow_mismatches=" << r.shadow.mismatches << "\n";
  out << "setup,queries,mean_latency_ms,executed,trace_bytes,record_bytes\n";
  for (const auto& row : r.rows)
    out << to_string(row.setup) << ',' << row.end << ',' << format_double(row.mean_latency_ms) << ',' << row.executed
        << ',' << row.trace_bytes << ',' << row.record_bytes << '\n';
  return out.str();
}

std::string gnuplot_script(const std::string& scenario, const std::string& csv) {
  std::ostringstream g;
  g << "set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n"
    << "set terminal pngcairo size 900,600\nset output '" << scenario << ".png'\nset grid\n";
  if (scenario == "rq1-battery") {
    g << "set style data histograms\nset style fill solid 0.8\nset ylabel 'experiments executed'\n"
      << "plot '" << csv << "' using 7:xticlabels(stringcolumn(1).' r'.stringcolumn(5)) title 'executed'\n";
  } else if (scenario == "rq1-train") {
    g << "set xlabel 'queries'\nset ylabel 'executed / queries'\nset yrange [0:1.05]\n"
      << "plot '" << csv << "' using 1:5 with linespoints title 'cumulative', '' using 1:4 with steps title 'window'\n";
  } else if (scenario == "rq2-battery") {
    g << "set logscale xy\nset xlabel 'query'\nset ylabel 'experiments executed'\n"
      << "plot '" << csv << "' using 1:($3+0.5) with points pt 7 title 'executed (+0.5)', '' using 1:5 axes x1y2 "
      << "with lines title 'elapsed s'\n";
  } else {
    g << "set xlabel 'queries'\nset ylabel 'mean latency (ms)'\nset y2label 'stored bytes'\nset y2tics\n"
      << "plot for [s in 'no-store metrics-reuse metrics-no-reuse traces-reuse traces-no-reuse'] '" << csv
      << "' using 2:(stringcolumn(1) eq s ? $3 : 1/0) with linespoints title s.' latency', "
      << "for [s in 'traces-reuse traces-no-reuse'] '' using 2:(stringcolumn(1) eq s ? $5 : 1/0) axes x1y2 "
      << "with lines dt 2 title s.' trace bytes'\n";
  }
  return g.str();
}

void write_outputs(const std::filesystem::path& dir, const std::string& scenario, const std::string& csv, bool plot) {
  std::filesystem::create_directories(dir);
  const auto csv_path = dir / (scenario + ".csv");
  std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
  if (!(out << csv)) throw Error(ErrorCode::IoError, "cannot write " + csv_path.string());
  if (plot) {
    std::ofstream gp(dir / (scenario + ".gp"), std::ios::binary | std::ios::trunc);
    if (!(gp << gnuplot_script(scenario, scenario + ".csv")))
      throw Error(ErrorCode::IoError, "cannot write gnuplot script in " + dir.string());
  }
}

}  // namespace expreuse::eval
