#include <expreuse/config.hpp>
#include <expreuse/error.hpp>
#include <expreuse/eval.hpp>
#include <expreuse/json_codec.hpp>
#include <expreuse/reuse.hpp>
#include <expreuse/service.hpp>

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <sstream>

using namespace expreuse;

namespace {

struct Common {
  std::uint64_t seed = 1;
  std::string scale = "desk";
  std::string out = "eval-out";
  bool plot = false;
  double shadow = 0.01;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app->add_option("--scale", c.scale, "desk or full")->check(CLI::IsMember({"desk", "full"}))->capture_default_str();
  app->add_option("--out", c.out, "Output directory for CSV files")->capture_default_str();
  app->add_flag("--plot", c.plot, "Also write a gnuplot script next to the CSV");
  app->add_option("--shadow", c.shadow, "Fraction of answers re-checked without reuse")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
}

int finish(const std::string& scenario, const std::string& csv, const Common& c,
           const std::vector<std::string>& failures, const std::string& summary) {
  eval::write_outputs(c.out, scenario, csv, c.plot);
  std::cout << summary;
  for (const auto& f : failures) std::cerr << "ASSERTION FAILED: " << f << "\n";
  std::cout << "wrote " << (std::filesystem::path(c.out) / (scenario + ".csv")).string() << "\n";
  return failures.empty() ? 0 : 1;
}

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experiment reuse: query service and evaluation harness"};
  app.require_subcommand(1);

  std::string config_path;
  auto load = [&] {
    Config c = config_path.empty() ? Config{} : load_config(config_path);
    apply_env_overrides(c);
    return c;
  };

  // --- rq1-battery
  Common b1c;
  eval::Rq1BatteryPlan b1;
  std::vector<std::string> b1_thresholds;
  auto* rq1b = app.add_subcommand("rq1-battery", "Experiments executed per threshold set on a battery grid");
  add_common(rq1b, b1c);
  rq1b->add_option("--rounds", b1.rounds, "Repetitions per threshold set")->capture_default_str();
  rq1b->add_option("--thresholds", b1_thresholds,
                   "Threshold sets as V,T,R triples (default: the four standard sets)");
  rq1b->add_option("--batch-size", b1.batch_size, "Requests per reuse batch")->capture_default_str();
  rq1b->add_flag("!--no-symbolic", b1.symbolic, "Disable the instability rule");

  // --- rq1-train
  Common t1c;
  eval::Rq1TrainPlan t1;
  std::string t1_thresholds = "a";
  std::string t1_storage = "metrics";
  bool t1_no_reuse = false;
  auto* rq1t = app.add_subcommand("rq1-train", "Executed/queries ratio over random train safety queries");
  add_common(rq1t, t1c);
  rq1t->add_option("--queries", t1.queries, "Number of queries")->capture_default_str();
  rq1t->add_option("--window", t1.window, "Ratio window")->capture_default_str();
  rq1t->add_option("--thresholds", t1_thresholds, "a, b, c, d, five numbers, or 'off'")->capture_default_str();
  rq1t->add_option("--storage", t1_storage, "none, metrics or traces")->capture_default_str();
  rq1t->add_flag("--no-reuse", t1_no_reuse, "Execute every query");

  // --- rq2-battery
  Common b2c;
  eval::Rq2BatteryPlan b2;
  std::string b2_thresholds = "0,0,0";
  std::string b2_storage = "traces";
  bool b2_no_reuse = false;
  auto* rq2b = app.add_subcommand("rq2-battery", "Repeated random 1000-point sub-box optimisations");
  add_common(rq2b, b2c);
  rq2b->add_option("--queries", b2.queries, "Number of sub-box queries")->capture_default_str();
  rq2b->add_option("--sub", b2.sub, "Points per axis of each sub-box")->capture_default_str();
  rq2b->add_option("--thresholds", b2_thresholds, "V,T,R tolerances")->capture_default_str();
  rq2b->add_option("--storage", b2_storage, "metrics or traces")->capture_default_str();
  rq2b->add_option("--threads", b2.threads, "Executor threads")->capture_default_str();
  rq2b->add_flag("--no-reuse", b2_no_reuse, "Execute every point");

  // --- rq2-train
  Common t2c;
  eval::Rq2TrainPlan t2;
  std::string t2_thresholds = "a";
  std::vector<std::string> t2_setups;
  auto* rq2t = app.add_subcommand("rq2-train", "Answer latency and store growth under five storage setups");
  add_common(rq2t, t2c);
  rq2t->add_option("--queries", t2.queries, "Queries per setup")->capture_default_str();
  rq2t->add_option("--interval", t2.interval, "Queries per reported row")->capture_default_str();
  rq2t->add_option("--thresholds", t2_thresholds, "a, b, c, d, five numbers, or 'off'")->capture_default_str();
  rq2t->add_option("--setups", t2_setups,
                   "Subset of no-store, metrics-reuse, metrics-no-reuse, traces-reuse, traces-no-reuse");

  // --- serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  int port = -1;
  serve->add_option("--port", port, "Override the configured port");

  // --- query
  std::string q_lang;
  std::string q_binding;
  int q_repeat = 1;
  auto* query = app.add_subcommand("query", "Answer one query in-process and print the envelope");
  query->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  query->add_option("language", q_lang, "Query language id")->required();
  query->add_option("binding", q_binding, "Binding as JSON, e.g. '{\"m\":120,...}'")->required();
  query->add_option("--repeat", q_repeat, "Pose the query this many times")->capture_default_str();

  // --- languages
  auto* langs = app.add_subcommand("languages", "Print the registered query languages");
  langs->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);

  // --- check
  std::string journal;
  std::string trace_file;
  auto* check = app.add_subcommand("check", "Replay a store journal and run the consistency check");
  check->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  check->add_option("journal", journal, "Journal file")->required()->check(CLI::ExistingFile);
  check->add_option("--traces", trace_file, "Trace file of the same store");

  CLI11_PARSE(app, argc, argv);

  try {
    if (rq1b->parsed()) {
      if (b1c.scale == "full") b1.box = eval::rq1_full_box();
      b1.seed = b1c.seed;
      b1.shadow_fraction = b1c.shadow;
      if (!b1_thresholds.empty()) {
        b1.thresholds.clear();
        for (const auto& t : b1_thresholds) b1.thresholds.push_back({t, parse_battery_tolerances(t)});
      }
      const auto r = eval::run_rq1_battery(b1);
      std::ostringstream s;
      for (const auto& row : r.rows)
        s << row.thresholds << " round " << row.round << ": executed " << row.executed << " of " << row.grid
          << ", front " << row.front_size << "\n";
      s << "skips audited " << r.skips_audited << ", false skips " << r.false_skips << "\n";
      return finish("rq1-battery", eval::to_csv(r, b1), b1c, r.failures, s.str());
    }
    if (rq1t->parsed()) {
      t1.seed = t1c.seed;
      t1.shadow_fraction = t1c.shadow;
      t1.reuse = !t1_no_reuse;
      t1.storage = parse_storage_mode(t1_storage);
      t1.tolerances = t1_thresholds == "off" ? std::nullopt
                                             : std::optional<train::Tolerances>(parse_train_tolerances(t1_thresholds));
      if (t1c.scale == "full" && rq1t->count("--queries") == 0) t1.queries = 5000;
      const auto r = eval::run_rq1_train(t1);
      std::ostringstream s;
      s << "executed " << r.executed << " for " << t1.queries << " queries, ratio " << r.final_ratio
        << " (first window " << r.first_window_ratio << ")\n";
      return finish("rq1-train", eval::to_csv(r, t1), t1c, r.failures, s.str());
    }
    if (rq2b->parsed()) {
      if (b2c.scale == "full") b2.space = eval::rq2_full_space();
      b2.seed = b2c.seed;
      b2.shadow_fraction = b2c.shadow;
      b2.reuse = !b2_no_reuse;
      b2.tolerances = parse_battery_tolerances(b2_thresholds);
      b2.storage = parse_storage_mode(b2_storage);
      if (b2.storage == StorageMode::None) throw Error(ErrorCode::ConfigError, "rq2-battery needs a store");
      const auto r = eval::run_rq2_battery(b2);
      std::ostringstream s;
      std::uint64_t total = 0;
      for (const auto& row : r.rows) total += row.executed;
      s << "space " << r.space_points << " points, " << r.rows.size() << " queries, executed " << total << "\n";
      return finish("rq2-battery", eval::to_csv(r, b2), b2c, r.failures, s.str());
    }
    if (rq2t->parsed()) {
      t2.seed = t2c.seed;
      t2.shadow_fraction = t2c.shadow;
      t2.tolerances = t2_thresholds == "off" ? std::nullopt
                                             : std::optional<train::Tolerances>(parse_train_tolerances(t2_thresholds));
      if (!t2_setups.empty()) {
        t2.setups.clear();
        for (const auto& s : t2_setups) {
          auto v = eval::parse_store_setup(s);
          if (!v) throw Error(ErrorCode::ConfigError, "unknown setup '" + s + "'");
          t2.setups.push_back(*v);
        }
      }
      const auto r = eval::run_rq2_train(t2);
      std::ostringstream s;
      for (auto setup : t2.setups)
        if (const auto* row = r.last(setup))
          s << eval::to_string(setup) << ": executed " << row->executed << ", last mean latency "
            << row->mean_latency_ms << " ms, trace bytes " << row->trace_bytes << ", record bytes "
            << row->record_bytes << "\n";
      return finish("rq2-train", eval::to_csv(r, t2), t2c, r.failures, s.str());
    }
    if (serve->parsed()) {
      Config c = load();
      if (port >= 0) c.service.port = port;
      Service service(c);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const int bound = service.start();
      std::cout << "listening on http://" << c.service.host << ":" << bound << std::endl;
      service.wait();
      g_service = nullptr;
      return 0;
    }
    if (query->parsed()) {
      Config c = load();
      c.store.journal.clear();
      c.store.trace_file.clear();
      Service service(c);
      int status = 0;
      for (int i = 0; i < q_repeat; ++i) {
        nlohmann::json env{{"languageId", q_lang}, {"binding", nlohmann::json::parse(q_binding)}};
        const auto reply = service.query(env.dump());
        std::cout << reply.body << "\n";
        if (reply.status != 200) status = 2;
      }
      return status;
    }
    if (langs->parsed()) {
      Service service(load());
      std::cout << nlohmann::json::parse(service.languages().body).dump(2) << "\n";
      return 0;
    }
    if (check->parsed()) {
      Config c = load();
      LanguageRegistry registry;
      register_domains(registry, c);
      StoreOptions o;
      o.journal = journal;
      if (!trace_file.empty()) o.traces = std::make_shared<FileTraceStore>(trace_file);
      auto store = ExperimentStore::open(registry, o);
      const auto report = store->consistency_check();
      std::cout << "checked " << report.checked << ", unverifiable " << report.unverifiable << ", violations "
                << report.violations.size() << "\n";
      for (const auto& v : report.violations)
        std::cout << "  (" << v.condition << ") entry " << v.id << ": " << v.detail << "\n";
      return report.clean() ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
