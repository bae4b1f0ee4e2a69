#pragma once

#include <expreuse/battery.hpp>
#include <expreuse/registry.hpp>
#include <expreuse/reuse.hpp>
#include <expreuse/store.hpp>
#include <expreuse/train.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace expreuse::eval {

/// Uniform sampling over the train evaluation box.
struct TrainBox {
  double m_min = 100, m_max = 20000;
  double fb_min = 0.02, fb_max = 2.5;
  double v_min = 10, v_max = 600;
  double mu_min = 0, mu_max = 1;
  double theta_min = -25, theta_max = 25;
  double dist_min = 200, dist_max = 2000;
};

struct TrainSample {
  train::TrainParams params;
  double dist = 0.0;
};

TrainSample sample_train(std::mt19937_64& rng, const TrainBox& box = {});

/// Re-answers a sample of queries with reuse disabled.
struct ShadowReport {
  std::size_t sampled = 0;
  std::size_t compared = 0;
  /// Sampled answers that involved fuzzy retrieval and so were not compared.
  std::size_t fuzzy = 0;
  std::size_t mismatches = 0;
};

/// Samples each answered query with probability `fraction`; compares the
/// answer with the plain pipeline unless it is fuzzy.
class ShadowOracle {
 public:
  ShadowOracle(const LanguageRegistry& registry, double fraction, std::uint64_t seed);
  void observe(const Query& q, const ProcessResult& r);
  [[nodiscard]] const ShadowReport& report() const { return report_; }

 private:
  const LanguageRegistry& registry_;
  std::bernoulli_distribution pick_;
  std::mt19937_64 rng_;
  ShadowReport report_;
};

struct NamedBatteryTolerances {
  std::string name;
  battery::Tolerances t{0, 0, 0};
};

/// The four threshold sets of the battery evaluation, smallest first.
std::vector<NamedBatteryTolerances> battery_threshold_sets();

/// 10 x 10 x 5 grid over the RQ1 space.
BoxConstraint rq1_desk_box();
/// The full RQ1 space, 100 x 100 x 49.
BoxConstraint rq1_full_box();
/// 20 x 20 x 25 space for sub-box queries.
BoxConstraint rq2_desk_space();
/// The full RQ2 space, 40 x 60 x 49.
BoxConstraint rq2_full_space();

// --- rq1-battery ----------------------------------------------------------

struct Rq1BatteryPlan {
  std::uint64_t seed = 1;
  int rounds = 3;
  BoxConstraint box = rq1_desk_box();
  std::vector<NamedBatteryTolerances> thresholds = battery_threshold_sets();
  std::size_t batch_size = 1;
  bool symbolic = true;
  double shadow_fraction = 0.01;
  unsigned threads = 1;
};

struct Rq1BatteryRow {
  std::string thresholds;
  battery::Tolerances t{};
  int round = 0;
  std::size_t grid = 0;
  std::uint64_t executed = 0;
  std::uint64_t symbolic = 0;
  std::uint64_t fuzzy = 0;
  std::size_t front_size = 0;
  double elapsed_s = 0.0;
};

struct Rq1BatteryReport {
  std::vector<Rq1BatteryRow> rows;
  /// Symbolically skipped responses that were re-simulated, and those that were stable.
  std::size_t skips_audited = 0;
  std::size_t false_skips = 0;
  ShadowReport shadow;
  std::vector<std::string> failures;
};

Rq1BatteryReport run_rq1_battery(const Rq1BatteryPlan& plan);

// --- rq1-train ------------------------------------------------------------

struct Rq1TrainPlan {
  std::uint64_t seed = 1;
  std::size_t queries = 5000;
  std::size_t window = 500;
  std::optional<train::Tolerances> tolerances = train::kThresholdSetA;
  bool reuse = true;
  StorageMode storage = StorageMode::Metrics;
  double shadow_fraction = 0.01;
  TrainBox box;
};

struct Rq1TrainRow {
  std::size_t end = 0;  // queries answered so far
  std::uint64_t window_executed = 0;
  std::uint64_t executed = 0;
  double window_ratio = 0.0;
  double ratio = 0.0;
};

struct Rq1TrainReport {
  std::vector<Rq1TrainRow> rows;
  std::uint64_t executed = 0;
  double final_ratio = 0.0;
  double first_window_ratio = 0.0;
  ShadowReport shadow;
  std::vector<std::string> failures;
};

Rq1TrainReport run_rq1_train(const Rq1TrainPlan& plan);

// --- rq2-battery ----------------------------------------------------------

struct Rq2BatteryPlan {
  std::uint64_t seed = 1;
  std::size_t queries = 40;
  BoxConstraint space = rq2_desk_space();
  /// Lattice points per axis of each sub-box query.
  std::size_t sub = 10;
  bool reuse = true;
  battery::Tolerances tolerances{0, 0, 0};
  bool symbolic = true;
  StorageMode storage = StorageMode::Traces;
  double shadow_fraction = 0.01;
  unsigned threads = 1;
};

struct Rq2BatteryRow {
  std::size_t index = 0;  // 1-based
  std::size_t requests = 0;
  std::uint64_t executed = 0;
  std::size_t front_size = 0;
  double elapsed_s = 0.0;
};

struct Rq2BatteryReport {
  std::size_t space_points = 0;
  std::vector<Rq2BatteryRow> rows;
  ShadowReport shadow;
  std::vector<std::string> failures;
};

Rq2BatteryReport run_rq2_battery(const Rq2BatteryPlan& plan);

// --- rq2-train ------------------------------------------------------------

enum class StoreSetup { NoStore, MetricsReuse, MetricsNoReuse, TracesReuse, TracesNoReuse };

std::string_view to_string(StoreSetup s) noexcept;
std::optional<StoreSetup> parse_store_setup(std::string_view s);

struct Rq2TrainPlan {
  std::uint64_t seed = 1;
  std::size_t queries = 2000;
  std::size_t interval = 100;
  std::vector<StoreSetup> setups = {StoreSetup::NoStore, StoreSetup::MetricsReuse, StoreSetup::MetricsNoReuse,
                                    StoreSetup::TracesReuse, StoreSetup::TracesNoReuse};
  std::optional<train::Tolerances> tolerances = train::kThresholdSetA;
  double shadow_fraction = 0.01;
  TrainBox box;
};

struct Rq2TrainRow {
  StoreSetup setup = StoreSetup::NoStore;
  std::size_t end = 0;
  double mean_latency_ms = 0.0;  // over the interval
  std::uint64_t executed = 0;
  std::uint64_t trace_bytes = 0;
  std::uint64_t record_bytes = 0;
};

struct Rq2TrainReport {
  std::vector<Rq2TrainRow> rows;
  ShadowReport shadow;
  std::vector<std::string> failures;
  /// Final row per setup.
  [[nodiscard]] const Rq2TrainRow* last(StoreSetup s) const;
};

Rq2TrainReport run_rq2_train(const Rq2TrainPlan& plan);

// --- output ---------------------------------------------------------------

std::string to_csv(const Rq1BatteryReport& r, const Rq1BatteryPlan& plan);
std::string to_csv(const Rq1TrainReport& r, const Rq1TrainPlan& plan);
std::string to_csv(const Rq2BatteryReport& r, const Rq2BatteryPlan& plan);
std::string to_csv(const Rq2TrainReport& r, const Rq2TrainPlan& plan);

/// gnuplot script plotting the CSV written next to it.
std::string gnuplot_script(const std::string& scenario, const std::string& csv_file);

/// Writes `<dir>/<scenario>.csv` and, when `plot` is set, `<dir>/<scenario>.gp`.
void write_outputs(const std::filesystem::path& dir, const std::string& scenario, const std::string& csv, bool plot);

}  // namespace expreuse::eval
