#pragma once

#include <expreuse/events.hpp>
#include <expreuse/registry.hpp>
#include <expreuse/scheme.hpp>
#include <expreuse/store.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace expreuse {

template <class V>
struct ReuseOutcome {
  std::optional<V> value;
  Mechanism mechanism = Mechanism::None;
  /// Stored entry the value came from.
  EntryId matched = 0;
  /// Entry now holding the value for the fresh item (the new one after a symbolic or
  /// recomputation write, the matched one otherwise).
  EntryId entry = 0;
  double distance = 0.0;
  bool fuzzy = false;
};

struct LayerSummary {
  std::uint64_t direct = 0;
  std::uint64_t symbolic = 0;
  std::uint64_t fuzzy_retrieval = 0;
  std::uint64_t fuzzy_recomputation = 0;
  std::uint64_t misses = 0;

  void count(Mechanism m);
};

struct ReuseSummary {
  LayerSummary user;
  LayerSummary decomposition;
  LayerSummary execution;
  std::uint64_t requests = 0;
  std::uint64_t executed = 0;
};

struct ProcessOptions {
  bool reuse = true;
  StorageMode storage = StorageMode::Traces;
  /// Requests checked against the store before the pending ones execute. 0 puts the
  /// whole decomposition in one batch.
  std::size_t batch_size = 0;
  /// Shuffles the request order when set.
  std::optional<std::uint64_t> shuffle_seed;
  unsigned threads = 1;
};

struct ProcessResult {
  Answer answer;
  ReuseSummary summary;
  /// Some fuzzy retrieval contributed to the answer.
  bool fuzzy = false;
  Mechanism user_mechanism = Mechanism::None;
};

/// The four reuse mechanisms on each layer and the overall three-layer process.
/// A null store runs the plain pipeline.
class ReuseEngine {
 public:
  ReuseEngine(const LanguageRegistry& registry, ExperimentStore* store, EventLog* events = nullptr);

  ReuseOutcome<Answer> reuse_user(const Query& q);
  ReuseOutcome<Response> reuse_decomposition(const Request& r, const std::string& query_key = {});
  ReuseOutcome<ExperimentResult> reuse_execution(const ExperimentSpec& e);

  /// Throws ExecutionFailure when an executor fails; responses already written for
  /// sibling requests stay in the store.
  ProcessResult process(const Query& q, const ProcessOptions& options = {});

 private:
  const LanguageRegistry& registry_;
  ExperimentStore* store_;
  EventLog* events_;

  void emit(Layer layer, Mechanism m, double distance, EntryId matched, const std::string& key,
            const std::string& query_key);
};

// ---------------------------------------------------------------------------
// Insensitivity checks
// ---------------------------------------------------------------------------

struct InsensitivityViolation {
  std::size_t pair = 0;
  double input_distance = 0.0;
  double output_distance = 0.0;
};

struct InsensitivityReport {
  std::size_t sampled = 0;
  /// Pairs within the threshold, i.e. the ones actually checked.
  std::size_t checked = 0;
  std::vector<InsensitivityViolation> violations;
  [[nodiscard]] bool passed() const { return violations.empty(); }
};

/// For every sampled pair whose get distance is below t_get, the distance between the
/// true values (from `oracle`) must be below `t`.
template <class Item, class Val>
InsensitivityReport check_insensitivity(const ReasoningScheme<Item, Val>& scheme,
                                        std::span<const std::pair<Item, Item>> pairs,
                                        const std::function<Val(const Item&)>& oracle,
                                        const std::function<double(const Val&, const Val&)>& value_distance,
                                        double t) {
  InsensitivityReport report;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    ++report.sampled;
    const auto fa = scheme.featurize(pairs[i].first);
    const auto fb = scheme.featurize(pairs[i].second);
    const double d = scheme.get_distance ? scheme.get_distance(fa, fb) : kInfinity;
    if (!(d < scheme.t_get)) continue;
    ++report.checked;
    const double out = value_distance(oracle(pairs[i].first), oracle(pairs[i].second));
    if (!(out < t)) report.violations.push_back({i, d, out});
  }
  return report;
}

/// Aggregate-insensitivity: for pairs within the comp threshold, aggregating the
/// first query's true responses for either query must give answers closer than `t`.
InsensitivityReport check_aggregate_insensitivity(
    const LanguageRegistry& registry, const QueryScheme& scheme,
    std::span<const std::pair<Query, Query>> pairs,
    const std::function<double(const Answer&, const Answer&)>& answer_distance, double t);

}  // namespace expreuse
