#pragma once

#include <expreuse/clock.hpp>
#include <expreuse/events.hpp>
#include <expreuse/language.hpp>
#include <expreuse/registry.hpp>
#include <expreuse/scheme.hpp>
#include <expreuse/trace_store.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace expreuse {

/// How an entry came to be.
enum class Origin { Pipeline, Symbolic, Recomputed };

std::string_view to_string(Origin o) noexcept;

/// What P keeps of an executed experiment.
enum class StorageMode { None, Metrics, Traces };

std::string_view to_string(StorageMode m) noexcept;

struct Provenance {
  Origin origin = Origin::Pipeline;
  /// Entry the value was justified from (symbolic) or recomputed from.
  EntryId source = 0;
  /// Some fuzzy retrieval contributed to the value, here or further down.
  bool fuzzy = false;
};

struct AnswerEntry {
  EntryId id = 0;
  std::string key;
  Query query;
  Answer answer;
  Features features;
  double at = 0.0;
  Provenance provenance;
  /// Response set of the aggregate record, while it exists, and the F entries that
  /// supplied it.
  std::shared_ptr<const std::vector<RequestResponse>> responses;
  std::vector<EntryId> response_ids;
};

struct ResponseEntry {
  EntryId id = 0;
  std::string key;
  Request request;
  Response response;
  Features features;
  double at = 0.0;
  Provenance provenance;
  /// P entries the response was computed from (empty for symbolic values).
  std::vector<EntryId> results;
};

struct ResultEntry {
  EntryId id = 0;
  std::string key;
  ExperimentSpec spec;
  ResultMeta meta;
  Features features;
  double at = 0.0;
  bool elided = false;
  std::size_t trace_bytes = 0;
  Provenance provenance;
};

enum class ConnectionTag { Decompose, Complete, Compute, Aggregate };

std::string_view to_string(ConnectionTag t) noexcept;

/// Cross-layer record. Field use per tag:
///   decompose  query_key -> request_keys
///   complete   request_keys[0] x query_key -> spec_keys
///   compute    result_ids x request_keys[0] -> response_ids[0]
///   aggregate  (request_keys[i], response_ids[i])... -> answer_id
/// request_keys of an aggregate record are the decomposed requests in order; the
/// response entry supplying each may be a different, fuzzily matched request.
struct Connection {
  EntryId id = 0;
  ConnectionTag tag = ConnectionTag::Decompose;
  std::string query_key;
  std::vector<std::string> request_keys;
  std::vector<std::string> spec_keys;
  std::vector<EntryId> result_ids;
  std::vector<EntryId> response_ids;
  EntryId answer_id = 0;
  double at = 0.0;
};

struct MechanismCounters {
  std::uint64_t direct = 0;
  std::uint64_t symbolic = 0;
  std::uint64_t fuzzy_retrieval = 0;
  std::uint64_t fuzzy_recomputation = 0;
};

struct StoreStats {
  std::size_t answers = 0;
  std::size_t responses = 0;
  std::size_t results = 0;
  std::size_t connections = 0;
  std::uint64_t executed = 0;
  MechanismCounters user;
  MechanismCounters decomposition;
  MechanismCounters execution;
  std::uint64_t trace_bytes = 0;
  /// Serialized length of the live H, F, P and C records.
  std::uint64_t record_bytes = 0;
  std::uint64_t byte_estimate = 0;
  std::uint64_t purged = 0;
  std::uint64_t version = 0;
};

/// Seconds; infinity keeps entries forever.
struct TtlPolicy {
  double answers = kInfinity;
  double responses = kInfinity;
  double results = kInfinity;
};

struct StoreOptions {
  TtlPolicy ttl;
  std::shared_ptr<Clock> clock;         // SystemClock when null
  std::shared_ptr<TraceStore> traces;   // MemoryTraceStore when null
  /// Journal file; empty keeps the reuse cache in memory only.
  std::filesystem::path journal;
};

struct PurgeOptions {
  /// Remove the C records that reference purged entries. Turning this off leaves
  /// dangling records behind; tests use it to provoke condition (iv) violations.
  bool cascade = true;
};

struct Violation {
  int condition = 0;  // 1..4
  EntryId id = 0;
  std::string detail;
};

struct ConsistencyOptions {
  /// Re-execute stored experiments and compare traces (condition iii).
  bool reexecute = true;
};

struct ConsistencyReport {
  std::vector<Violation> violations;
  std::size_t checked = 0;
  /// Entries whose supporting data is gone (purged source, elided traces).
  std::size_t unverifiable = 0;
  [[nodiscard]] bool clean() const { return violations.empty(); }
};

/// The store ⟨H, F, P, C⟩. Reads share a lock; every mutation takes the single
/// writer lock. Scan callbacks run under the read lock and must not call back into
/// the store.
class ExperimentStore {
 public:
  explicit ExperimentStore(const LanguageRegistry& registry, StoreOptions options = {});
  ~ExperimentStore();
  ExperimentStore(const ExperimentStore&) = delete;
  ExperimentStore& operator=(const ExperimentStore&) = delete;

  /// Replays the journal named in `options` (if it exists) and keeps appending to it.
  static std::unique_ptr<ExperimentStore> open(const LanguageRegistry& registry, StoreOptions options);

  // --- H ---------------------------------------------------------------
  EntryId add_Q(const Query& q, const Answer& ans, const Provenance& prov = {});
  [[nodiscard]] std::optional<Answer> get_answer(const Query& q) const;
  [[nodiscard]] std::optional<AnswerEntry> answer_entry(const std::string& key) const;
  [[nodiscard]] std::optional<AnswerEntry> answer_entry(EntryId id) const;
  [[nodiscard]] std::optional<std::vector<RequestResponse>> get_responses(const Query& q) const;

  // --- F ---------------------------------------------------------------
  EntryId add_R(const Request& r, const Response& rsp, const Provenance& prov = {},
                std::vector<EntryId> results = {});
  [[nodiscard]] std::optional<Response> get_response(const Request& r) const;
  [[nodiscard]] std::optional<ResponseEntry> response_entry(const std::string& key) const;
  [[nodiscard]] std::optional<ResponseEntry> response_entry(EntryId id) const;
  /// Results a stored response was computed from; none if any is gone or elided.
  [[nodiscard]] std::optional<std::vector<ExperimentResult>> results_of(EntryId response_id) const;

  // --- P ---------------------------------------------------------------
  EntryId add_E(const ExperimentSpec& spec, const ExperimentResult& res,
                StorageMode mode = StorageMode::Traces, const Provenance& prov = {});
  /// The stored result; traces are empty and `traces_elided` set in metrics mode.
  [[nodiscard]] std::optional<ExperimentResult> get_result(const ExperimentSpec& spec) const;
  [[nodiscard]] std::optional<ExperimentResult> result_by_id(EntryId id) const;
  [[nodiscard]] std::optional<ResultEntry> result_entry(const std::string& key) const;
  [[nodiscard]] std::optional<ResultEntry> result_entry(EntryId id) const;

  // --- C ---------------------------------------------------------------
  /// Throws MalformedConnection if the payload does not fit its tag or references
  /// unknown entries.
  EntryId record_connection(Connection c);
  [[nodiscard]] std::vector<Connection> connections() const;

  // --- scans -----------------------------------------------------------
  /// Visit entries of one language and comparability group in insertion order;
  /// return true from the callback to stop. `sources_only` restricts the scan to
  /// entries accepted by the scheme's justify_source filter.
  void scan_answers(const std::string& language, const std::string& group, bool sources_only,
                    const std::function<bool(const AnswerEntry&)>& fn) const;
  void scan_responses(const std::string& language, const std::string& group, bool sources_only,
                      const std::function<bool(const ResponseEntry&)>& fn) const;
  void scan_results(const std::string& language, const std::string& group, bool sources_only,
                    const std::function<bool(const ResultEntry&)>& fn) const;

  // --- bookkeeping -----------------------------------------------------
  void note_reuse(Layer layer, Mechanism mechanism);
  [[nodiscard]] StoreStats stats() const;
  [[nodiscard]] std::uint64_t version() const;
  [[nodiscard]] double now() const;
  [[nodiscard]] const LanguageRegistry& registry() const { return registry_; }
  [[nodiscard]] std::vector<AnswerEntry> answers() const;
  [[nodiscard]] std::vector<ResponseEntry> responses() const;
  [[nodiscard]] std::vector<ResultEntry> results() const;

  std::size_t purge_ttl(double now, PurgeOptions options = {});
  std::size_t purge_ttl() { return purge_ttl(now()); }
  void set_ttl(TtlPolicy ttl);

  [[nodiscard]] ConsistencyReport consistency_check(ConsistencyOptions options = {}) const;

  /// Rewrites the journal (and a file trace store) with live entries only.
  void compact();

  /// Overwrites a stored response without any checks. Exists to let tests corrupt a
  /// store on purpose.
  void replace_response_unchecked(EntryId id, const Response& rsp);

 private:
  struct Index {
    std::unordered_map<std::string, std::vector<EntryId>> by_group;
    std::unordered_map<std::string, std::vector<EntryId>> sources;
  };

  const LanguageRegistry& registry_;
  StoreOptions options_;
  mutable std::shared_mutex mu_;

  std::map<EntryId, AnswerEntry> h_;
  std::map<EntryId, ResponseEntry> f_;
  std::map<EntryId, ResultEntry> p_;
  std::map<EntryId, Connection> c_;
  std::unordered_map<std::string, EntryId> h_by_key_;
  std::unordered_map<std::string, EntryId> f_by_key_;
  std::unordered_map<std::string, EntryId> p_by_key_;
  std::unordered_map<EntryId, EntryId> aggregate_of_answer_;
  std::unordered_map<EntryId, std::size_t> record_bytes_;  // per live entry or connection
  Index h_index_;
  Index f_index_;
  Index p_index_;

  EntryId next_id_ = 1;
  std::uint64_t executed_ = 0;
  std::uint64_t purged_ = 0;
  std::uint64_t version_ = 0;
  std::uint64_t record_bytes_total_ = 0;
  MechanismCounters counters_[3];

  std::ofstream journal_;
  bool replaying_ = false;
  std::shared_ptr<TraceStore> traces_;
  std::shared_ptr<Clock> clock_;

  // Caller holds the writer lock for everything below.
  EntryId insert_answer(AnswerEntry e);
  EntryId insert_response(ResponseEntry e);
  EntryId insert_result(ResultEntry e, const ExperimentResult* traces);
  EntryId insert_connection(Connection c);
  void validate_connection(const Connection& c) const;
  void erase_connection(EntryId id);
  /// Removes an H, F or P entry or a C record by id; false if none has it.
  bool erase_any(EntryId id);
  void index_answer(const AnswerEntry& e);
  void index_response(const ResponseEntry& e);
  void index_result(const ResultEntry& e);
  void attach_responses(const Connection& c);
  void reindex();
  void account(EntryId id, std::size_t bytes);
  void unaccount(EntryId id);
  void journal_write(const std::string& line);
  void replay_journal();
  static std::string index_key(const std::string& language, const std::string& group);

  void check_answers(ConsistencyReport& report) const;
  void check_responses(ConsistencyReport& report) const;
  void check_results(ConsistencyReport& report, const ConsistencyOptions& options) const;
  void check_connections(ConsistencyReport& report) const;
};

}  // namespace expreuse
