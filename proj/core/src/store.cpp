#include <expreuse/store.hpp>

#include <expreuse/error.hpp>
#include <expreuse/json_codec.hpp>

#include <algorithm>
#include <mutex>
#include <set>
#include <unordered_set>

namespace expreuse {

using codec::json;

std::string_view to_string(Origin o) noexcept {
  switch (o) {
    case Origin::Pipeline: return "pipeline";
    case Origin::Symbolic: return "symbolic";
    case Origin::Recomputed: return "recomputed";
  }
  return "?";
}

std::string_view to_string(StorageMode m) noexcept {
  switch (m) {
    case StorageMode::None: return "none";
    case StorageMode::Metrics: return "metrics";
    case StorageMode::Traces: return "traces";
  }
  return "?";
}

std::string_view to_string(ConnectionTag t) noexcept {
  switch (t) {
    case ConnectionTag::Decompose: return "decompose";
    case ConnectionTag::Complete: return "complete";
    case ConnectionTag::Compute: return "compute";
    case ConnectionTag::Aggregate: return "aggregate";
  }
  return "?";
}

namespace {

constexpr const char* kRecordPrefix = "R1 ";

Origin origin_from(const std::string& s) {
  if (s == "pipeline") return Origin::Pipeline;
  if (s == "symbolic") return Origin::Symbolic;
  if (s == "recomputed") return Origin::Recomputed;
  throw Error(ErrorCode::IoError, "journal: unknown origin '" + s + "'");
}

ConnectionTag tag_from(const std::string& s) {
  if (s == "decompose") return ConnectionTag::Decompose;
  if (s == "complete") return ConnectionTag::Complete;
  if (s == "compute") return ConnectionTag::Compute;
  if (s == "aggregate") return ConnectionTag::Aggregate;
  throw Error(ErrorCode::IoError, "journal: unknown connection tag '" + s + "'");
}

json prov_json(const Provenance& p) { return {{"o", to_string(p.origin)}, {"s", p.source}, {"f", p.fuzzy}}; }

Provenance prov_from(const json& j) {
  return {origin_from(j.at("o").get<std::string>()), j.at("s").get<EntryId>(), j.at("f").get<bool>()};
}

json answer_record(const AnswerEntry& e) {
  return {{"t", "H"}, {"id", e.id}, {"at", format_double(e.at)}, {"query", codec::to_json(e.query)},
          {"answer", codec::to_json(e.answer)}, {"prov", prov_json(e.provenance)}};
}

json response_record(const ResponseEntry& e) {
  return {{"t", "F"}, {"id", e.id}, {"at", format_double(e.at)}, {"request", codec::to_json(e.request)},
          {"response", codec::to_json(e.response)}, {"prov", prov_json(e.provenance)}, {"results", e.results}};
}

json result_record(const ResultEntry& e) {
  return {{"t", "P"}, {"id", e.id}, {"at", format_double(e.at)}, {"spec", codec::to_json(e.spec)},
          {"meta", codec::to_json(e.meta)}, {"elided", e.elided}, {"trace_bytes", e.trace_bytes},
          {"prov", prov_json(e.provenance)}};
}

json connection_record(const Connection& c) {
  return {{"t", "C"},          {"id", c.id},           {"at", format_double(c.at)}, {"tag", to_string(c.tag)},
          {"q", c.query_key},  {"req", c.request_keys}, {"spec", c.spec_keys},     {"res", c.result_ids},
          {"rsp", c.response_ids}, {"ans", c.answer_id}};
}

std::string framed(const json& j) {
  const std::string body = j.dump();
  return kRecordPrefix + std::to_string(body.size()) + " " + body + "\n";
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentStore::ExperimentStore(const LanguageRegistry& registry, StoreOptions options)
    : registry_(registry), options_(std::move(options)) {
  traces_ = options_.traces ? options_.traces : std::make_shared<MemoryTraceStore>();
  clock_ = options_.clock ? options_.clock : std::make_shared<SystemClock>();
  if (!options_.journal.empty()) {
    if (options_.journal.has_parent_path()) std::filesystem::create_directories(options_.journal.parent_path());
    if (std::filesystem::exists(options_.journal)) replay_journal();
    journal_.open(options_.journal, std::ios::binary | std::ios::app);
    if (!journal_) throw Error(ErrorCode::IoError, "cannot open journal '" + options_.journal.string() + "'");
  }
}

ExperimentStore::~ExperimentStore() = default;

std::unique_ptr<ExperimentStore> ExperimentStore::open(const LanguageRegistry& registry, StoreOptions options) {
  return std::make_unique<ExperimentStore>(registry, std::move(options));
}

std::string ExperimentStore::index_key(const std::string& language, const std::string& group) {
  return language + '\x1f' + group;
}

void ExperimentStore::account(EntryId id, std::size_t bytes) {
  record_bytes_[id] = bytes;
  record_bytes_total_ += bytes;
}

void ExperimentStore::unaccount(EntryId id) {
  auto it = record_bytes_.find(id);
  if (it == record_bytes_.end()) return;
  record_bytes_total_ -= it->second;
  record_bytes_.erase(it);
}

void ExperimentStore::journal_write(const std::string& line) {
  if (replaying_ || !journal_.is_open()) return;
  journal_.write(line.data(), static_cast<std::streamsize>(line.size()));
  journal_.flush();
  if (!journal_) throw Error(ErrorCode::IoError, "journal write failed");
}

// --- indexing ---------------------------------------------------------------

void ExperimentStore::index_answer(const AnswerEntry& e) {
  const auto k = index_key(e.query.language, e.features.group);
  h_index_.by_group[k].push_back(e.id);
  const auto* s = registry_.query_scheme(e.query.language);
  if (s && s->justify_source && s->justify_source(e.answer)) h_index_.sources[k].push_back(e.id);
}

void ExperimentStore::index_response(const ResponseEntry& e) {
  const auto k = index_key(e.request.language, e.features.group);
  f_index_.by_group[k].push_back(e.id);
  const auto* s = registry_.request_scheme(e.request.language);
  if (s && s->justify_source && s->justify_source(e.response)) f_index_.sources[k].push_back(e.id);
}

void ExperimentStore::index_result(const ResultEntry& e) {
  const auto k = index_key(e.spec.language, e.features.group);
  p_index_.by_group[k].push_back(e.id);
  const auto* s = registry_.spec_scheme(e.spec.language);
  if (s && s->justify_source) {
    ExperimentResult meta_only;
    meta_only.meta = e.meta;
    meta_only.traces_elided = true;
    if (s->justify_source(meta_only)) p_index_.sources[k].push_back(e.id);
  }
}

void ExperimentStore::reindex() {
  h_index_ = {};
  f_index_ = {};
  p_index_ = {};
  for (const auto& [_, e] : h_) index_answer(e);
  for (const auto& [_, e] : f_) index_response(e);
  for (const auto& [_, e] : p_) index_result(e);
}

// --- inserts ----------------------------------------------------------------

EntryId ExperimentStore::insert_answer(AnswerEntry e) {
  const auto line = framed(answer_record(e));
  journal_write(line);
  account(e.id, line.size());
  h_by_key_[e.key] = e.id;
  index_answer(e);
  next_id_ = std::max(next_id_, e.id + 1);
  ++version_;
  const EntryId id = e.id;
  h_.emplace(id, std::move(e));
  return id;
}

EntryId ExperimentStore::insert_response(ResponseEntry e) {
  const auto line = framed(response_record(e));
  journal_write(line);
  account(e.id, line.size());
  f_by_key_[e.key] = e.id;
  index_response(e);
  next_id_ = std::max(next_id_, e.id + 1);
  ++version_;
  const EntryId id = e.id;
  f_.emplace(id, std::move(e));
  return id;
}

EntryId ExperimentStore::insert_result(ResultEntry e, const ExperimentResult* traces) {
  if (traces && !e.elided) traces_->put(e.id, *traces);
  const auto line = framed(result_record(e));
  journal_write(line);
  account(e.id, line.size());
  p_by_key_[e.key] = e.id;
  index_result(e);
  next_id_ = std::max(next_id_, e.id + 1);
  if (e.provenance.origin == Origin::Pipeline) ++executed_;
  ++version_;
  const EntryId id = e.id;
  p_.emplace(id, std::move(e));
  return id;
}

void ExperimentStore::attach_responses(const Connection& c) {
  auto h = h_.find(c.answer_id);
  if (h == h_.end()) return;
  std::unordered_map<std::string, Request> decomposed;
  for (auto& r : decompose(registry_, h->second.query)) {
    auto k = r.key();
    decomposed.emplace(std::move(k), std::move(r));
  }
  auto rs = std::make_shared<std::vector<RequestResponse>>();
  rs->reserve(c.request_keys.size());
  for (std::size_t i = 0; i < c.request_keys.size(); ++i) {
    auto req = decomposed.find(c.request_keys[i]);
    auto rsp = f_.find(c.response_ids[i]);
    if (req == decomposed.end() || rsp == f_.end())
      throw Error(ErrorCode::MalformedConnection, "aggregate record does not match the decomposition of " + h->second.key);
    rs->push_back({req->second, rsp->second.response});
  }
  h->second.responses = std::move(rs);
  h->second.response_ids = c.response_ids;
  aggregate_of_answer_[c.answer_id] = c.id;
}

EntryId ExperimentStore::insert_connection(Connection c) {
  const auto line = framed(connection_record(c));
  journal_write(line);
  account(c.id, line.size());
  next_id_ = std::max(next_id_, c.id + 1);
  if (c.tag == ConnectionTag::Aggregate) attach_responses(c);
  ++version_;
  const EntryId id = c.id;
  c_.emplace(id, std::move(c));
  return id;
}

void ExperimentStore::validate_connection(const Connection& c) const {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::MalformedConnection, std::string(to_string(c.tag)) + " record: " + why);
  };
  switch (c.tag) {
    case ConnectionTag::Decompose:
      if (c.query_key.empty() || c.request_keys.empty()) fail("needs a query and at least one request");
      break;
    case ConnectionTag::Complete:
      if (c.request_keys.size() != 1 || c.spec_keys.empty()) fail("needs one request and at least one spec");
      if (!f_by_key_.count(c.request_keys[0])) fail("unknown request " + c.request_keys[0]);
      break;
    case ConnectionTag::Compute:
      if (c.request_keys.size() != 1 || c.response_ids.size() != 1 || c.result_ids.empty())
        fail("needs results, one request and one response");
      for (auto id : c.result_ids)
        if (!p_.count(id)) fail("unknown result id " + std::to_string(id));
      {
        auto f = f_.find(c.response_ids[0]);
        if (f == f_.end()) fail("unknown response id " + std::to_string(c.response_ids[0]));
        if (f->second.key != c.request_keys[0]) fail("response does not belong to " + c.request_keys[0]);
      }
      break;
    case ConnectionTag::Aggregate:
      if (c.request_keys.empty() || c.request_keys.size() != c.response_ids.size())
        fail("needs one response per decomposed request");
      if (!h_.count(c.answer_id)) fail("unknown answer id " + std::to_string(c.answer_id));
      for (auto id : c.response_ids)
        if (!f_.count(id)) fail("unknown response id " + std::to_string(id));
      break;
  }
}

// --- H ----------------------------------------------------------------------

EntryId ExperimentStore::add_Q(const Query& raw, const Answer& ans, const Provenance& prov) {
  const Query q = registry_.canonicalize(raw);
  validate_query(registry_, q);
  const auto& lang = registry_.query_language(q.language);
  if ((lang.answer == AnswerKind::Boolean) != std::holds_alternative<bool>(ans))
    throw Error(ErrorCode::DomainViolation, q.key() + ": answer of the wrong kind");
  const auto* scheme = registry_.query_scheme(q.language);
  AnswerEntry e;
  e.key = q.key();
  e.query = q;
  e.answer = ans;
  e.features = scheme ? scheme->featurize(q) : Features{};
  e.provenance = prov;
  std::unique_lock lock(mu_);
  if (auto it = h_by_key_.find(e.key); it != h_by_key_.end()) {
    if (h_.at(it->second).answer == ans) return it->second;
    throw Error(ErrorCode::DuplicateKeyWithDifferentValue, e.key + ": stored " + canonical(h_.at(it->second).answer) +
                                                               ", new " + canonical(ans));
  }
  e.id = next_id_++;
  e.at = clock_->now();
  return insert_answer(std::move(e));
}

std::optional<Answer> ExperimentStore::get_answer(const Query& q) const {
  const auto key = registry_.canonicalize(q).key();
  std::shared_lock lock(mu_);
  auto it = h_by_key_.find(key);
  if (it == h_by_key_.end()) return std::nullopt;
  return h_.at(it->second).answer;
}

std::optional<AnswerEntry> ExperimentStore::answer_entry(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = h_by_key_.find(key);
  if (it == h_by_key_.end()) return std::nullopt;
  return h_.at(it->second);
}

std::optional<AnswerEntry> ExperimentStore::answer_entry(EntryId id) const {
  std::shared_lock lock(mu_);
  auto it = h_.find(id);
  if (it == h_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::vector<RequestResponse>> ExperimentStore::get_responses(const Query& q) const {
  const auto key = registry_.canonicalize(q).key();
  std::shared_lock lock(mu_);
  auto it = h_by_key_.find(key);
  if (it == h_by_key_.end()) return std::nullopt;
  const auto& e = h_.at(it->second);
  if (!e.responses || !aggregate_of_answer_.count(e.id)) return std::nullopt;
  return *e.responses;
}

// --- F ----------------------------------------------------------------------

EntryId ExperimentStore::add_R(const Request& r, const Response& rsp, const Provenance& prov,
                               std::vector<EntryId> results) {
  validate_request(registry_, r);
  const auto* scheme = registry_.request_scheme(r.language);
  ResponseEntry e;
  e.key = r.key();
  e.request = r;
  e.response = rsp;
  e.features = scheme ? scheme->featurize(r) : Features{};
  e.provenance = prov;
  e.results = std::move(results);
  std::unique_lock lock(mu_);
  if (auto it = f_by_key_.find(e.key); it != f_by_key_.end()) {
    if (f_.at(it->second).response == rsp) return it->second;
    throw Error(ErrorCode::DuplicateKeyWithDifferentValue, e.key + ": stored " + f_.at(it->second).response.canonical() +
                                                               ", new " + rsp.canonical());
  }
  for (auto id : e.results)
    if (!p_.count(id)) throw Error(ErrorCode::MalformedConnection, e.key + ": unknown result id " + std::to_string(id));
  e.id = next_id_++;
  e.at = clock_->now();
  return insert_response(std::move(e));
}

std::optional<Response> ExperimentStore::get_response(const Request& r) const {
  const auto key = r.key();
  std::shared_lock lock(mu_);
  auto it = f_by_key_.find(key);
  if (it == f_by_key_.end()) return std::nullopt;
  return f_.at(it->second).response;
}

std::optional<ResponseEntry> ExperimentStore::response_entry(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = f_by_key_.find(key);
  if (it == f_by_key_.end()) return std::nullopt;
  return f_.at(it->second);
}

std::optional<ResponseEntry> ExperimentStore::response_entry(EntryId id) const {
  std::shared_lock lock(mu_);
  auto it = f_.find(id);
  if (it == f_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::vector<ExperimentResult>> ExperimentStore::results_of(EntryId response_id) const {
  std::shared_lock lock(mu_);
  auto it = f_.find(response_id);
  if (it == f_.end() || it->second.results.empty()) return std::nullopt;
  std::vector<ExperimentResult> out;
  for (auto rid : it->second.results) {
    auto p = p_.find(rid);
    if (p == p_.end() || p->second.elided) return std::nullopt;
    auto res = traces_->get(rid);
    if (!res) return std::nullopt;
    res->meta = p->second.meta;
    out.push_back(std::move(*res));
  }
  return out;
}

// --- P ----------------------------------------------------------------------

EntryId ExperimentStore::add_E(const ExperimentSpec& spec, const ExperimentResult& res, StorageMode mode,
                               const Provenance& prov) {
  if (mode == StorageMode::None) return 0;
  const auto* scheme = registry_.spec_scheme(spec.language);
  ResultEntry e;
  e.key = spec.key();
  e.spec = spec;
  e.meta = res.meta;
  e.meta.spec_key = e.key;
  e.features = scheme ? scheme->featurize(spec) : Features{};
  e.elided = mode == StorageMode::Metrics || res.traces_elided;
  e.trace_bytes = e.elided ? 0 : trace_block_size(res);
  e.provenance = prov;
  std::unique_lock lock(mu_);
  if (auto it = p_by_key_.find(e.key); it != p_by_key_.end()) {
    const auto& old = p_.at(it->second);
    if (!old.elided && !e.elided) {
      auto stored = traces_->get(old.id);
      if (stored && stored->traces != res.traces)
        throw Error(ErrorCode::DuplicateKeyWithDifferentValue, e.key + ": stored traces differ from the new result");
    }
    return old.id;
  }
  e.id = next_id_++;
  e.at = clock_->now();
  return insert_result(std::move(e), &res);
}

std::optional<ExperimentResult> ExperimentStore::get_result(const ExperimentSpec& spec) const {
  const auto key = spec.key();
  std::optional<EntryId> id;
  {
    std::shared_lock lock(mu_);
    auto it = p_by_key_.find(key);
    if (it == p_by_key_.end()) return std::nullopt;
    id = it->second;
  }
  return result_by_id(*id);
}

std::optional<ExperimentResult> ExperimentStore::result_by_id(EntryId id) const {
  std::shared_lock lock(mu_);
  auto it = p_.find(id);
  if (it == p_.end()) return std::nullopt;
  ExperimentResult out;
  if (!it->second.elided) {
    if (auto stored = traces_->get(id)) out = std::move(*stored);
    else out.traces_elided = true;
  } else {
    out.traces_elided = true;
  }
  out.meta = it->second.meta;
  return out;
}

std::optional<ResultEntry> ExperimentStore::result_entry(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = p_by_key_.find(key);
  if (it == p_by_key_.end()) return std::nullopt;
  return p_.at(it->second);
}

std::optional<ResultEntry> ExperimentStore::result_entry(EntryId id) const {
  std::shared_lock lock(mu_);
  auto it = p_.find(id);
  if (it == p_.end()) return std::nullopt;
  return it->second;
}

// --- C ----------------------------------------------------------------------

EntryId ExperimentStore::record_connection(Connection c) {
  std::unique_lock lock(mu_);
  validate_connection(c);
  if (c.tag == ConnectionTag::Aggregate) {
    auto existing = aggregate_of_answer_.find(c.answer_id);
    if (existing != aggregate_of_answer_.end()) return existing->second;
  }
  c.id = next_id_++;
  c.at = clock_->now();
  return insert_connection(std::move(c));
}

std::vector<Connection> ExperimentStore::connections() const {
  std::shared_lock lock(mu_);
  std::vector<Connection> out;
  out.reserve(c_.size());
  for (const auto& [_, c] : c_) out.push_back(c);
  return out;
}

// --- scans ------------------------------------------------------------------

namespace {
const std::vector<EntryId>* pick(const std::unordered_map<std::string, std::vector<EntryId>>& by_group,
                                 const std::unordered_map<std::string, std::vector<EntryId>>& sources,
                                 const std::string& key, bool sources_only, bool filtered) {
  const auto& m = sources_only && filtered ? sources : by_group;
  auto it = m.find(key);
  return it == m.end() ? nullptr : &it->second;
}
}  // namespace

void ExperimentStore::scan_answers(const std::string& language, const std::string& group, bool sources_only,
                                   const std::function<bool(const AnswerEntry&)>& fn) const {
  const auto* s = registry_.query_scheme(language);
  std::shared_lock lock(mu_);
  const auto* ids = pick(h_index_.by_group, h_index_.sources, index_key(language, group), sources_only,
                         s && s->justify_source);
  if (!ids) return;
  for (auto id : *ids)
    if (fn(h_.at(id))) return;
}

void ExperimentStore::scan_responses(const std::string& language, const std::string& group, bool sources_only,
                                     const std::function<bool(const ResponseEntry&)>& fn) const {
  const auto* s = registry_.request_scheme(language);
  std::shared_lock lock(mu_);
  const auto* ids = pick(f_index_.by_group, f_index_.sources, index_key(language, group), sources_only,
                         s && s->justify_source);
  if (!ids) return;
  for (auto id : *ids)
    if (fn(f_.at(id))) return;
}

void ExperimentStore::scan_results(const std::string& language, const std::string& group, bool sources_only,
                                   const std::function<bool(const ResultEntry&)>& fn) const {
  const auto* s = registry_.spec_scheme(language);
  std::shared_lock lock(mu_);
  const auto* ids = pick(p_index_.by_group, p_index_.sources, index_key(language, group), sources_only,
                         s && s->justify_source);
  if (!ids) return;
  for (auto id : *ids)
    if (fn(p_.at(id))) return;
}

// --- bookkeeping ------------------------------------------------------------

void ExperimentStore::note_reuse(Layer layer, Mechanism m) {
  std::unique_lock lock(mu_);
  auto& c = counters_[static_cast<int>(layer)];
  switch (m) {
    case Mechanism::Direct: ++c.direct; break;
    case Mechanism::Symbolic: ++c.symbolic; break;
    case Mechanism::FuzzyRetrieval: ++c.fuzzy_retrieval; break;
    case Mechanism::FuzzyRecomputation: ++c.fuzzy_recomputation; break;
    default: break;
  }
}

StoreStats ExperimentStore::stats() const {
  std::shared_lock lock(mu_);
  StoreStats s;
  s.answers = h_.size();
  s.responses = f_.size();
  s.results = p_.size();
  s.connections = c_.size();
  s.executed = executed_;
  s.user = counters_[0];
  s.decomposition = counters_[1];
  s.execution = counters_[2];
  for (const auto& [_, e] : p_) s.trace_bytes += e.elided ? 0 : e.trace_bytes;
  s.record_bytes = record_bytes_total_;
  s.byte_estimate = s.trace_bytes + s.record_bytes;
  s.purged = purged_;
  s.version = version_;
  return s;
}

std::uint64_t ExperimentStore::version() const {
  std::shared_lock lock(mu_);
  return version_;
}

double ExperimentStore::now() const { return clock_->now(); }

std::vector<AnswerEntry> ExperimentStore::answers() const {
  std::shared_lock lock(mu_);
  std::vector<AnswerEntry> out;
  for (const auto& [_, e] : h_) out.push_back(e);
  return out;
}

std::vector<ResponseEntry> ExperimentStore::responses() const {
  std::shared_lock lock(mu_);
  std::vector<ResponseEntry> out;
  for (const auto& [_, e] : f_) out.push_back(e);
  return out;
}

std::vector<ResultEntry> ExperimentStore::results() const {
  std::shared_lock lock(mu_);
  std::vector<ResultEntry> out;
  for (const auto& [_, e] : p_) out.push_back(e);
  return out;
}

// --- removal ----------------------------------------------------------------

void ExperimentStore::erase_connection(EntryId id) {
  auto it = c_.find(id);
  if (it == c_.end()) return;
  if (it->second.tag == ConnectionTag::Aggregate) {
    auto a = aggregate_of_answer_.find(it->second.answer_id);
    if (a != aggregate_of_answer_.end() && a->second == id) {
      aggregate_of_answer_.erase(a);
      if (auto h = h_.find(it->second.answer_id); h != h_.end()) {
        h->second.responses.reset();
        h->second.response_ids.clear();
      }
    }
  }
  unaccount(id);
  c_.erase(it);
}

bool ExperimentStore::erase_any(EntryId id) {
  if (auto it = h_.find(id); it != h_.end()) {
    h_by_key_.erase(it->second.key);
    aggregate_of_answer_.erase(id);
    h_.erase(it);
  } else if (auto f = f_.find(id); f != f_.end()) {
    f_by_key_.erase(f->second.key);
    f_.erase(f);
  } else if (auto p = p_.find(id); p != p_.end()) {
    p_by_key_.erase(p->second.key);
    traces_->erase(id);
    p_.erase(p);
  } else if (c_.count(id)) {
    erase_connection(id);
    return true;
  } else {
    return false;
  }
  unaccount(id);
  return true;
}

std::size_t ExperimentStore::purge_ttl(double now, PurgeOptions options) {
  std::unique_lock lock(mu_);
  const auto& ttl = options_.ttl;
  std::unordered_set<EntryId> gone;
  std::unordered_set<std::string> gone_queries;
  std::unordered_set<std::string> gone_requests;
  for (const auto& [id, e] : h_)
    if (now - e.at > ttl.answers) gone.insert(id), gone_queries.insert(e.key);
  for (const auto& [id, e] : f_)
    if (now - e.at > ttl.responses) gone.insert(id), gone_requests.insert(e.key);
  for (const auto& [id, e] : p_)
    if (now - e.at > ttl.results) gone.insert(id);

  std::vector<EntryId> victims(gone.begin(), gone.end());
  if (options.cascade) {
    auto refs = [&](const std::vector<EntryId>& ids) {
      return std::any_of(ids.begin(), ids.end(), [&](EntryId i) { return gone.count(i) > 0; });
    };
    for (const auto& [id, c] : c_) {
      bool dangling = false;
      switch (c.tag) {
        case ConnectionTag::Decompose: dangling = gone_queries.count(c.query_key) > 0; break;
        case ConnectionTag::Complete:
          dangling = gone_requests.count(c.request_keys[0]) > 0 || gone_queries.count(c.query_key) > 0;
          break;
        case ConnectionTag::Compute: dangling = refs(c.result_ids) || refs(c.response_ids); break;
        case ConnectionTag::Aggregate: dangling = gone.count(c.answer_id) > 0 || refs(c.response_ids); break;
      }
      if (dangling) victims.push_back(id);
    }
  }
  std::sort(victims.begin(), victims.end());
  for (auto id : victims) {
    if (!erase_any(id)) continue;
    journal_write(framed({{"t", "D"}, {"id", id}}));
  }
  if (!victims.empty()) {
    reindex();
    ++version_;
  }
  purged_ += victims.size();
  return victims.size();
}

void ExperimentStore::set_ttl(TtlPolicy ttl) {
  std::unique_lock lock(mu_);
  options_.ttl = ttl;
}

void ExperimentStore::replace_response_unchecked(EntryId id, const Response& rsp) {
  std::unique_lock lock(mu_);
  auto it = f_.find(id);
  if (it == f_.end()) return;
  it->second.response = rsp;
  journal_write(framed({{"t", "U"}, {"id", id}, {"response", codec::to_json(rsp)}}));
  ++version_;
}

// --- persistence ------------------------------------------------------------

void ExperimentStore::replay_journal() {
  std::ifstream in(options_.journal, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read journal '" + options_.journal.string() + "'");
  replaying_ = true;
  std::uint64_t good = 0;
  std::string line;
  bool touched = false;
  while (std::getline(in, line)) {
    const bool complete_line = !in.eof();
    if (!complete_line || line.rfind(kRecordPrefix, 0) != 0) break;
    const auto sp = line.find(' ', 3);
    if (sp == std::string::npos) break;
    std::size_t len = 0;
    try {
      len = std::stoull(line.substr(3, sp - 3));
    } catch (...) {
      break;
    }
    if (line.size() - sp - 1 != len) break;
    json j;
    try {
      j = json::parse(line.substr(sp + 1));
    } catch (const json::exception&) {
      break;
    }
    const std::string t = j.at("t").get<std::string>();
    const EntryId id = j.at("id").get<EntryId>();
    if (t == "H") {
      AnswerEntry e;
      e.id = id;
      e.at = parse_double(j.at("at").get<std::string>());
      e.query = codec::query_from_json(j.at("query"));
      e.key = e.query.key();
      e.answer = codec::answer_from_json(j.at("answer"));
      e.provenance = prov_from(j.at("prov"));
      const auto* s = registry_.query_scheme(e.query.language);
      e.features = s ? s->featurize(e.query) : Features{};
      insert_answer(std::move(e));
    } else if (t == "F") {
      ResponseEntry e;
      e.id = id;
      e.at = parse_double(j.at("at").get<std::string>());
      e.request = codec::request_from_json(j.at("request"));
      e.key = e.request.key();
      e.response = codec::response_from_json(j.at("response"));
      e.provenance = prov_from(j.at("prov"));
      e.results = j.at("results").get<std::vector<EntryId>>();
      const auto* s = registry_.request_scheme(e.request.language);
      e.features = s ? s->featurize(e.request) : Features{};
      insert_response(std::move(e));
    } else if (t == "P") {
      ResultEntry e;
      e.id = id;
      e.at = parse_double(j.at("at").get<std::string>());
      e.spec = codec::spec_from_json(j.at("spec"));
      e.key = e.spec.key();
      e.meta = codec::meta_from_json(j.at("meta"));
      e.elided = j.at("elided").get<bool>();
      e.trace_bytes = j.at("trace_bytes").get<std::size_t>();
      e.provenance = prov_from(j.at("prov"));
      if (!e.elided && !traces_->contains(id)) {
        e.elided = true;  // traces lived in memory only
        e.trace_bytes = 0;
      }
      const auto* s = registry_.spec_scheme(e.spec.language);
      e.features = s ? s->featurize(e.spec) : Features{};
      insert_result(std::move(e), nullptr);
    } else if (t == "C") {
      Connection c;
      c.id = id;
      c.at = parse_double(j.at("at").get<std::string>());
      c.tag = tag_from(j.at("tag").get<std::string>());
      c.query_key = j.at("q").get<std::string>();
      c.request_keys = j.at("req").get<std::vector<std::string>>();
      c.spec_keys = j.at("spec").get<std::vector<std::string>>();
      c.result_ids = j.at("res").get<std::vector<EntryId>>();
      c.response_ids = j.at("rsp").get<std::vector<EntryId>>();
      c.answer_id = j.at("ans").get<EntryId>();
      insert_connection(std::move(c));
    } else if (t == "D") {
      erase_any(id);
      touched = true;
      next_id_ = std::max(next_id_, id + 1);
    } else if (t == "U") {
      if (auto it = f_.find(id); it != f_.end()) it->second.response = codec::response_from_json(j.at("response"));
    } else {
      throw Error(ErrorCode::IoError, "journal: unknown record type '" + t + "'");
    }
    good = static_cast<std::uint64_t>(in.tellg());
  }
  replaying_ = false;
  in.close();
  if (touched) reindex();
  const auto size = std::filesystem::file_size(options_.journal);
  if (good < size) std::filesystem::resize_file(options_.journal, good);  // drop a torn tail
}

void ExperimentStore::compact() {
  std::unique_lock lock(mu_);
  if (auto* f = dynamic_cast<FileTraceStore*>(traces_.get())) f->compact();
  if (options_.journal.empty()) return;
  std::map<EntryId, std::string> lines;
  for (const auto& [id, e] : h_) lines[id] = framed(answer_record(e));
  for (const auto& [id, e] : f_) lines[id] = framed(response_record(e));
  for (const auto& [id, e] : p_) lines[id] = framed(result_record(e));
  for (const auto& [id, c] : c_) lines[id] = framed(connection_record(c));
  auto tmp = options_.journal;
  tmp += ".compact";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    for (const auto& [_, l] : lines) out.write(l.data(), static_cast<std::streamsize>(l.size()));
    if (!out) throw Error(ErrorCode::IoError, "journal compaction failed");
  }
  journal_.close();
  std::filesystem::rename(tmp, options_.journal);
  journal_.open(options_.journal, std::ios::binary | std::ios::app);
  if (!journal_) throw Error(ErrorCode::IoError, "cannot reopen journal after compaction");
}

// --- consistency ------------------------------------------------------------

namespace {

template <class Item, class Val>
std::optional<Val> replay_justify(const ReasoningScheme<Item, Val>* s, const Item& fresh, const Features& ff,
                                  const Item& stored, const Features& sf, const Val& sv, EntryId sid,
                                  const std::vector<RequestResponse>* srs) {
  if (!s || !s->justify) return std::nullopt;
  return s->justify(JustifyArgs<Item, Val>{fresh, ff, stored, sf, sv, sid, srs});
}

}  // namespace

void ExperimentStore::check_answers(ConsistencyReport& report) const {
  for (const auto& [id, e] : h_) {
    ++report.checked;
    try {
      if (aggregate_of_answer_.count(id) && e.responses) {
        const auto& c = c_.at(aggregate_of_answer_.at(id));
        std::vector<RequestResponse> pairs = *e.responses;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
          auto f = f_.find(c.response_ids[i]);
          if (f == f_.end()) throw Error(ErrorCode::MissingResponses, "response gone");
          pairs[i].response = f->second.response;
        }
        const Answer replayed = aggregate(registry_, e.query, pairs);
        if (!(replayed == e.answer))
          report.violations.push_back({1, id, e.key + ": aggregate gives " + canonical(replayed) + ", stored " +
                                                  canonical(e.answer)});
      } else if (e.provenance.origin == Origin::Symbolic) {
        auto src = h_.find(e.provenance.source);
        if (src == h_.end()) {
          ++report.unverifiable;
          continue;
        }
        const auto* s = registry_.query_scheme(e.query.language);
        auto v = replay_justify(s, e.query, e.features, src->second.query, src->second.features, src->second.answer,
                                src->first, src->second.responses.get());
        if (!v || !(*v == e.answer))
          report.violations.push_back({1, id, e.key + ": justify from #" + std::to_string(src->first) +
                                                  " does not reproduce " + canonical(e.answer)});
      } else {
        ++report.unverifiable;
      }
    } catch (const std::exception& ex) {
      if (const auto* err = dynamic_cast<const Error*>(&ex); err && err->code() == ErrorCode::MissingResponses) {
        ++report.unverifiable;
        continue;
      }
      report.violations.push_back({1, id, e.key + ": " + ex.what()});
    }
  }
}

void ExperimentStore::check_responses(ConsistencyReport& report) const {
  for (const auto& [id, e] : f_) {
    ++report.checked;
    try {
      if (e.provenance.origin == Origin::Symbolic) {
        auto src = f_.find(e.provenance.source);
        if (src == f_.end()) {
          ++report.unverifiable;
          continue;
        }
        const auto* s = registry_.request_scheme(e.request.language);
        auto v = replay_justify(s, e.request, e.features, src->second.request, src->second.features,
                                src->second.response, src->first, nullptr);
        if (!v || !(*v == e.response))
          report.violations.push_back({2, id, e.key + ": justify from #" + std::to_string(src->first) +
                                                  " does not reproduce " + e.response.canonical()});
        continue;
      }
      std::vector<ExperimentResult> results;
      bool missing = e.results.empty();
      for (auto rid : e.results) {
        auto p = p_.find(rid);
        std::optional<ExperimentResult> r;
        if (p != p_.end() && !p->second.elided) r = traces_->get(rid);
        if (!r) {
          missing = true;
          break;
        }
        r->meta = p->second.meta;
        results.push_back(std::move(*r));
      }
      if (missing) {
        ++report.unverifiable;
        continue;
      }
      const Response replayed = compute(registry_, e.request, results);
      if (!(replayed == e.response))
        report.violations.push_back({2, id, e.key + ": compute gives " + replayed.canonical() + ", stored " +
                                                e.response.canonical()});
    } catch (const std::exception& ex) {
      report.violations.push_back({2, id, e.key + ": " + ex.what()});
    }
  }
}

void ExperimentStore::check_results(ConsistencyReport& report, const ConsistencyOptions& options) const {
  for (const auto& [id, e] : p_) {
    ++report.checked;
    if (!options.reexecute || e.elided) {
      ++report.unverifiable;
      continue;
    }
    try {
      auto stored = traces_->get(id);
      if (!stored) {
        ++report.unverifiable;
        continue;
      }
      const auto fresh = execute(registry_, e.spec);
      if (fresh.traces != stored->traces)
        report.violations.push_back({3, id, e.key + ": re-execution gives different traces"});
    } catch (const std::exception& ex) {
      report.violations.push_back({3, id, e.key + ": " + ex.what()});
    }
  }
}

void ExperimentStore::check_connections(ConsistencyReport& report) const {
  for (const auto& [id, c] : c_) {
    ++report.checked;
    auto violate = [&](const std::string& why) {
      report.violations.push_back({4, id, std::string(to_string(c.tag)) + " record: " + why});
    };
    try {
      switch (c.tag) {
        case ConnectionTag::Decompose: {
          auto h = h_by_key_.find(c.query_key);
          if (h == h_by_key_.end()) {
            ++report.unverifiable;
            break;
          }
          std::set<std::string> want;
          for (const auto& r : decompose(registry_, h_.at(h->second).query)) want.insert(r.key());
          if (want != std::set<std::string>(c.request_keys.begin(), c.request_keys.end()))
            violate("requests differ from the decomposition of " + c.query_key);
          break;
        }
        case ConnectionTag::Complete: {
          auto f = f_by_key_.find(c.request_keys[0]);
          if (f == f_by_key_.end()) {
            violate("request " + c.request_keys[0] + " is gone");
            break;
          }
          std::set<std::string> want;
          for (const auto& s : complete(registry_, f_.at(f->second).request)) want.insert(s.key());
          if (want != std::set<std::string>(c.spec_keys.begin(), c.spec_keys.end()))
            violate("specs differ from the completion of " + c.request_keys[0]);
          break;
        }
        case ConnectionTag::Compute: {
          auto f = f_.find(c.response_ids[0]);
          if (f == f_.end()) {
            violate("response #" + std::to_string(c.response_ids[0]) + " is gone");
            break;
          }
          std::vector<ExperimentResult> results;
          bool elided = false;
          bool gone = false;
          for (auto rid : c.result_ids) {
            auto p = p_.find(rid);
            if (p == p_.end()) {
              gone = true;
              break;
            }
            auto r = p->second.elided ? std::nullopt : traces_->get(rid);
            if (!r) {
              elided = true;
              continue;
            }
            r->meta = p->second.meta;
            results.push_back(std::move(*r));
          }
          if (gone) {
            violate("a result is gone");
            break;
          }
          if (elided) {
            ++report.unverifiable;
            break;
          }
          if (!(compute(registry_, f->second.request, results) == f->second.response))
            violate("results do not compute to response #" + std::to_string(f->first));
          break;
        }
        case ConnectionTag::Aggregate: {
          if (!h_.count(c.answer_id)) {
            violate("answer #" + std::to_string(c.answer_id) + " is gone");
            break;
          }
          for (auto rid : c.response_ids)
            if (!f_.count(rid)) {
              violate("response #" + std::to_string(rid) + " is gone");
              break;
            }
          break;
        }
      }
    } catch (const std::exception& ex) {
      violate(ex.what());
    }
  }
}

ConsistencyReport ExperimentStore::consistency_check(ConsistencyOptions options) const {
  std::shared_lock lock(mu_);
  ConsistencyReport report;
  check_answers(report);
  check_responses(report);
  check_results(report, options);
  check_connections(report);
  return report;
}

}  // namespace expreuse
