#include <expreuse/registry.hpp>

#include <expreuse/error.hpp>

#include <algorithm>
#include <unordered_set>

namespace expreuse {

namespace {

template <class Map>
auto& lookup(const Map& map, const std::string& id, ErrorCode code, const char* what) {
  auto it = map.find(id);
  if (it == map.end()) throw Error(code, std::string("no ") + what + " for '" + id + "'");
  return it->second;
}

std::string join(const std::set<std::string>& s) {
  std::string out;
  for (const auto& v : s) out += (out.empty() ? "" : ",") + v;
  return "{" + out + "}";
}

bool has_unspecified(const Binding& b) {
  return std::any_of(b.begin(), b.end(), [](const auto& kv) { return kv.second.is_unspecified(); });
}

}  // namespace

void LanguageRegistry::ensure_fresh_id(const std::string& id) const {
  if (id.empty()) throw Error(ErrorCode::MalformedLanguage, "empty language id");
  if (query_langs_.count(id) || request_langs_.count(id) || spec_langs_.count(id))
    throw Error(ErrorCode::DuplicateId, "language '" + id + "' already registered");
}

std::string LanguageRegistry::register_language(QueryLanguage lang) {
  ensure_fresh_id(lang.id);
  if (lang.variables.empty()) throw Error(ErrorCode::MalformedLanguage, lang.id + ": no variables");
  if (lang.schemes.empty()) throw Error(ErrorCode::MalformedLanguage, lang.id + ": no query schemes");
  for (const auto& s : lang.schemes)
    for (const auto& v : s)
      if (!lang.variables.count(v))
        throw Error(ErrorCode::MalformedLanguage, lang.id + ": scheme variable '" + v + "' is not a language variable");
  for (const auto& v : lang.variables)
    if (!lang.domains.count(v)) throw Error(ErrorCode::MalformedLanguage, lang.id + ": no domain for '" + v + "'");
  for (const auto& [v, d] : lang.domains)
    if (!lang.variables.count(v)) throw Error(ErrorCode::MalformedLanguage, lang.id + ": domain for unknown '" + v + "'");
  for (const auto& [alias, target] : lang.aliases)
    if (!lang.variables.count(target) || lang.variables.count(alias))
      throw Error(ErrorCode::MalformedLanguage, lang.id + ": bad alias '" + alias + "'");
  std::string id = lang.id;
  query_langs_.emplace(id, std::move(lang));
  return id;
}

std::string LanguageRegistry::register_language(RequestLanguage lang) {
  ensure_fresh_id(lang.id);
  if (lang.request_vars.empty() || lang.poi_vars.empty())
    throw Error(ErrorCode::MalformedLanguage, lang.id + ": needs request and poi variables");
  for (const auto& v : lang.request_vars) {
    if (lang.poi_vars.count(v)) throw Error(ErrorCode::MalformedLanguage, lang.id + ": '" + v + "' is both request and poi");
    if (!lang.domains.count(v)) throw Error(ErrorCode::MalformedLanguage, lang.id + ": no domain for '" + v + "'");
  }
  for (const auto& v : lang.poi_vars)
    if (!lang.domains.count(v)) throw Error(ErrorCode::MalformedLanguage, lang.id + ": no domain for '" + v + "'");
  std::string id = lang.id;
  request_langs_.emplace(id, std::move(lang));
  return id;
}

std::string LanguageRegistry::register_language(SpecLanguage lang) {
  ensure_fresh_id(lang.id);
  const auto& kinds = lang.order.kinds;
  if (kinds.empty()) throw Error(ErrorCode::MalformedLanguage, lang.id + ": no specification kinds");
  if (lang.result_kinds.empty() || lang.result_schema.empty())
    throw Error(ErrorCode::MalformedLanguage, lang.id + ": needs result kinds and a result schema");
  auto index_of = [&](const std::string& k) -> std::size_t {
    auto it = std::find(kinds.begin(), kinds.end(), k);
    if (it == kinds.end()) throw Error(ErrorCode::MalformedLanguage, lang.id + ": unknown kind '" + k + "'");
    return static_cast<std::size_t>(it - kinds.begin());
  };
  std::unordered_set<std::string> seen(kinds.begin(), kinds.end());
  if (seen.size() != kinds.size()) throw Error(ErrorCode::MalformedLanguage, lang.id + ": duplicate kind");
  for (const auto& k : lang.result_kinds) index_of(k);

  const std::size_t n = kinds.size();
  SpecOrder order{kinds, std::vector<std::vector<bool>>(n, std::vector<bool>(n, false))};
  for (std::size_t i = 0; i < n; ++i) order.leq[i][i] = true;
  for (const auto& [a, b] : lang.order.before) order.leq[index_of(a)][index_of(b)] = true;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (order.leq[i][k] && order.leq[k][j]) order.leq[i][j] = true;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && order.leq[i][j] && order.leq[j][i])
        throw Error(ErrorCode::MalformedLanguage, lang.id + ": order is not antisymmetric");

  std::string id = lang.id;
  spec_orders_.emplace(id, std::move(order));
  spec_langs_.emplace(id, std::move(lang));
  return id;
}

void LanguageRegistry::register_decomposer(const std::string& query_language, DecompositionRule rule) {
  (void)this->query_language(query_language);
  (void)request_language(rule.request_language);
  if (!rule.decompose || !rule.aggregate)
    throw Error(ErrorCode::MalformedLanguage, query_language + ": decomposition rule is incomplete");
  if (!decomposers_.emplace(query_language, std::move(rule)).second)
    throw Error(ErrorCode::DuplicateId, "decomposer for '" + query_language + "' already registered");
}

void LanguageRegistry::register_completer(const std::string& req_language, CompletionRule rule) {
  (void)request_language(req_language);
  (void)spec_language(rule.spec_language);
  if (!rule.complete || !rule.compute)
    throw Error(ErrorCode::MalformedLanguage, req_language + ": completion rule is incomplete");
  if (!completers_.emplace(req_language, std::move(rule)).second)
    throw Error(ErrorCode::DuplicateId, "completer for '" + req_language + "' already registered");
}

void LanguageRegistry::register_executor(const std::string& spec_lang, ExecuteFn executor) {
  (void)spec_language(spec_lang);
  if (!executor) throw Error(ErrorCode::MalformedLanguage, spec_lang + ": empty executor");
  if (!executors_.emplace(spec_lang, std::move(executor)).second)
    throw Error(ErrorCode::DuplicateId, "executor for '" + spec_lang + "' already registered");
}

namespace {
template <class S>
void check_scheme(const S& scheme, Layer layer, const std::string& id) {
  if (scheme.layer != layer) throw Error(ErrorCode::MalformedLanguage, id + ": scheme registered on the wrong layer");
  if (!scheme.featurize) throw Error(ErrorCode::MalformedLanguage, id + ": scheme without featurize");
  if (scheme.t_get < 0 || scheme.t_comp < 0) throw Error(ErrorCode::MalformedLanguage, id + ": negative threshold");
}
}  // namespace

void LanguageRegistry::register_scheme(const std::string& id, QueryScheme scheme) {
  (void)query_language(id);
  check_scheme(scheme, Layer::User, id);
  if (!query_schemes_.emplace(id, std::move(scheme)).second)
    throw Error(ErrorCode::DuplicateId, "scheme for '" + id + "' already registered");
}

void LanguageRegistry::register_scheme(const std::string& id, RequestScheme scheme) {
  (void)request_language(id);
  check_scheme(scheme, Layer::Decomposition, id);
  if (!request_schemes_.emplace(id, std::move(scheme)).second)
    throw Error(ErrorCode::DuplicateId, "scheme for '" + id + "' already registered");
}

void LanguageRegistry::register_scheme(const std::string& id, SpecScheme scheme) {
  (void)spec_language(id);
  check_scheme(scheme, Layer::Execution, id);
  if (scheme.comp_distance || scheme.t_comp != 0.0)
    throw Error(ErrorCode::MalformedLanguage, id + ": execution-layer schemes have no recomputation distance");
  if (!spec_schemes_.emplace(id, std::move(scheme)).second)
    throw Error(ErrorCode::DuplicateId, "scheme for '" + id + "' already registered");
}

const QueryLanguage& LanguageRegistry::query_language(const std::string& id) const {
  return lookup(query_langs_, id, ErrorCode::UnknownLanguage, "query language");
}
const RequestLanguage& LanguageRegistry::request_language(const std::string& id) const {
  return lookup(request_langs_, id, ErrorCode::UnknownLanguage, "request language");
}
const SpecLanguage& LanguageRegistry::spec_language(const std::string& id) const {
  return lookup(spec_langs_, id, ErrorCode::UnknownLanguage, "specification language");
}
bool LanguageRegistry::has_query_language(const std::string& id) const { return query_langs_.count(id) > 0; }

std::vector<std::string> LanguageRegistry::query_language_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : query_langs_) out.push_back(id);
  return out;
}

const DecompositionRule& LanguageRegistry::decomposer(const std::string& id) const {
  return lookup(decomposers_, id, ErrorCode::NoDecomposer, "decomposition rule");
}
const CompletionRule& LanguageRegistry::completer(const std::string& id) const {
  return lookup(completers_, id, ErrorCode::NoCompleter, "completion rule");
}
const ExecuteFn& LanguageRegistry::executor(const std::string& id) const {
  return lookup(executors_, id, ErrorCode::NoExecutor, "executor");
}

const QueryScheme* LanguageRegistry::query_scheme(const std::string& id) const {
  auto it = query_schemes_.find(id);
  return it == query_schemes_.end() ? nullptr : &it->second;
}
const RequestScheme* LanguageRegistry::request_scheme(const std::string& id) const {
  auto it = request_schemes_.find(id);
  return it == request_schemes_.end() ? nullptr : &it->second;
}
const SpecScheme* LanguageRegistry::spec_scheme(const std::string& id) const {
  auto it = spec_schemes_.find(id);
  return it == spec_schemes_.end() ? nullptr : &it->second;
}

Query LanguageRegistry::canonicalize(Query q) const {
  auto it = query_langs_.find(q.language);
  if (it == query_langs_.end() || it->second.aliases.empty()) return q;
  Binding out;
  for (auto& [k, v] : q.binding) {
    auto a = it->second.aliases.find(k);
    const std::string& name = a == it->second.aliases.end() ? k : a->second;
    if (!out.emplace(name, std::move(v)).second)
      throw Error(ErrorCode::SchemeMismatch, "variable '" + name + "' bound twice through an alias");
  }
  q.binding = std::move(out);
  return q;
}

bool LanguageRegistry::precedes(const std::string& spec_lang, const std::string& before,
                                const std::string& after) const {
  const auto& order = lookup(spec_orders_, spec_lang, ErrorCode::UnknownLanguage, "specification language");
  auto a = std::find(order.kinds.begin(), order.kinds.end(), before);
  auto b = std::find(order.kinds.begin(), order.kinds.end(), after);
  if (a == order.kinds.end() || b == order.kinds.end() || a == b) return false;
  return order.leq[static_cast<std::size_t>(a - order.kinds.begin())][static_cast<std::size_t>(b - order.kinds.begin())];
}

// ---------------------------------------------------------------------------

void validate_query(const LanguageRegistry& registry, const Query& raw) {
  const auto& lang = registry.query_language(raw.language);
  const Query q = registry.canonicalize(raw);
  std::set<std::string> dom;
  for (const auto& [k, _] : q.binding) dom.insert(k);
  if (std::find(lang.schemes.begin(), lang.schemes.end(), dom) == lang.schemes.end())
    throw Error(ErrorCode::SchemeMismatch, q.language + ": variables " + join(dom) + " match no query scheme");
  for (const auto& [k, v] : q.binding)
    if (!admits(lang.domains.at(k), v))
      throw Error(ErrorCode::DomainViolation, q.language + ": value " + v.canonical() + " not in the domain of '" + k + "'");
  try {
    const auto& rule = registry.decomposer(q.language);
    if (rule.validate) rule.validate(q);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoDecomposer) throw;
  }
}

void validate_request(const LanguageRegistry& registry, const Request& r) {
  const auto& lang = registry.request_language(r.language);
  std::set<std::string> dom;
  for (const auto& [k, _] : r.binding) dom.insert(k);
  if (dom != lang.request_vars)
    throw Error(ErrorCode::SchemeMismatch, r.language + ": request binds " + join(dom) + ", expected " + join(lang.request_vars));
  for (const auto& [k, v] : r.binding)
    if (v.is_unspecified() || !admits(lang.domains.at(k), v))
      throw Error(ErrorCode::DomainViolation, r.language + ": value " + v.canonical() + " not allowed for '" + k + "'");
  if (r.poi.empty()) throw Error(ErrorCode::SchemeMismatch, r.language + ": empty property-of-interest set");
  for (const auto& p : r.poi)
    if (!lang.poi_vars.count(p)) throw Error(ErrorCode::SchemeMismatch, r.language + ": unknown property '" + p + "'");
}

std::vector<Request> decompose(const LanguageRegistry& registry, const Query& raw) {
  validate_query(registry, raw);
  const Query q = registry.canonicalize(raw);
  const auto& rule = registry.decomposer(q.language);
  std::vector<Request> reqs = rule.decompose(q);
  std::vector<Request> out;
  out.reserve(reqs.size());
  std::unordered_set<std::string> seen;
  for (auto& r : reqs) {
    if (r.language != rule.request_language)
      throw Error(ErrorCode::MalformedLanguage, "decomposition produced a request in '" + r.language + "'");
    validate_request(registry, r);
    if (seen.insert(r.key()).second) out.push_back(std::move(r));
  }
  if (out.empty()) throw Error(ErrorCode::EmptyDecomposition, q.key() + " decomposes into no requests");
  return out;
}

Answer aggregate(const LanguageRegistry& registry, const Query& raw, std::span<const RequestResponse> responses) {
  const Query q = registry.canonicalize(raw);
  const auto expected = decompose(registry, q);
  if (expected.size() != responses.size())
    throw Error(ErrorCode::MissingResponses, q.key() + ": expected " + std::to_string(expected.size()) +
                                                 " responses, got " + std::to_string(responses.size()));
  std::unordered_set<std::string> keys;
  for (const auto& r : expected) keys.insert(r.key());
  for (const auto& rr : responses)
    if (!keys.erase(rr.request.key()))
      throw Error(ErrorCode::MissingResponses, q.key() + ": response for foreign request " + rr.request.key());
  const auto& lang = registry.query_language(q.language);
  Answer ans = registry.decomposer(q.language).aggregate(q, responses);
  const bool ok = lang.answer == AnswerKind::Boolean ? std::holds_alternative<bool>(ans)
                                                     : std::holds_alternative<ParetoFront>(ans);
  if (!ok) throw Error(ErrorCode::DomainViolation, q.key() + ": aggregate returned an answer of the wrong kind");
  return ans;
}

std::vector<ExperimentSpec> complete(const LanguageRegistry& registry, const Request& r) {
  const auto& rule = registry.completer(r.language);
  validate_request(registry, r);
  auto specs = rule.complete(r);
  if (specs.empty()) throw Error(ErrorCode::NoCompleter, r.key() + " completes into no specifications");
  const auto& lang = registry.spec_language(rule.spec_language);
  const std::string rkey = r.key();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto& s = specs[i];
    if (s.language != lang.id) throw Error(ErrorCode::MalformedLanguage, "completion produced a spec in '" + s.language + "'");
    if (std::find(lang.order.kinds.begin(), lang.order.kinds.end(), s.kind) == lang.order.kinds.end())
      throw Error(ErrorCode::MalformedLanguage, "unknown specification kind '" + s.kind + "'");
    if (has_unspecified(s.parameters)) throw Error(ErrorCode::DomainViolation, "specification " + s.key() + " is not fully determined");
    for (std::size_t j = 0; j < i; ++j)
      if (registry.precedes(lang.id, s.kind, specs[j].kind))
        throw Error(ErrorCode::MalformedLanguage, "specification order violates the kind order");
    if (s.origin_request.empty()) s.origin_request = rkey;
  }
  return specs;
}

Response compute(const LanguageRegistry& registry, const Request& r, std::span<const ExperimentResult> results) {
  if (results.empty()) throw Error(ErrorCode::EmptyResults, r.key() + ": no results to compute from");
  const auto& rule = registry.completer(r.language);
  Response rsp = rule.compute(r, results);
  if (rsp.skipped) return rsp;
  const auto& lang = registry.request_language(r.language);
  std::set<std::string> dom;
  for (const auto& [k, v] : rsp.binding) {
    dom.insert(k);
    if (!lang.domains.count(k) || !admits(lang.domains.at(k), v))
      throw Error(ErrorCode::DomainViolation, r.key() + ": computed value " + v.canonical() + " for '" + k + "'");
  }
  if (dom != r.poi) throw Error(ErrorCode::MissingSignal, r.key() + ": response binds " + join(dom));
  return rsp;
}

ExperimentResult execute(const LanguageRegistry& registry, const ExperimentSpec& spec) {
  const auto& run = registry.executor(spec.language);
  const auto& lang = registry.spec_language(spec.language);
  ExperimentResult res;
  try {
    res = run(spec);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ExecutionFailure, spec.key() + ": " + e.what());
  }
  res.meta.spec_key = spec.key();
  if (!lang.result_kinds.count(spec.kind)) return res;
  for (const auto& [signal, _] : lang.result_schema) {
    const Trace* t = res.trace(signal);
    if (!t) throw Error(ErrorCode::MissingSignal, spec.key() + ": no trace for '" + signal + "'");
    if (t->time.size() != t->value.size())
      throw Error(ErrorCode::ExecutionFailure, spec.key() + ": ragged trace '" + signal + "'");
    for (std::size_t i = 1; i < t->time.size(); ++i)
      if (!(t->time[i] > t->time[i - 1]))
        throw Error(ErrorCode::ExecutionFailure, spec.key() + ": trace '" + signal + "' is not increasing in time");
  }
  return res;
}

std::vector<ExperimentSpec> result_specs(const LanguageRegistry& registry, const std::vector<ExperimentSpec>& specs) {
  std::vector<ExperimentSpec> out;
  for (const auto& s : specs)
    if (registry.spec_language(s.language).result_kinds.count(s.kind)) out.push_back(s);
  return out;
}

Answer answer_without_reuse(const LanguageRegistry& registry, const Query& raw) {
  const Query q = registry.canonicalize(raw);
  std::vector<RequestResponse> rsps;
  for (auto& r : decompose(registry, q)) {
    std::vector<ExperimentResult> results;
    for (const auto& s : complete(registry, r)) {
      auto res = execute(registry, s);
      if (registry.spec_language(s.language).result_kinds.count(s.kind)) results.push_back(std::move(res));
    }
    Response rsp = compute(registry, r, results);
    rsps.push_back({std::move(r), std::move(rsp)});
  }
  return aggregate(registry, q, rsps);
}

CompatibilityReport check_compatibility(const LanguageRegistry& registry, const std::string& query_language,
                                        std::span<const Query> samples, const AnsweredByFn& answered_by) {
  CompatibilityReport report;
  for (const auto& q : samples) {
    ++report.checked;
    if (q.language != query_language) {
      report.failures.push_back({q.key(), "", "query is not in language '" + query_language + "'"});
      continue;
    }
    try {
      Answer ans = answer_without_reuse(registry, q);
      if (!answered_by(q, ans)) report.failures.push_back({q.key(), canonical(ans), "answer rejected by answeredBy"});
    } catch (const std::exception& e) {
      report.failures.push_back({q.key(), "", e.what()});
    }
  }
  return report;
}

}  // namespace expreuse
