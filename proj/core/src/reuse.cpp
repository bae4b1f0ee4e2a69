#include <expreuse/reuse.hpp>

#include <expreuse/error.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>
#include <unordered_map>

namespace expreuse {

void LayerSummary::count(Mechanism m) {
  switch (m) {
    case Mechanism::Direct: ++direct; break;
    case Mechanism::Symbolic: ++symbolic; break;
    case Mechanism::FuzzyRetrieval: ++fuzzy_retrieval; break;
    case Mechanism::FuzzyRecomputation: ++fuzzy_recomputation; break;
    default: ++misses; break;
  }
}

ReuseEngine::ReuseEngine(const LanguageRegistry& registry, ExperimentStore* store, EventLog* events)
    : registry_(registry), store_(store), events_(events) {}

void ReuseEngine::emit(Layer layer, Mechanism m, double distance, EntryId matched, const std::string& key,
                       const std::string& query_key) {
  if (store_ && m != Mechanism::None && m != Mechanism::Executed) store_->note_reuse(layer, m);
  if (!events_) return;
  ReuseEvent e;
  e.time = store_ ? store_->now() : 0.0;
  e.layer = layer;
  e.mechanism = m;
  e.distance = distance;
  e.matched = matched;
  e.item_key = key;
  e.query_key = query_key;
  events_->publish(std::move(e));
}

namespace {

struct Candidate {
  EntryId id = 0;
  double distance = kInfinity;
};

/// Entries strictly within `threshold`, nearest first, earliest among equals.
template <class Entry, class Scan>
std::vector<Candidate> within(const Scan& scan, const DistanceFn& dist, const Features& f, double threshold,
                              const std::string& own_key) {
  std::vector<Candidate> out;
  if (!dist || !(threshold > 0.0)) return out;
  scan([&](const Entry& e) {
    if (e.key == own_key) return false;
    const double d = dist(f, e.features);
    if (d < threshold) out.push_back({e.id, d});
    return false;
  });
  std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  });
  return out;
}

/// First stored entry with the smallest distance below the threshold.
template <class Entry, class Scan>
std::optional<Candidate> nearest(const Scan& scan, const DistanceFn& dist, const Features& f, double threshold,
                                 const std::string& own_key) {
  if (!dist || !(threshold > 0.0)) return std::nullopt;
  std::optional<Candidate> best;
  scan([&](const Entry& e) {
    if (e.key == own_key) return false;
    const double d = dist(f, e.features);
    if (d < threshold && (!best || d < best->distance)) best = Candidate{e.id, d};
    return best && best->distance == 0.0;
  });
  return best;
}

}  // namespace

// --- user layer -------------------------------------------------------------

ReuseOutcome<Answer> ReuseEngine::reuse_user(const Query& raw) {
  ReuseOutcome<Answer> out;
  if (!store_) return out;
  const Query q = registry_.canonicalize(raw);
  const std::string key = q.key();

  if (auto e = store_->answer_entry(key)) {
    out = {e->answer, Mechanism::Direct, e->id, e->id, 0.0, e->provenance.fuzzy};
    emit(Layer::User, out.mechanism, 0.0, e->id, key, key);
    return out;
  }
  const QueryScheme* scheme = registry_.query_scheme(q.language);
  if (!scheme) return out;
  const Features f = scheme->featurize(q);
  auto scan = [&](bool sources) {
    return [&, sources](const std::function<bool(const AnswerEntry&)>& fn) {
      store_->scan_answers(q.language, f.group, sources, fn);
    };
  };

  if (scheme->justify) {
    std::optional<Answer> v;
    EntryId src = 0;
    scan(true)([&](const AnswerEntry& e) {
      if (e.provenance.fuzzy) return false;
      v = scheme->justify({q, f, e.query, e.features, e.answer, e.id, e.responses.get()});
      src = e.id;
      return v.has_value();
    });
    if (v) {
      const EntryId id = store_->add_Q(q, *v, {Origin::Symbolic, src, false});
      out = {std::move(v), Mechanism::Symbolic, src, id, 0.0, false};
      emit(Layer::User, out.mechanism, 0.0, src, key, key);
      return out;
    }
  }

  if (auto best = nearest<AnswerEntry>(scan(false), scheme->get_distance, f, scheme->t_get, key)) {
    auto e = store_->answer_entry(best->id);
    if (e) {
      out = {e->answer, Mechanism::FuzzyRetrieval, e->id, e->id, best->distance, true};
      emit(Layer::User, out.mechanism, best->distance, e->id, key, key);
      return out;
    }
  }

  for (const auto& c : within<AnswerEntry>(scan(false), scheme->comp_distance, f, scheme->t_comp, key)) {
    auto e = store_->answer_entry(c.id);
    if (!e || !e->responses || e->response_ids.size() != e->responses->size()) continue;
    Answer ans;
    try {
      ans = aggregate(registry_, q, *e->responses);
    } catch (const Error& err) {
      if (err.code() == ErrorCode::MissingResponses) continue;
      throw;
    }
    const bool fuzzy = e->provenance.fuzzy;
    const EntryId id = store_->add_Q(q, ans, {Origin::Recomputed, e->id, fuzzy});
    Connection agg;
    agg.tag = ConnectionTag::Aggregate;
    agg.query_key = key;
    for (const auto& rr : *e->responses) agg.request_keys.push_back(rr.request.key());
    agg.response_ids = e->response_ids;
    agg.answer_id = id;
    store_->record_connection(std::move(agg));
    out = {std::move(ans), Mechanism::FuzzyRecomputation, e->id, id, c.distance, fuzzy};
    emit(Layer::User, out.mechanism, c.distance, e->id, key, key);
    return out;
  }
  return out;
}

// --- decomposition layer ----------------------------------------------------

ReuseOutcome<Response> ReuseEngine::reuse_decomposition(const Request& r, const std::string& query_key) {
  ReuseOutcome<Response> out;
  if (!store_) return out;
  const std::string key = r.key();

  if (auto e = store_->response_entry(key)) {
    out = {e->response, Mechanism::Direct, e->id, e->id, 0.0, e->provenance.fuzzy};
    emit(Layer::Decomposition, out.mechanism, 0.0, e->id, key, query_key);
    return out;
  }
  const RequestScheme* scheme = registry_.request_scheme(r.language);
  if (!scheme) return out;
  const Features f = scheme->featurize(r);
  auto scan = [&](bool sources) {
    return [&, sources](const std::function<bool(const ResponseEntry&)>& fn) {
      store_->scan_responses(r.language, f.group, sources, fn);
    };
  };

  if (scheme->justify) {
    std::optional<Response> v;
    EntryId src = 0;
    scan(true)([&](const ResponseEntry& e) {
      if (e.provenance.fuzzy) return false;
      v = scheme->justify({r, f, e.request, e.features, e.response, e.id, nullptr});
      src = e.id;
      return v.has_value();
    });
    if (v) {
      const EntryId id = store_->add_R(r, *v, {Origin::Symbolic, src, false});
      out = {std::move(v), Mechanism::Symbolic, src, id, 0.0, false};
      emit(Layer::Decomposition, out.mechanism, 0.0, src, key, query_key);
      return out;
    }
  }

  if (auto best = nearest<ResponseEntry>(scan(false), scheme->get_distance, f, scheme->t_get, key)) {
    if (auto e = store_->response_entry(best->id)) {
      out = {e->response, Mechanism::FuzzyRetrieval, e->id, e->id, best->distance, true};
      emit(Layer::Decomposition, out.mechanism, best->distance, e->id, key, query_key);
      return out;
    }
  }

  for (const auto& c : within<ResponseEntry>(scan(false), scheme->comp_distance, f, scheme->t_comp, key)) {
    auto e = store_->response_entry(c.id);
    if (!e) continue;
    auto results = store_->results_of(c.id);
    if (!results) continue;
    Response rsp;
    try {
      rsp = compute(registry_, r, *results);
    } catch (const Error&) {
      continue;
    }
    const bool fuzzy = e->provenance.fuzzy;
    const EntryId id = store_->add_R(r, rsp, {Origin::Recomputed, e->id, fuzzy}, e->results);
    Connection cmp;
    cmp.tag = ConnectionTag::Compute;
    cmp.query_key = query_key;
    cmp.request_keys = {key};
    cmp.result_ids = e->results;
    cmp.response_ids = {id};
    store_->record_connection(std::move(cmp));
    out = {std::move(rsp), Mechanism::FuzzyRecomputation, e->id, id, c.distance, fuzzy};
    emit(Layer::Decomposition, out.mechanism, c.distance, e->id, key, query_key);
    return out;
  }
  return out;
}

// --- execution layer --------------------------------------------------------

ReuseOutcome<ExperimentResult> ReuseEngine::reuse_execution(const ExperimentSpec& spec) {
  ReuseOutcome<ExperimentResult> out;
  if (!store_) return out;
  const std::string key = spec.key();

  if (auto e = store_->result_entry(key)) {
    if (auto res = store_->result_by_id(e->id); res && !res->traces_elided) {
      out = {std::move(res), Mechanism::Direct, e->id, e->id, 0.0, e->provenance.fuzzy};
      emit(Layer::Execution, out.mechanism, 0.0, e->id, key, spec.origin_query);
      return out;
    }
  }
  const SpecScheme* scheme = registry_.spec_scheme(spec.language);
  if (!scheme) return out;
  const Features f = scheme->featurize(spec);

  if (scheme->justify) {
    std::vector<EntryId> sources;
    store_->scan_results(spec.language, f.group, true, [&](const ResultEntry& e) {
      if (!e.elided && !e.provenance.fuzzy) sources.push_back(e.id);
      return false;
    });
    for (auto sid : sources) {
      auto se = store_->result_entry(sid);
      auto sv = store_->result_by_id(sid);
      if (!se || !sv || sv->traces_elided) continue;
      auto v = scheme->justify({spec, f, se->spec, se->features, *sv, sid, nullptr});
      if (!v) continue;
      const EntryId id = store_->add_E(spec, *v, StorageMode::Traces, {Origin::Symbolic, sid, false});
      out = {std::move(v), Mechanism::Symbolic, sid, id, 0.0, false};
      emit(Layer::Execution, out.mechanism, 0.0, sid, key, spec.origin_query);
      return out;
    }
  }

  auto scan = [&](const std::function<bool(const ResultEntry&)>& fn) {
    store_->scan_results(spec.language, f.group, false, [&](const ResultEntry& e) { return !e.elided && fn(e); });
  };
  if (auto best = nearest<ResultEntry>(scan, scheme->get_distance, f, scheme->t_get, key)) {
    if (auto res = store_->result_by_id(best->id); res && !res->traces_elided) {
      out = {std::move(res), Mechanism::FuzzyRetrieval, best->id, best->id, best->distance, true};
      emit(Layer::Execution, out.mechanism, best->distance, best->id, key, spec.origin_query);
      return out;
    }
  }
  return out;
}

// --- the overall process ----------------------------------------------------

namespace {

struct Job {
  std::vector<ExperimentSpec> prep;  // preparation specs of the owning request
  ExperimentSpec spec;
  std::optional<ExperimentResult> result;
  std::exception_ptr error;
};

void run_jobs(const LanguageRegistry& registry, std::vector<Job>& jobs, unsigned threads) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      auto& job = jobs[i];
      try {
        for (const auto& p : job.prep) (void)execute(registry, p);
        job.result = execute(registry, job.spec);
      } catch (...) {
        job.error = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  if (n == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

std::string error_text(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

}  // namespace

ProcessResult ReuseEngine::process(const Query& raw, const ProcessOptions& options) {
  const Query q = registry_.canonicalize(raw);
  validate_query(registry_, q);
  const std::string qkey = q.key();
  const bool reuse = options.reuse && store_ != nullptr;
  ExperimentStore* sink = options.storage == StorageMode::None ? nullptr : store_;

  ProcessResult result;
  if (reuse) {
    auto u = reuse_user(q);
    if (u.value) {
      result.summary.user.count(u.mechanism);
      result.answer = std::move(*u.value);
      result.fuzzy = u.fuzzy;
      result.user_mechanism = u.mechanism;
      return result;
    }
    result.summary.user.count(Mechanism::None);
    emit(Layer::User, Mechanism::None, kInfinity, 0, qkey, qkey);
  }

  const auto reqs = decompose(registry_, q);
  result.summary.requests = reqs.size();
  if (sink) {
    Connection dec;
    dec.tag = ConnectionTag::Decompose;
    dec.query_key = qkey;
    for (const auto& r : reqs) dec.request_keys.push_back(r.key());
    sink->record_connection(std::move(dec));
  }

  std::vector<std::size_t> order(reqs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (options.shuffle_seed) {
    std::mt19937_64 rng(*options.shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<std::optional<Response>> responses(reqs.size());
  std::vector<EntryId> response_ids(reqs.size(), 0);
  bool fuzzy = false;
  std::exception_ptr failure;
  std::string failure_text;

  const std::size_t batch = options.batch_size == 0 ? reqs.size() : options.batch_size;
  for (std::size_t start = 0; start < order.size() && !failure; start += batch) {
    const std::size_t stop = std::min(order.size(), start + batch);
    std::vector<std::size_t> pending;
    for (std::size_t k = start; k < stop; ++k) {
      const auto i = order[k];
      if (reuse) {
        auto d = reuse_decomposition(reqs[i], qkey);
        if (d.value) {
          result.summary.decomposition.count(d.mechanism);
          responses[i] = std::move(d.value);
          response_ids[i] = d.entry;
          fuzzy = fuzzy || d.fuzzy;
          continue;
        }
        result.summary.decomposition.count(Mechanism::None);
        emit(Layer::Decomposition, Mechanism::None, kInfinity, 0, reqs[i].key(), qkey);
      }
      pending.push_back(i);
    }
    if (pending.empty()) continue;

    // Complete every pending request; identical result specs run once.
    struct Plan {
      std::vector<ExperimentSpec> all;
      std::vector<std::string> result_keys;
    };
    std::vector<Plan> plans(pending.size());
    std::unordered_map<std::string, std::size_t> job_of;
    std::unordered_map<std::string, std::pair<ExperimentResult, EntryId>> reused;
    std::unordered_map<std::string, bool> reused_fuzzy;
    std::vector<Job> jobs;
    for (std::size_t p = 0; p < pending.size(); ++p) {
      const auto& r = reqs[pending[p]];
      plans[p].all = complete(registry_, r);
      std::vector<ExperimentSpec> prep;
      for (auto& s : plans[p].all) {
        s.origin_query = qkey;
        const bool bears = registry_.spec_language(s.language).result_kinds.count(s.kind) > 0;
        if (!bears) {
          prep.push_back(s);
          continue;
        }
        const std::string skey = s.key();
        plans[p].result_keys.push_back(skey);
        if (job_of.count(skey) || reused.count(skey)) continue;
        if (reuse) {
          auto x = reuse_execution(s);
          if (x.value) {
            result.summary.execution.count(x.mechanism);
            reused_fuzzy[skey] = x.fuzzy;
            reused.emplace(skey, std::make_pair(std::move(*x.value), x.entry));
            continue;
          }
          result.summary.execution.count(Mechanism::None);
        }
        job_of[skey] = jobs.size();
        jobs.push_back({prep, s, std::nullopt, nullptr});
      }
    }

    run_jobs(registry_, jobs, options.threads);

    std::unordered_map<std::string, std::pair<const ExperimentResult*, EntryId>> done;
    for (auto& job : jobs) {
      const std::string skey = job.spec.key();
      if (job.error) {
        if (!failure) {
          failure = job.error;
          failure_text = error_text(job.error);
        }
        continue;
      }
      ++result.summary.executed;
      EntryId id = 0;
      if (sink) id = sink->add_E(job.spec, *job.result, options.storage, {Origin::Pipeline, 0, false});
      emit(Layer::Execution, Mechanism::Executed, 0.0, id, skey, qkey);
      done.emplace(skey, std::make_pair(&*job.result, id));
    }
    for (const auto& [skey, v] : reused) done.emplace(skey, std::make_pair(&v.first, v.second));

    for (std::size_t p = 0; p < pending.size(); ++p) {
      const auto i = pending[p];
      const auto& r = reqs[i];
      std::vector<ExperimentResult> results;
      std::vector<EntryId> ids;
      bool ok = true;
      bool tainted = false;
      for (const auto& skey : plans[p].result_keys) {
        auto it = done.find(skey);
        if (it == done.end()) {
          ok = false;
          break;
        }
        results.push_back(*it->second.first);
        ids.push_back(it->second.second);
        if (auto f = reused_fuzzy.find(skey); f != reused_fuzzy.end()) tainted = tainted || f->second;
      }
      if (!ok) continue;  // a failed branch leaves nothing behind
      Response rsp = compute(registry_, r, results);
      fuzzy = fuzzy || tainted;
      if (sink && std::all_of(ids.begin(), ids.end(), [](EntryId id) { return id != 0; })) {
        const EntryId rid = sink->add_R(r, rsp, {Origin::Pipeline, 0, tainted}, ids);
        response_ids[i] = rid;
        Connection cmp;
        cmp.tag = ConnectionTag::Compute;
        cmp.query_key = qkey;
        cmp.request_keys = {r.key()};
        cmp.result_ids = ids;
        cmp.response_ids = {rid};
        sink->record_connection(std::move(cmp));
        Connection cpl;
        cpl.tag = ConnectionTag::Complete;
        cpl.query_key = qkey;
        cpl.request_keys = {r.key()};
        for (const auto& s : plans[p].all) cpl.spec_keys.push_back(s.key());
        sink->record_connection(std::move(cpl));
      }
      responses[i] = std::move(rsp);
    }
  }
  if (failure) throw Error(ErrorCode::ExecutionFailure, qkey + ": " + failure_text);

  std::vector<RequestResponse> pairs;
  pairs.reserve(reqs.size());
  for (std::size_t i = 0; i < reqs.size(); ++i) pairs.push_back({reqs[i], *responses[i]});
  result.answer = aggregate(registry_, q, pairs);
  result.fuzzy = fuzzy;

  if (sink) {
    const EntryId aid = sink->add_Q(q, result.answer, {Origin::Pipeline, 0, fuzzy});
    if (std::all_of(response_ids.begin(), response_ids.end(), [](EntryId id) { return id != 0; })) {
      Connection agg;
      agg.tag = ConnectionTag::Aggregate;
      agg.query_key = qkey;
      for (const auto& r : reqs) agg.request_keys.push_back(r.key());
      agg.response_ids = response_ids;
      agg.answer_id = aid;
      sink->record_connection(std::move(agg));
    }
  }
  return result;
}

// --- aggregate insensitivity ------------------------------------------------

InsensitivityReport check_aggregate_insensitivity(
    const LanguageRegistry& registry, const QueryScheme& scheme, std::span<const std::pair<Query, Query>> pairs,
    const std::function<double(const Answer&, const Answer&)>& answer_distance, double t) {
  InsensitivityReport report;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    ++report.sampled;
    const auto& [q1, q2] = pairs[i];
    const double d = scheme.comp_distance ? scheme.comp_distance(scheme.featurize(q1), scheme.featurize(q2)) : kInfinity;
    if (!(d < scheme.t_comp)) continue;
    std::vector<RequestResponse> rs;
    for (auto& r : decompose(registry, q1)) {
      std::vector<ExperimentResult> results;
      for (const auto& s : complete(registry, r)) {
        auto res = execute(registry, s);
        if (registry.spec_language(s.language).result_kinds.count(s.kind)) results.push_back(std::move(res));
      }
      Response rsp = compute(registry, r, results);
      rs.push_back({std::move(r), std::move(rsp)});
    }
    Answer a2;
    try {
      a2 = aggregate(registry, q2, rs);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::MissingResponses) continue;
      throw;
    }
    ++report.checked;
    const double out = answer_distance(aggregate(registry, q1, rs), a2);
    if (!(out < t)) report.violations.push_back({i, d, out});
  }
  return report;
}

}  // namespace expreuse
