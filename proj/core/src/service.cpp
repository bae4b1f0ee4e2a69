#include <expreuse/service.hpp>

#include <expreuse/error.hpp>
#include <expreuse/json_codec.hpp>

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <unordered_map>

namespace expreuse {

using nlohmann::json;

namespace {

json counters_json(const MechanismCounters& c) {
  return {{"direct", c.direct},
          {"symbolic", c.symbolic},
          {"fuzzy_retrieval", c.fuzzy_retrieval},
          {"fuzzy_recomputation", c.fuzzy_recomputation}};
}

json layer_json(const LayerSummary& l) {
  return {{"direct", l.direct},
          {"symbolic", l.symbolic},
          {"fuzzy_retrieval", l.fuzzy_retrieval},
          {"fuzzy_recomputation", l.fuzzy_recomputation},
          {"misses", l.misses}};
}

HttpReply error_reply(int status, std::string_view code, const std::string& message) {
  return {status, json{{"error", std::string(code)}, {"message", message}}.dump()};
}

int status_of(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownLanguage:
    case ErrorCode::SchemeMismatch:
    case ErrorCode::DomainViolation:
    case ErrorCode::EmptyDecomposition:
    case ErrorCode::InvalidLayout:
      return 400;
    default:
      return 500;
  }
}

}  // namespace

json to_json(const StoreStats& s) {
  return {{"answers", s.answers},
          {"responses", s.responses},
          {"results", s.results},
          {"connections", s.connections},
          {"executed", s.executed},
          {"user", counters_json(s.user)},
          {"decomposition", counters_json(s.decomposition)},
          {"execution", counters_json(s.execution)},
          {"trace_bytes", s.trace_bytes},
          {"record_bytes", s.record_bytes},
          {"byte_estimate", s.byte_estimate},
          {"purged", s.purged},
          {"version", s.version}};
}

json to_json(const ReuseSummary& s) {
  return {{"user", layer_json(s.user)},
          {"decomposition", layer_json(s.decomposition)},
          {"execution", layer_json(s.execution)},
          {"requests", s.requests},
          {"executed", s.executed}};
}

struct Service::Impl {
  Config config;
  LanguageRegistry registry;
  std::unique_ptr<ExperimentStore> store;
  EventLog events;
  std::unique_ptr<ReuseEngine> engine;

  std::mutex process_mu;
  std::mutex cache_mu;
  std::unordered_map<std::string, std::string> replies;
  std::deque<std::string> reply_order;

  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};
  std::mutex run_mu;
  std::condition_variable run_cv;
  bool running = false;

  Impl(const Config& c, StoreOptions opts) : config(c) {
    register_domains(registry, config);
    if (!config.store.event_log.empty()) events.attach_file(config.store.event_log.string());
    store = ExperimentStore::open(registry, std::move(opts));
    engine = std::make_unique<ReuseEngine>(registry, store.get(), &events);
  }

  std::optional<std::string> cached(const std::string& id) {
    std::lock_guard lock(cache_mu);
    auto it = replies.find(id);
    if (it == replies.end()) return std::nullopt;
    return it->second;
  }

  void remember(const std::string& id, const std::string& body) {
    if (config.service.idempotency_cache == 0) return;
    std::lock_guard lock(cache_mu);
    if (!replies.emplace(id, body).second) return;
    reply_order.push_back(id);
    while (reply_order.size() > config.service.idempotency_cache) {
      replies.erase(reply_order.front());
      reply_order.pop_front();
    }
  }
};

namespace {

StoreOptions store_options_of(const Config& c) {
  StoreOptions o;
  o.ttl = c.store.ttl;
  o.journal = c.store.journal;
  if (!c.store.trace_file.empty()) o.traces = std::make_shared<FileTraceStore>(c.store.trace_file);
  return o;
}

}  // namespace

Service::Service(const Config& config) : Service(config, store_options_of(config)) {}

Service::Service(const Config& config, StoreOptions store_options)
    : impl_(std::make_unique<Impl>(config, std::move(store_options))) {}

Service::~Service() { stop(); }

ExperimentStore& Service::store() { return *impl_->store; }
EventLog& Service::events() { return impl_->events; }
const LanguageRegistry& Service::registry() const { return impl_->registry; }

HttpReply Service::query(const std::string& body) {
  json env;
  try {
    env = json::parse(body);
  } catch (const json::exception& e) {
    return error_reply(400, "MalformedJson", e.what());
  }
  if (!env.is_object() || !env.contains("languageId") || !env["languageId"].is_string() || !env.contains("binding"))
    return error_reply(400, "MalformedEnvelope", "expected {\"languageId\": string, \"binding\": object}");
  std::string request_id;
  if (env.contains("requestId")) {
    if (!env["requestId"].is_string()) return error_reply(400, "MalformedEnvelope", "requestId must be a string");
    request_id = env["requestId"].get<std::string>();
    if (auto hit = impl_->cached(request_id)) return {200, *hit};
  }
  try {
    const std::string lang = env["languageId"].get<std::string>();
    if (!impl_->registry.has_query_language(lang))
      throw Error(ErrorCode::UnknownLanguage, "unknown query language '" + lang + "'");
    Query q{lang, codec::parse_plain_binding(impl_->registry.query_language(lang), env["binding"])};

    std::lock_guard lock(impl_->process_mu);
    // a concurrent duplicate may have finished while this one waited
    if (!request_id.empty())
      if (auto hit = impl_->cached(request_id)) return {200, *hit};
    ProcessOptions opts;
    opts.storage = impl_->config.store.storage;
    opts.threads = impl_->config.store.executor_threads;
    const auto before = impl_->store->stats().executed;
    const auto t0 = std::chrono::steady_clock::now();
    const ProcessResult r = impl_->engine->process(q, opts);
    const double elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const auto after = impl_->store->stats();
    json out;
    out["requestId"] = request_id;
    out["languageId"] = lang;
    out["queryKey"] = impl_->registry.canonicalize(q).key();
    out["answer"] = codec::plain(r.answer);
    out["summary"] = to_json(r.summary);
    out["executed"] = after.executed - before;
    out["fuzzy"] = r.fuzzy;
    out["userMechanism"] = std::string(to_string(r.user_mechanism));
    out["timing"] = {{"elapsed_ms", elapsed}};
    out["storeVersion"] = after.version;
    std::string text = out.dump();
    if (!request_id.empty()) impl_->remember(request_id, text);
    return {200, std::move(text)};
  } catch (const Error& e) {
    return error_reply(status_of(e.code()), to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_reply(400, "MalformedEnvelope", e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "InternalError", e.what());
  }
}

HttpReply Service::stats() const { return {200, to_json(impl_->store->stats()).dump()}; }

HttpReply Service::purge(const std::string& body) {
  std::optional<double> now;
  if (!body.empty()) {
    try {
      const json j = json::parse(body);
      if (j.is_object() && j.contains("now")) now = j["now"].get<double>();
    } catch (const json::exception& e) {
      return error_reply(400, "MalformedJson", e.what());
    }
  }
  std::lock_guard lock(impl_->process_mu);
  const std::size_t n = now ? impl_->store->purge_ttl(*now) : impl_->store->purge_ttl();
  return {200, json{{"purged", n}, {"stats", to_json(impl_->store->stats())}}.dump()};
}

HttpReply Service::languages() const {
  json out = json::array();
  for (const auto& id : impl_->registry.query_language_ids())
    out.push_back(codec::describe(impl_->registry.query_language(id)));
  return {200, out.dump()};
}

std::string Service::event_frames(std::uint64_t since, std::size_t max) const {
  std::string out;
  for (const auto& e : impl_->events.since(since, max))
    out += "id: " + std::to_string(e.seq) + "\nevent: reuse\ndata: " + to_json_line(e) + "\n\n";
  return out;
}

int Service::start() {
  auto& s = impl_->server;
  s.new_task_queue = [n = impl_->config.service.workers] { return new httplib::ThreadPool(n); };
  auto send = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  s.Post("/query", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, query(req.body)); });
  s.Get("/stats", [this, send](const httplib::Request&, httplib::Response& res) { send(res, stats()); });
  s.Post("/admin/purge",
         [this, send](const httplib::Request& req, httplib::Response& res) { send(res, purge(req.body)); });
  s.Get("/languages", [this, send](const httplib::Request&, httplib::Response& res) { send(res, languages()); });
  s.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
    std::uint64_t since = 0;
    try {
      if (req.has_param("since")) since = std::stoull(req.get_param_value("since"));
      else if (req.has_header("Last-Event-ID")) since = std::stoull(req.get_header_value("Last-Event-ID"));
    } catch (const std::exception&) {
      res.status = 400;
      res.set_content(R"({"error":"MalformedRequest","message":"since must be an integer"})", "application/json");
      return;
    }
    const bool follow = !req.has_param("follow") || req.get_param_value("follow") != "0";
    if (!follow) {
      res.set_content(event_frames(since), "text/event-stream");
      return;
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [this, since](std::size_t, httplib::DataSink& sink) mutable {
      while (!impl_->stopping && sink.is_writable()) {
        const auto batch = impl_->events.since(since, 1000);
        if (!batch.empty()) {
          std::string chunk;
          for (const auto& e : batch)
            chunk += "id: " + std::to_string(e.seq) + "\nevent: reuse\ndata: " + to_json_line(e) + "\n\n";
          since = batch.back().seq;
          return sink.write(chunk.data(), chunk.size());
        }
        impl_->events.wait_newer(since, std::chrono::milliseconds(200));
      }
      sink.done();
      return true;
    });
  });

  const int port = impl_->config.service.port == 0 ? s.bind_to_any_port(impl_->config.service.host)
                                                   : (s.bind_to_port(impl_->config.service.host, impl_->config.service.port)
                                                          ? impl_->config.service.port
                                                          : -1);
  if (port < 0)
    throw Error(ErrorCode::IoError, "cannot bind " + impl_->config.service.host + ":" +
                                        std::to_string(impl_->config.service.port));
  {
    std::lock_guard lock(impl_->run_mu);
    impl_->running = true;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  {
    std::lock_guard lock(impl_->run_mu);
    impl_->running = false;
  }
  impl_->run_cv.notify_all();
}

void Service::wait() {
  std::unique_lock lock(impl_->run_mu);
  impl_->run_cv.wait(lock, [&] { return !impl_->running; });
}

}  // namespace expreuse
