#pragma once

#include <expreuse/config.hpp>
#include <expreuse/events.hpp>
#include <expreuse/registry.hpp>
#include <expreuse/reuse.hpp>
#include <expreuse/store.hpp>

#include <cstdint>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

namespace expreuse {

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

nlohmann::json to_json(const StoreStats& s);
nlohmann::json to_json(const ReuseSummary& s);

/// HTTP facade over one registry, store and event log. The handlers are plain
/// methods so they can be driven without a socket; start() serves them.
///
///   POST /query         {"languageId", "binding", "requestId"?}
///   GET  /stats
///   POST /admin/purge   {"now"?}
///   GET  /events?since=N&follow=0|1   text/event-stream
///   GET  /languages
class Service {
 public:
  explicit Service(const Config& config);
  /// `store_options` replaces the store part of the config (tests pass a manual clock).
  Service(const Config& config, StoreOptions store_options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  HttpReply query(const std::string& body);
  HttpReply stats() const;
  HttpReply purge(const std::string& body);
  HttpReply languages() const;
  /// Server-sent event frames for events newer than `since`.
  std::string event_frames(std::uint64_t since, std::size_t max = SIZE_MAX) const;

  /// Binds to the configured host and port (0 picks a free one), serves on a
  /// background thread and returns the bound port. Throws IoError if binding fails.
  int start();
  void stop();
  /// Blocks until stop() is called from elsewhere.
  void wait();

  ExperimentStore& store();
  EventLog& events();
  const LanguageRegistry& registry() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace expreuse
