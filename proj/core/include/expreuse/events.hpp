#pragma once

#include <expreuse/scheme.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace expreuse {

enum class Mechanism { Direct, Symbolic, FuzzyRetrieval, FuzzyRecomputation, Executed, None };

std::string_view to_string(Mechanism m) noexcept;

/// One reuse decision.
struct ReuseEvent {
  std::uint64_t seq = 0;
  double time = 0.0;
  Layer layer = Layer::User;
  Mechanism mechanism = Mechanism::None;
  double distance = 0.0;
  EntryId matched = 0;
  std::string item_key;
  std::string query_key;
};

std::string to_json_line(const ReuseEvent& e);

/// Sequence-numbered fan-out log. Keeps the newest `capacity` events in memory and,
/// when a file is attached, appends every event as one JSON line.
class EventLog {
 public:
  explicit EventLog(std::size_t capacity = 100000);

  void attach_file(const std::string& path);

  /// Assigns the next sequence number (starting at 1) and returns it.
  std::uint64_t publish(ReuseEvent e);

  /// Events with seq > since, oldest first, at most `max` of them.
  [[nodiscard]] std::vector<ReuseEvent> since(std::uint64_t since, std::size_t max = SIZE_MAX) const;

  /// Blocks until an event newer than `since` exists or the timeout passes.
  bool wait_newer(std::uint64_t since, std::chrono::milliseconds timeout) const;

  [[nodiscard]] std::uint64_t last_seq() const;
  /// Oldest sequence number still held in memory (0 when none).
  [[nodiscard]] std::uint64_t first_seq() const;

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::deque<ReuseEvent> ring_;
  std::size_t capacity_;
  std::uint64_t next_ = 1;
  std::ofstream file_;
};

}  // namespace expreuse
