#include <expreuse/events.hpp>

#include <expreuse/error.hpp>
#include <expreuse/value.hpp>

#include <nlohmann/json.hpp>

namespace expreuse {

std::string_view to_string(Mechanism m) noexcept {
  switch (m) {
    case Mechanism::Direct: return "direct";
    case Mechanism::Symbolic: return "symbolic";
    case Mechanism::FuzzyRetrieval: return "fuzzy-retrieval";
    case Mechanism::FuzzyRecomputation: return "fuzzy-recomputation";
    case Mechanism::Executed: return "executed";
    case Mechanism::None: return "none";
  }
  return "none";
}

std::string to_json_line(const ReuseEvent& e) {
  nlohmann::json j;
  j["seq"] = e.seq;
  j["time"] = e.time;
  j["layer"] = std::string(to_string(e.layer));
  j["mechanism"] = std::string(to_string(e.mechanism));
  j["distance"] = format_double(e.distance);
  j["matched"] = e.matched;
  j["item"] = e.item_key;
  j["query"] = e.query_key;
  return j.dump();
}

EventLog::EventLog(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

void EventLog::attach_file(const std::string& path) {
  std::lock_guard lock(mu_);
  file_.close();
  file_.open(path, std::ios::app);
  if (!file_) throw Error(ErrorCode::IoError, "cannot open event log '" + path + "'");
}

std::uint64_t EventLog::publish(ReuseEvent e) {
  std::uint64_t seq;
  {
    std::lock_guard lock(mu_);
    seq = next_++;
    e.seq = seq;
    if (file_.is_open()) file_ << to_json_line(e) << '\n';
    ring_.push_back(std::move(e));
    while (ring_.size() > capacity_) ring_.pop_front();
  }
  cv_.notify_all();
  return seq;
}

std::vector<ReuseEvent> EventLog::since(std::uint64_t since, std::size_t max) const {
  std::lock_guard lock(mu_);
  std::vector<ReuseEvent> out;
  if (ring_.empty()) return out;
  const std::uint64_t first = ring_.front().seq;
  std::size_t start = since < first ? 0 : static_cast<std::size_t>(since - first + 1);
  for (std::size_t i = start; i < ring_.size() && out.size() < max; ++i) out.push_back(ring_[i]);
  return out;
}

bool EventLog::wait_newer(std::uint64_t since, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return next_ - 1 > since; });
}

std::uint64_t EventLog::last_seq() const {
  std::lock_guard lock(mu_);
  return next_ - 1;
}

std::uint64_t EventLog::first_seq() const {
  std::lock_guard lock(mu_);
  return ring_.empty() ? 0 : ring_.front().seq;
}

}  // namespace expreuse
