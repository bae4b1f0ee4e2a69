#include <expreuse/config.hpp>

#include <expreuse/error.hpp>
#include <expreuse/value.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace expreuse {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ConfigError, where + ": " + what);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) bad(where, "expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) bad(where, "unknown key '" + k + "'");
}

double number(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      return parse_double(j.get<std::string>());
    } catch (const Error&) {
    }
  }
  bad(where, "expected a number");
}

/// null means infinity.
double seconds(const json& j, const std::string& where) {
  if (j.is_null()) return kInfinity;
  const double v = number(j, where);
  if (!(v >= 0.0)) bad(where, "must be non-negative");
  return v;
}

bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) bad(where, "expected true or false");
  return j.get<bool>();
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) bad(where, "expected a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const std::string& s, std::size_t n, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_double(item));
    } catch (const Error&) {
      bad(where, "'" + item + "' is not a number");
    }
  }
  if (out.size() != n) bad(where, "expected " + std::to_string(n) + " comma-separated numbers");
  for (double v : out)
    if (!(v >= 0.0)) bad(where, "tolerances must be non-negative");
  return out;
}

template <std::size_t N>
std::array<double, N> tolerance_array(const json& j, const std::string& where) {
  std::array<double, N> out{};
  if (j.is_string()) {
    const auto v = numbers(j.get<std::string>(), N, where);
    std::copy(v.begin(), v.end(), out.begin());
    return out;
  }
  if (!j.is_array() || j.size() != N) bad(where, "expected " + std::to_string(N) + " numbers");
  for (std::size_t i = 0; i < N; ++i) {
    out[i] = number(j[i], where);
    if (!(out[i] >= 0.0)) bad(where, "tolerances must be non-negative");
  }
  return out;
}

std::optional<train::Tolerances> train_tolerances(const json& j, const std::string& where) {
  if (j.is_null()) return std::nullopt;
  if (j.is_string()) return parse_train_tolerances(j.get<std::string>());
  return tolerance_array<5>(j, where);
}

json tolerances_json(const std::optional<train::Tolerances>& t) {
  if (!t) return nullptr;
  return json(std::vector<double>(t->begin(), t->end()));
}

json seconds_json(double s) { return std::isinf(s) ? json(nullptr) : json(s); }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void read_catalog(const json& j, train::Catalog& cat) {
  only_keys(j, "train.catalog", {"version", "trains", "situations"});
  if (j.contains("version")) cat.version = text(j["version"], "train.catalog.version");
  if (j.contains("trains")) {
    cat.trains.clear();
    for (const auto& [id, t] : j["trains"].items()) {
      const std::string w = "train.catalog.trains." + id;
      only_keys(t, w, {"m", "F_B"});
      if (!t.contains("m") || !t.contains("F_B")) bad(w, "needs m and F_B");
      cat.trains[id] = {number(t["m"], w + ".m"), number(t["F_B"], w + ".F_B")};
    }
  }
  if (j.contains("situations")) {
    cat.situations.clear();
    for (const auto& [id, s] : j["situations"].items()) {
      const std::string w = "train.catalog.situations." + id;
      only_keys(s, w, {"v", "mu", "theta", "dist"});
      for (const char* k : {"v", "mu", "theta", "dist"})
        if (!s.contains(k)) bad(w, std::string("needs ") + k);
      cat.situations[id] = {number(s["v"], w + ".v"), number(s["mu"], w + ".mu"), number(s["theta"], w + ".theta"),
                            number(s["dist"], w + ".dist")};
    }
  }
  if (cat.trains.empty() || cat.situations.empty()) bad("train.catalog", "needs at least one train and situation");
}

}  // namespace

StorageMode parse_storage_mode(const std::string& t) {
  if (t == "none") return StorageMode::None;
  if (t == "metrics") return StorageMode::Metrics;
  if (t == "traces") return StorageMode::Traces;
  bad("storage", "expected none, metrics or traces, got '" + t + "'");
}

train::Tolerances parse_train_tolerances(const std::string& t) {
  if (t == "a") return train::kThresholdSetA;
  if (t == "b") return train::kThresholdSetB;
  if (t == "c") return train::kThresholdSetC;
  if (t == "d") return train::kThresholdSetD;
  const auto v = numbers(t, 5, "train tolerances");
  return {v[0], v[1], v[2], v[3], v[4]};
}

battery::Tolerances parse_battery_tolerances(const std::string& t) {
  const auto v = numbers(t, 3, "battery tolerances");
  return {v[0], v[1], v[2]};
}

static Config read_config(const json& j, const std::filesystem::path& base) {
  Config c;
  only_keys(j, "config", {"schema_version", "service", "store", "train", "battery", "drive_cycles"});
  if (!j.contains("schema_version")) bad("config", "missing schema_version");
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kConfigSchemaVersion)
    bad("config", "unsupported schema_version (expected " + std::to_string(kConfigSchemaVersion) + ")");

  if (j.contains("service")) {
    const auto& s = j["service"];
    only_keys(s, "service", {"host", "port", "workers", "idempotency_cache"});
    if (s.contains("host")) c.service.host = text(s["host"], "service.host");
    if (s.contains("port")) {
      if (!s["port"].is_number_integer() || s["port"].get<int>() < 0 || s["port"].get<int>() > 65535)
        bad("service.port", "expected 0..65535");
      c.service.port = s["port"].get<int>();
    }
    if (s.contains("workers")) c.service.workers = std::max(1u, s["workers"].get<unsigned>());
    if (s.contains("idempotency_cache")) c.service.idempotency_cache = s["idempotency_cache"].get<std::size_t>();
  }

  if (j.contains("store")) {
    const auto& s = j["store"];
    only_keys(s, "store", {"journal", "trace_file", "event_log", "storage", "ttl", "executor_threads"});
    if (s.contains("journal")) c.store.journal = resolve(base, text(s["journal"], "store.journal"));
    if (s.contains("trace_file")) c.store.trace_file = resolve(base, text(s["trace_file"], "store.trace_file"));
    if (s.contains("event_log")) c.store.event_log = resolve(base, text(s["event_log"], "store.event_log"));
    if (s.contains("storage")) c.store.storage = parse_storage_mode(text(s["storage"], "store.storage"));
    if (s.contains("executor_threads")) c.store.executor_threads = std::max(1u, s["executor_threads"].get<unsigned>());
    if (s.contains("ttl")) {
      const auto& t = s["ttl"];
      only_keys(t, "store.ttl", {"answers", "responses", "results"});
      if (t.contains("answers")) c.store.ttl.answers = seconds(t["answers"], "store.ttl.answers");
      if (t.contains("responses")) c.store.ttl.responses = seconds(t["responses"], "store.ttl.responses");
      if (t.contains("results")) c.store.ttl.results = seconds(t["results"], "store.ttl.results");
    }
  }

  if (j.contains("train")) {
    const auto& t = j["train"];
    only_keys(t, "train",
              {"catalog", "user_tolerances", "request_tolerances", "t_dist", "user_recomputation", "symbolic"});
    if (t.contains("catalog")) read_catalog(t["catalog"], c.train.catalog);
    if (t.contains("user_tolerances")) c.train.user_tolerances = train_tolerances(t["user_tolerances"], "train.user_tolerances");
    if (t.contains("request_tolerances"))
      c.train.request_tolerances = train_tolerances(t["request_tolerances"], "train.request_tolerances");
    if (t.contains("t_dist")) c.train.t_dist = number(t["t_dist"], "train.t_dist");
    if (t.contains("user_recomputation"))
      c.train.user_recomputation = boolean(t["user_recomputation"], "train.user_recomputation");
    if (t.contains("symbolic")) c.train.symbolic = boolean(t["symbolic"], "train.symbolic");
  }

  if (j.contains("battery")) {
    const auto& b = j["battery"];
    only_keys(b, "battery", {"tolerances", "symbolic", "recomputation"});
    if (b.contains("tolerances")) c.battery.tolerances = tolerance_array<3>(b["tolerances"], "battery.tolerances");
    if (b.contains("symbolic")) c.battery.symbolic = boolean(b["symbolic"], "battery.symbolic");
    if (b.contains("recomputation")) c.battery.recomputation = boolean(b["recomputation"], "battery.recomputation");
  }

  if (j.contains("drive_cycles")) {
    if (!j["drive_cycles"].is_object()) bad("drive_cycles", "expected an object");
    for (const auto& [id, p] : j["drive_cycles"].items())
      c.drive_cycles[id] = resolve(base, text(p, "drive_cycles." + id));
  }
  return c;
}

Config config_from_json(const json& j, const std::filesystem::path& base) {
  try {
    return read_config(j, base);
  } catch (const json::exception& e) {
    bad("config", e.what());
  }
}

json to_json(const Config& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["service"] = {{"host", c.service.host},
                  {"port", c.service.port},
                  {"workers", c.service.workers},
                  {"idempotency_cache", c.service.idempotency_cache}};
  j["store"] = {{"journal", c.store.journal.string()},
                {"trace_file", c.store.trace_file.string()},
                {"event_log", c.store.event_log.string()},
                {"storage", std::string(to_string(c.store.storage))},
                {"executor_threads", c.store.executor_threads},
                {"ttl",
                 {{"answers", seconds_json(c.store.ttl.answers)},
                  {"responses", seconds_json(c.store.ttl.responses)},
                  {"results", seconds_json(c.store.ttl.results)}}}};
  json trains = json::object();
  for (const auto& [id, t] : c.train.catalog.trains) trains[id] = {{"m", t.m}, {"F_B", t.F_B}};
  json situations = json::object();
  for (const auto& [id, s] : c.train.catalog.situations)
    situations[id] = {{"v", s.v}, {"mu", s.mu}, {"theta", s.theta}, {"dist", s.dist}};
  j["train"] = {{"catalog", {{"version", c.train.catalog.version}, {"trains", trains}, {"situations", situations}}},
                {"user_tolerances", tolerances_json(c.train.user_tolerances)},
                {"request_tolerances", tolerances_json(c.train.request_tolerances)},
                {"t_dist", c.train.t_dist},
                {"user_recomputation", c.train.user_recomputation},
                {"symbolic", c.train.symbolic}};
  j["battery"] = {{"tolerances", std::vector<double>(c.battery.tolerances.begin(), c.battery.tolerances.end())},
                  {"symbolic", c.battery.symbolic},
                  {"recomputation", c.battery.recomputation}};
  json cycles = json::object();
  for (const auto& [id, p] : c.drive_cycles) cycles[id] = p.string();
  j["drive_cycles"] = cycles;
  return j;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    bad(path.string(), e.what());
  }
  return config_from_json(j, path.parent_path());
}

void apply_env_overrides(Config& c, const EnvLookup& lookup) {
  const EnvLookup get = lookup ? lookup : [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    return v ? std::optional<std::string>(v) : std::nullopt;
  };
  auto ttl = [](const std::string& v, const char* name) {
    if (v == "inf" || v == "infinity" || v.empty()) return kInfinity;
    const double s = std::strtod(v.c_str(), nullptr);
    if (!(s >= 0.0)) bad(name, "expected seconds or 'inf'");
    return s;
  };
  if (auto v = get("EXPREUSE_HOST")) c.service.host = *v;
  if (auto v = get("EXPREUSE_PORT")) {
    try {
      c.service.port = std::stoi(*v);
    } catch (const std::exception&) {
      bad("EXPREUSE_PORT", "expected an integer");
    }
  }
  if (auto v = get("EXPREUSE_JOURNAL")) c.store.journal = *v;
  if (auto v = get("EXPREUSE_TRACE_FILE")) c.store.trace_file = *v;
  if (auto v = get("EXPREUSE_EVENT_LOG")) c.store.event_log = *v;
  if (auto v = get("EXPREUSE_STORAGE")) c.store.storage = parse_storage_mode(*v);
  if (auto v = get("EXPREUSE_TTL_ANSWERS")) c.store.ttl.answers = ttl(*v, "EXPREUSE_TTL_ANSWERS");
  if (auto v = get("EXPREUSE_TTL_RESPONSES")) c.store.ttl.responses = ttl(*v, "EXPREUSE_TTL_RESPONSES");
  if (auto v = get("EXPREUSE_TTL_RESULTS")) c.store.ttl.results = ttl(*v, "EXPREUSE_TTL_RESULTS");
  if (auto v = get("EXPREUSE_TRAIN_THRESHOLDS")) {
    const auto t = parse_train_tolerances(*v);
    c.train.user_tolerances = t;
    c.train.request_tolerances = t;
  }
  if (auto v = get("EXPREUSE_BATTERY_THRESHOLDS")) c.battery.tolerances = parse_battery_tolerances(*v);
}

void register_domains(LanguageRegistry& registry, const Config& c) {
  train::register_train(registry, c.train);
  auto battery = c.battery;
  if (!c.drive_cycles.empty() || !battery.cycles) {
    auto lib = battery.cycles ? std::make_shared<battery::CycleLibrary>(*battery.cycles)
                              : std::make_shared<battery::CycleLibrary>();
    for (const auto& [id, path] : c.drive_cycles) lib->add(battery::DriveCycle::load(id, path));
    battery.cycles = lib;
  }
  battery::register_battery(registry, battery);
}

}  // namespace expreuse
