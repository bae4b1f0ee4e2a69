#pragma once

#include <expreuse/battery.hpp>
#include <expreuse/registry.hpp>
#include <expreuse/store.hpp>
#include <expreuse/train.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace expreuse {

inline constexpr int kConfigSchemaVersion = 1;

struct ServiceSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// HTTP worker threads.
  unsigned workers = 4;
  /// Cached envelopes kept for requestId replay.
  std::size_t idempotency_cache = 10000;
};

struct StoreSettings {
  /// Empty keeps everything in memory.
  std::filesystem::path journal;
  std::filesystem::path trace_file;
  std::filesystem::path event_log;
  StorageMode storage = StorageMode::Traces;
  TtlPolicy ttl;
  unsigned executor_threads = 1;
};

struct Config {
  int schema_version = kConfigSchemaVersion;
  ServiceSettings service;
  StoreSettings store;
  train::TrainConfig train;
  battery::BatteryConfig battery;
  /// Extra drive cycles by id, loaded from two-column files.
  std::map<std::string, std::filesystem::path> drive_cycles;
};

/// Throws ConfigError on unknown keys, wrong types or an unsupported schema_version.
Config config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const Config& c);

/// Reads a JSON config file; relative paths inside it resolve against its directory.
Config load_config(const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Applies EXPREUSE_* overrides (see README). `lookup` defaults to getenv.
void apply_env_overrides(Config& c, const EnvLookup& lookup = {});

/// "a".."d" for the named train sets, or five comma-separated numbers.
train::Tolerances parse_train_tolerances(const std::string& text);
/// Three comma-separated numbers in the order Voltage, MaxTorque, InternalRes.
battery::Tolerances parse_battery_tolerances(const std::string& text);
StorageMode parse_storage_mode(const std::string& text);

/// Registers both domains as configured, loading the drive cycle files.
void register_domains(LanguageRegistry& registry, const Config& c);

}  // namespace expreuse
