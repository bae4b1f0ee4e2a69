#pragma once

#include <expreuse/language.hpp>
#include <expreuse/registry.hpp>
#include <expreuse/scheme.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace expreuse::battery {

inline constexpr double kCapacity = 3.6e8;    // J
inline constexpr double kOverloadFactor = 2;  // beta
inline constexpr double kOmega = 100;         // rad/s
inline constexpr double kUnstableSoC = 50;    // %

inline constexpr const char* kQueryLanguage = "tms";
inline constexpr const char* kRequestLanguage = "tms-request";
inline constexpr const char* kSpecLanguage = "tms-sim";
inline constexpr const char* kStandardCycle = "standard-drive-cycle";

/// Power demand sampled at a fixed step; sample k applies over [k dt, (k+1) dt).
struct DriveCycle {
  std::string id;
  double dt = 1.0;
  std::vector<double> power;  // W

  [[nodiscard]] double duration() const { return dt * static_cast<double>(power.size()); }

  /// 50 kW plus a 30 kW sine of period 300 s, 1800 s at 1 s.
  static DriveCycle standard();
  /// Two whitespace-separated columns (time in s, demand in W), equally spaced;
  /// lines starting with '#' are skipped. Throws IoError or ConfigError.
  static DriveCycle load(const std::string& id, const std::filesystem::path& path);
};

/// Known drive cycles by id; the standard one is always present.
class CycleLibrary {
 public:
  CycleLibrary();
  void add(DriveCycle cycle);
  [[nodiscard]] const DriveCycle& get(const std::string& id) const;
  [[nodiscard]] bool contains(const std::string& id) const;
  [[nodiscard]] std::vector<std::string> ids() const;

 private:
  std::map<std::string, DriveCycle> cycles_;
};

struct Layout {
  double voltage = 0.0;      // V
  double max_torque = 0.0;   // N m
  double internal_res = 0.0; // ohm
  std::string stim = kStandardCycle;
};

struct BatteryMetrics {
  double soc = 0.0;  // minimum state of charge, %
  double tbl = 0.0;  // total battery losses, J
};

/// Surrogate battery run over the cycle. Traces "SoC" (%) and "TBL" (J) start at t=0.
/// Throws InvalidLayout for non-positive voltage or torque or negative resistance.
ExperimentResult simulate_battery(const Layout& layout, const DriveCycle& cycle);

/// Final values of the SoC and TBL traces.
BatteryMetrics metrics_of(const ExperimentResult& result);

/// Response restricted to the request's poi; SoC is the trace minimum, TBL the final
/// value.
Response battery_compute(const Request& r, std::span<const ExperimentResult> results);

/// Skip verdict for `fresh` when `stored` is at least as stable in every parameter
/// and still unstable.
bool battery_justify_unstable(const Layout& fresh, const Layout& stored, double stored_soc);

Layout layout_of(const Binding& b);

/// Per-parameter tolerances in the order Voltage, MaxTorque, InternalRes.
using Tolerances = std::array<double, 3>;

struct BatteryConfig {
  Tolerances tolerances{0, 0, 0};
  bool symbolic = true;
  bool recomputation = true;
  std::shared_ptr<const CycleLibrary> cycles;  // standard cycle only when null
};

void register_battery(LanguageRegistry& registry, const BatteryConfig& config = {});

/// Query over a box constraining all three layout variables; `poi` is "TBL,SoC", "SoC" or "TBL".
Query box_query(const BoxConstraint& box, const std::string& stim = kStandardCycle,
                const std::string& poi = "TBL,SoC");

Request layout_request(const Layout& l, std::set<std::string> poi);

}  // namespace expreuse::battery
