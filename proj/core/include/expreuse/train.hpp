#pragma once

#include <expreuse/language.hpp>
#include <expreuse/registry.hpp>
#include <expreuse/scheme.hpp>

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace expreuse::train {

inline constexpr double kGravity = 9.81;
inline constexpr double kDt = 0.01;
inline constexpr double kTMax = 600.0;
/// Samples recorded after the stop (1 s at kDt).
inline constexpr int kTailSamples = 100;

inline constexpr const char* kEngLanguage = "train-eng";
inline constexpr const char* kSaleLanguage = "train-sale";
inline constexpr const char* kRequestLanguage = "train-request";
inline constexpr const char* kSpecLanguage = "train-sim";

/// m in tonnes, F_B in kN/T, v in km/h, mu dimensionless, theta in degrees.
struct TrainParams {
  double m = 0.0;
  double F_B = 0.0;
  double v = 0.0;
  double mu = 0.0;
  double theta = 0.0;
};

/// Validates the parameter invariants; throws DomainViolation.
void check(const TrainParams& p);

/// sin(theta) + mu cos(theta), the sign of which decides how mass acts.
double slope_term(double mu, double theta_deg);

/// F_B + m g (sin theta + mu cos theta).
double deceleration(const TrainParams& p);

/// km/h to m/s.
inline double to_mps(double kmh) { return kmh / 3.6; }

/// u^2 / (2a) with u in m/s, or infinity when the train never stops.
double stopping_distance_closed_form(const TrainParams& p);

struct TrainTrace {
  std::vector<double> time;
  std::vector<double> displacement;
  std::vector<double> velocity;  // m/s
  bool stopped = false;
};

/// Constant-deceleration integration at kDt, one second past the stop; capped at kTMax.
TrainTrace simulate_trace(const TrainParams& p);

ExperimentResult to_result(const TrainTrace& trace);

/// {stopDist -> max displacement} if the trace ends at rest, else infinity.
Response train_compute(const Request& r, std::span<const ExperimentResult> results);

TrainParams params_of(const Binding& b);
Binding binding_of(const TrainParams& p);

// ---------------------------------------------------------------------------
// Symbolic reasoning
// ---------------------------------------------------------------------------

/// Can `fresh` be shown at least as easy to stop as `stored`? Mass counts in
/// whichever direction the slope term's sign makes harmless.
bool no_harder_than(const TrainParams& stored, const TrainParams& fresh);
/// Can `fresh` be shown at least as hard to stop as `stored`?
bool no_easier_than(const TrainParams& stored, const TrainParams& fresh);

/// Infers the safety verdict of (fresh, fresh_dist) from a stored configuration.
/// `stored_stop` is the stored stopping distance when known; otherwise the stored
/// verdict together with its own dist is used.
std::optional<bool> train_justify(const TrainParams& fresh, double fresh_dist,
                                  const TrainParams& stored, double stored_dist, bool stored_answer,
                                  std::optional<double> stored_stop);

// ---------------------------------------------------------------------------
// Catalog and registration
// ---------------------------------------------------------------------------

struct TrainModel {
  double m = 0.0;
  double F_B = 0.0;
};

struct Situation {
  double v = 0.0;
  double mu = 0.0;
  double theta = 0.0;
  double dist = 0.0;
};

struct Catalog {
  std::map<std::string, TrainModel> trains;
  std::map<std::string, Situation> situations;
  std::string version = "1";
};

Catalog default_catalog();

/// Per-parameter tolerances in the order m, F_B, v, mu, theta.
using Tolerances = std::array<double, 5>;

inline constexpr Tolerances kThresholdSetA{100, 0.05, 0.5, 0.05, 0.1};
inline constexpr Tolerances kThresholdSetB{200, 0.1, 1, 0.1, 0.5};
inline constexpr Tolerances kThresholdSetC{500, 0.2, 2, 0.2, 1};
inline constexpr Tolerances kThresholdSetD{1000, 0.5, 4, 0.4, 2};

struct TrainConfig {
  Catalog catalog = default_catalog();
  /// User-layer fuzzy retrieval; empty disables it.
  std::optional<Tolerances> user_tolerances = kThresholdSetA;
  double t_dist = 1.0;
  bool user_recomputation = true;
  bool symbolic = true;
  /// Decomposition-layer fuzzy retrieval; empty disables it.
  std::optional<Tolerances> request_tolerances = kThresholdSetA;
};

/// Registers the eng and sale query languages, the shared request language, the
/// simulation language, the rules between them and the reasoning schemes.
void register_train(LanguageRegistry& registry, const TrainConfig& config = {});

Query eng_query(const TrainParams& p, double dist);
Query sale_query(const std::string& train, const std::optional<std::string>& situation = {});

}  // namespace expreuse::train
