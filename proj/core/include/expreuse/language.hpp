#pragma once

#include <expreuse/value.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace expreuse {

// ---------------------------------------------------------------------------
// Value domains
// ---------------------------------------------------------------------------

struct RealDomain {
  std::string unit = "dimensionless";
  std::optional<double> min;
  std::optional<double> max;
  bool allow_unspecified = false;
  bool operator==(const RealDomain&) const = default;
};

struct EnumDomain {
  std::vector<std::string> members;
  bool operator==(const EnumDomain&) const = default;
};

/// Box constraints over the listed variables.
struct ConstraintDomain {
  std::vector<std::string> variables;
  bool operator==(const ConstraintDomain&) const = default;
};

/// Stimulation profiles; an empty member list admits any identifier.
struct ProfileDomain {
  std::vector<std::string> members;
  bool operator==(const ProfileDomain&) const = default;
};

using ValueDomain = std::variant<RealDomain, EnumDomain, ConstraintDomain, ProfileDomain>;

bool admits(const ValueDomain& domain, const Value& value);

enum class AnswerKind { Boolean, ParetoSet };

// ---------------------------------------------------------------------------
// Languages
// ---------------------------------------------------------------------------

struct QueryLanguage {
  std::string id;
  std::set<std::string> variables;
  std::vector<std::set<std::string>> schemes;
  std::map<std::string, ValueDomain> domains;
  AnswerKind answer = AnswerKind::Boolean;
  /// Alternative variable names accepted on input (e.g. "slip" for "mu").
  std::map<std::string, std::string> aliases;
};

struct RequestLanguage {
  std::string id;
  std::set<std::string> request_vars;
  std::set<std::string> poi_vars;
  std::map<std::string, ValueDomain> domains;
};

/// Partial order over specification kinds, given by generating pairs (a before b).
struct KindOrder {
  std::vector<std::string> kinds;
  std::vector<std::pair<std::string, std::string>> before;
};

struct SpecLanguage {
  std::string id;
  KindOrder order;
  /// Kinds whose execution yields a stored result (the others are preparation steps).
  std::set<std::string> result_kinds;
  /// Result signals and their units.
  std::map<std::string, std::string> result_schema;
};

// ---------------------------------------------------------------------------
// Layer items
// ---------------------------------------------------------------------------

struct Query {
  std::string language;
  Binding binding;

  [[nodiscard]] std::string key() const;
  bool operator==(const Query&) const = default;
};

/// A Pareto front: fully determined input bindings joined with their outputs.
struct ParetoFront {
  std::vector<Binding> points;
  /// Set when every point was skipped or found unstable, so the empty front is explained.
  bool all_skipped = false;
  bool operator==(const ParetoFront&) const = default;
};

using Answer = std::variant<bool, ParetoFront>;

std::string canonical(const Answer& answer);

struct Request {
  std::string language;
  Binding binding;
  std::set<std::string> poi;

  [[nodiscard]] std::string key() const;
  bool operator==(const Request&) const = default;
};

/// Metric values for a request. A skipped response is the symbolic "do not evaluate"
/// verdict used by the Pareto optimisation; it binds nothing.
struct Response {
  Binding binding;
  bool skipped = false;

  [[nodiscard]] std::string canonical() const;
  bool operator==(const Response&) const = default;
};

struct RequestResponse {
  Request request;
  Response response;
};

struct ExperimentSpec {
  std::string language;
  std::string kind;
  Binding parameters;
  /// Opaque validity-frame tag; carried, never interpreted.
  std::string frame_tag;
  /// Provenance references (canonical keys). Not part of the spec's identity.
  std::string origin_request;
  std::string origin_query;

  [[nodiscard]] std::string key() const;
};

struct Trace {
  std::vector<double> time;
  std::vector<double> value;
  bool operator==(const Trace&) const = default;
};

struct ResultMeta {
  std::string spec_key;
  double wall_time_s = 0.0;
  double step = 0.0;
  bool operator==(const ResultMeta&) const = default;
};

struct ExperimentResult {
  std::map<std::string, Trace, std::less<>> traces;
  ResultMeta meta;
  /// Set when the store kept metrics only and dropped the time series.
  bool traces_elided = false;

  [[nodiscard]] const Trace* trace(std::string_view signal) const;
  bool operator==(const ExperimentResult&) const = default;
};

}  // namespace expreuse
