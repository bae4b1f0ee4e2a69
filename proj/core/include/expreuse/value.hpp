#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace expreuse {

/// A real number together with its unit annotation ("dimensionless" when unitless).
struct Real {
  double value = 0.0;
  std::string unit = "dimensionless";
  bool operator==(const Real&) const = default;
};

/// Member of a finite enumeration (train ids, situations, ...).
struct Symbol {
  std::string name;
  bool operator==(const Symbol&) const = default;
};

/// The under-specified marker `*`.
struct Unspecified {
  bool operator==(const Unspecified&) const = default;
};

/// Identifier of a stimulation profile (drive cycle).
struct ProfileRef {
  std::string id;
  bool operator==(const ProfileRef&) const = default;
};

/// One axis of a per-axis box constraint: values min + n*step for n = 0, 1, ...
/// bounded above by max (inclusive or exclusive).
struct BoxAxis {
  std::string variable;
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;
  bool include_max = true;

  bool operator==(const BoxAxis&) const = default;

  /// Number of lattice points; 0 if the axis is empty.
  [[nodiscard]] std::size_t count() const;
  /// Lattice values, snapped to a 1e-9 grid so overlapping boxes agree bit-for-bit.
  [[nodiscard]] std::vector<double> values() const;
};

/// Restricted form of an inequality set: a Cartesian box with steps.
struct BoxConstraint {
  std::vector<BoxAxis> axes;

  bool operator==(const BoxConstraint&) const = default;

  [[nodiscard]] std::size_t grid_size() const;
  [[nodiscard]] const BoxAxis* axis(std::string_view variable) const;
};

/// Snap a lattice coordinate onto the 1e-9 grid.
double snap(double v);

class Value {
 public:
  using Storage = std::variant<Real, Symbol, Unspecified, BoxConstraint, ProfileRef>;

  Value() : v_(Unspecified{}) {}
  Value(Real r) : v_(std::move(r)) {}                 // NOLINT(google-explicit-constructor)
  Value(Symbol s) : v_(std::move(s)) {}               // NOLINT(google-explicit-constructor)
  Value(Unspecified u) : v_(u) {}                     // NOLINT(google-explicit-constructor)
  Value(BoxConstraint b) : v_(std::move(b)) {}        // NOLINT(google-explicit-constructor)
  Value(ProfileRef p) : v_(std::move(p)) {}           // NOLINT(google-explicit-constructor)

  static Value real(double v, std::string unit = "dimensionless") { return Real{v, std::move(unit)}; }
  static Value symbol(std::string name) { return Symbol{std::move(name)}; }
  static Value unspecified() { return Unspecified{}; }
  static Value profile(std::string id) { return ProfileRef{std::move(id)}; }

  [[nodiscard]] bool is_real() const { return std::holds_alternative<Real>(v_); }
  [[nodiscard]] bool is_symbol() const { return std::holds_alternative<Symbol>(v_); }
  [[nodiscard]] bool is_unspecified() const { return std::holds_alternative<Unspecified>(v_); }
  [[nodiscard]] bool is_box() const { return std::holds_alternative<BoxConstraint>(v_); }
  [[nodiscard]] bool is_profile() const { return std::holds_alternative<ProfileRef>(v_); }

  /// Numeric payload; throws DomainViolation for non-real values.
  [[nodiscard]] double number() const;
  [[nodiscard]] const Real& as_real() const;
  [[nodiscard]] const Symbol& as_symbol() const;
  [[nodiscard]] const BoxConstraint& as_box() const;
  [[nodiscard]] const ProfileRef& as_profile() const;
  [[nodiscard]] const Storage& storage() const { return v_; }

  /// Canonical text form; used for identity keys and persistence.
  [[nodiscard]] std::string canonical() const;

  bool operator==(const Value&) const = default;

 private:
  Storage v_;
};

/// Variable binding; std::map keeps variables sorted, which the canonical key relies on.
using Binding = std::map<std::string, Value, std::less<>>;

std::string canonical(const Binding& binding);

/// Shortest round-trip decimal rendering of a double ("inf"/"-inf"/"nan" for non-finite).
std::string format_double(double v);
/// Inverse of format_double; throws DomainViolation on malformed text.
double parse_double(std::string_view text);

/// Numeric lookup helper; throws DomainViolation if the variable is absent or not real.
double number_of(const Binding& binding, std::string_view variable);

}  // namespace expreuse
