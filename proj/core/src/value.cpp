#include <expreuse/value.hpp>

#include <expreuse/error.hpp>

#include <charconv>
#include <cmath>
#include <limits>
#include <system_error>

namespace expreuse {

namespace {
constexpr double kLatticeEps = 1e-9;
}

double snap(double v) {
  if (!std::isfinite(v)) return v;
  const double s = std::round(v * 1e9) / 1e9;
  return s == 0.0 ? 0.0 : s;  // no negative zero
}

std::size_t BoxAxis::count() const {
  if (!(step > 0.0) || !std::isfinite(min) || !std::isfinite(max) || min > max) return 0;
  const double span = (max - min) / step;
  if (include_max) return static_cast<std::size_t>(std::floor(span + kLatticeEps)) + 1;
  const auto n = static_cast<std::size_t>(std::ceil(span - kLatticeEps));
  return n;
}

std::vector<double> BoxAxis::values() const {
  const std::size_t n = count();
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(snap(min + static_cast<double>(i) * step));
  return out;
}

std::size_t BoxConstraint::grid_size() const {
  if (axes.empty()) return 0;
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.count();
  return n;
}

const BoxAxis* BoxConstraint::axis(std::string_view variable) const {
  for (const auto& a : axes)
    if (a.variable == variable) return &a;
  return nullptr;
}

double Value::number() const { return as_real().value; }

const Real& Value::as_real() const {
  if (const auto* r = std::get_if<Real>(&v_)) return *r;
  throw Error(ErrorCode::DomainViolation, "expected a real value, got " + canonical());
}

const Symbol& Value::as_symbol() const {
  if (const auto* s = std::get_if<Symbol>(&v_)) return *s;
  throw Error(ErrorCode::DomainViolation, "expected a symbol, got " + canonical());
}

const BoxConstraint& Value::as_box() const {
  if (const auto* b = std::get_if<BoxConstraint>(&v_)) return *b;
  throw Error(ErrorCode::DomainViolation, "expected a box constraint, got " + canonical());
}

const ProfileRef& Value::as_profile() const {
  if (const auto* p = std::get_if<ProfileRef>(&v_)) return *p;
  throw Error(ErrorCode::DomainViolation, "expected a profile id, got " + canonical());
}

std::string Value::canonical() const {
  struct Visitor {
    std::string operator()(const Real& r) const { return "r:" + format_double(r.value) + "[" + r.unit + "]"; }
    std::string operator()(const Symbol& s) const { return "s:" + s.name; }
    std::string operator()(const Unspecified&) const { return "*"; }
    std::string operator()(const ProfileRef& p) const { return "p:" + p.id; }
    std::string operator()(const BoxConstraint& b) const {
      std::string out = "box{";
      for (std::size_t i = 0; i < b.axes.size(); ++i) {
        const auto& a = b.axes[i];
        if (i) out += ';';
        out += a.variable + ":" + format_double(a.min) + ":" + format_double(a.max) + ":" +
               format_double(a.step) + (a.include_max ? ":incl" : ":excl");
      }
      return out + "}";
    }
  };
  return std::visit(Visitor{}, v_);
}

std::string canonical(const Binding& binding) {
  std::string out = "{";
  bool first = true;
  for (const auto& [k, v] : binding) {
    if (!first) out += ';';
    first = false;
    out += k;
    out += '=';
    out += v.canonical();
  }
  return out + "}";
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error(ErrorCode::DomainViolation, "cannot format number");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  if (text == "inf" || text == "+inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  if (text == "-inf" || text == "-infinity") return -std::numeric_limits<double>::infinity();
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw Error(ErrorCode::DomainViolation, "malformed number '" + std::string(text) + "'");
  return v;
}

double number_of(const Binding& binding, std::string_view variable) {
  auto it = binding.find(variable);
  if (it == binding.end())
    throw Error(ErrorCode::DomainViolation, "missing variable '" + std::string(variable) + "'");
  return it->second.number();
}

}  // namespace expreuse
