#include <expreuse/scheme.hpp>

#include <cmath>

namespace expreuse {

std::string_view to_string(Layer layer) noexcept {
  switch (layer) {
    case Layer::User: return "user";
    case Layer::Decomposition: return "decomposition";
    case Layer::Execution: return "execution";
  }
  return "unknown";
}

DistanceFn tolerance_distance(std::vector<double> tolerances) {
  return [tol = std::move(tolerances)](const Features& a, const Features& b) {
    if (a.group != b.group || a.x.size() != b.x.size() || a.x.size() < tol.size()) return kInfinity;
    for (std::size_t i = 0; i < a.x.size(); ++i) {
      const double t = i < tol.size() ? tol[i] : 0.0;
      if (std::isinf(t)) continue;
      if (!(std::fabs(a.x[i] - b.x[i]) <= t) && a.x[i] != b.x[i]) return kInfinity;
    }
    return 0.0;
  };
}

DistanceFn exact_distance() {
  return [](const Features& a, const Features& b) {
    return a.group == b.group && a.x == b.x ? 0.0 : kInfinity;
  };
}

}  // namespace expreuse
