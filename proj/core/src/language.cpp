#include <expreuse/language.hpp>

#include <algorithm>
#include <cmath>

namespace expreuse {

bool admits(const ValueDomain& domain, const Value& value) {
  if (const auto* rd = std::get_if<RealDomain>(&domain)) {
    if (value.is_unspecified()) return rd->allow_unspecified;
    if (!value.is_real()) return false;
    const auto& r = value.as_real();
    if (r.unit != rd->unit || std::isnan(r.value)) return false;
    if (rd->min && r.value < *rd->min) return false;
    if (rd->max && r.value > *rd->max) return false;
    return true;
  }
  if (const auto* ed = std::get_if<EnumDomain>(&domain)) {
    return value.is_symbol() &&
           std::find(ed->members.begin(), ed->members.end(), value.as_symbol().name) != ed->members.end();
  }
  if (const auto* cd = std::get_if<ConstraintDomain>(&domain)) {
    if (!value.is_box()) return false;
    for (const auto& a : value.as_box().axes) {
      if (std::find(cd->variables.begin(), cd->variables.end(), a.variable) == cd->variables.end()) return false;
      if (!(a.step > 0.0) || !(a.min <= a.max)) return false;
    }
    return true;
  }
  const auto& pd = std::get<ProfileDomain>(domain);
  if (!value.is_profile()) return false;
  return pd.members.empty() ||
         std::find(pd.members.begin(), pd.members.end(), value.as_profile().id) != pd.members.end();
}

std::string Query::key() const { return language + "|" + expreuse::canonical(binding); }

std::string canonical(const Answer& answer) {
  if (const auto* b = std::get_if<bool>(&answer)) return *b ? "true" : "false";
  const auto& front = std::get<ParetoFront>(answer);
  std::vector<std::string> pts;
  pts.reserve(front.points.size());
  for (const auto& p : front.points) pts.push_back(canonical(p));
  std::sort(pts.begin(), pts.end());
  std::string out = front.all_skipped ? "front!skipped[" : "front[";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out += ',';
    out += pts[i];
  }
  return out + "]";
}

std::string Request::key() const {
  std::string out = language + "|" + expreuse::canonical(binding) + "|poi{";
  bool first = true;
  for (const auto& p : poi) {
    if (!first) out += ',';
    first = false;
    out += p;
  }
  return out + "}";
}

std::string Response::canonical() const { return skipped ? "skip" : expreuse::canonical(binding); }

std::string ExperimentSpec::key() const {
  return language + "|" + kind + "|" + expreuse::canonical(parameters) + "|" + frame_tag;
}

const Trace* ExperimentResult::trace(std::string_view signal) const {
  auto it = traces.find(signal);
  return it == traces.end() ? nullptr : &it->second;
}

}  // namespace expreuse
