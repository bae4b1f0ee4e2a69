#include <expreuse/json_codec.hpp>

#include <expreuse/error.hpp>

namespace expreuse::codec {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::DomainViolation, "json: " + what); }

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) bad(std::string("missing field '") + name + "'");
  return *it;
}

double real_of(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_double(j.get<std::string>());
  bad("expected a number, got " + j.dump());
}

json axis_json(const BoxAxis& a) {
  return {{"min", format_double(a.min)}, {"max", format_double(a.max)}, {"step", format_double(a.step)},
          {"include_max", a.include_max}};
}

BoxAxis axis_from(const std::string& var, const json& j) {
  if (!j.is_object()) bad("box axis '" + var + "' must be an object");
  BoxAxis a;
  a.variable = var;
  a.min = real_of(field(j, "min"));
  a.max = real_of(field(j, "max"));
  a.step = real_of(field(j, "step"));
  a.include_max = j.value("include_max", true);
  return a;
}

json box_json(const BoxConstraint& b) {
  json axes = json::array();
  for (const auto& a : b.axes) {
    auto o = axis_json(a);
    o["var"] = a.variable;
    axes.push_back(std::move(o));
  }
  return axes;
}

BoxConstraint box_from(const json& j) {
  BoxConstraint b;
  if (j.is_array()) {
    for (const auto& o : j) b.axes.push_back(axis_from(field(o, "var").get<std::string>(), o));
  } else if (j.is_object()) {
    for (const auto& [var, o] : j.items()) b.axes.push_back(axis_from(var, o));
  } else {
    bad("box must be an array or object");
  }
  return b;
}

}  // namespace

// --- tagged -----------------------------------------------------------------

json to_json(const Value& v) {
  struct V {
    json operator()(const Real& r) const { return {{"r", format_double(r.value)}, {"u", r.unit}}; }
    json operator()(const Symbol& s) const { return {{"s", s.name}}; }
    json operator()(const Unspecified&) const { return {{"*", true}}; }
    json operator()(const ProfileRef& p) const { return {{"p", p.id}}; }
    json operator()(const BoxConstraint& b) const { return {{"box", box_json(b)}}; }
  };
  return std::visit(V{}, v.storage());
}

Value value_from_json(const json& j) {
  if (!j.is_object()) bad("tagged value must be an object");
  if (j.contains("r")) return Real{parse_double(j.at("r").get<std::string>()), j.value("u", std::string("dimensionless"))};
  if (j.contains("s")) return Symbol{j.at("s").get<std::string>()};
  if (j.contains("*")) return Unspecified{};
  if (j.contains("p")) return ProfileRef{j.at("p").get<std::string>()};
  if (j.contains("box")) return box_from(j.at("box"));
  bad("unknown value tag in " + j.dump());
}

json to_json(const Binding& b) {
  json o = json::object();
  for (const auto& [k, v] : b) o[k] = to_json(v);
  return o;
}

Binding binding_from_json(const json& j) {
  if (!j.is_object()) bad("binding must be an object");
  Binding b;
  for (const auto& [k, v] : j.items()) b.emplace(k, value_from_json(v));
  return b;
}

json to_json(const Query& q) { return {{"language", q.language}, {"binding", to_json(q.binding)}}; }

Query query_from_json(const json& j) {
  return {field(j, "language").get<std::string>(), binding_from_json(field(j, "binding"))};
}

json to_json(const Answer& a) {
  if (const auto* b = std::get_if<bool>(&a)) return {{"bool", *b}};
  const auto& f = std::get<ParetoFront>(a);
  json pts = json::array();
  for (const auto& p : f.points) pts.push_back(to_json(p));
  return {{"front", std::move(pts)}, {"all_skipped", f.all_skipped}};
}

Answer answer_from_json(const json& j) {
  if (j.contains("bool")) return j.at("bool").get<bool>();
  ParetoFront f;
  for (const auto& p : field(j, "front")) f.points.push_back(binding_from_json(p));
  f.all_skipped = j.value("all_skipped", false);
  return f;
}

json to_json(const Request& r) {
  return {{"language", r.language}, {"binding", to_json(r.binding)}, {"poi", r.poi}};
}

Request request_from_json(const json& j) {
  Request r;
  r.language = field(j, "language").get<std::string>();
  r.binding = binding_from_json(field(j, "binding"));
  r.poi = field(j, "poi").get<std::set<std::string>>();
  return r;
}

json to_json(const Response& r) {
  if (r.skipped) return {{"skipped", true}};
  return {{"binding", to_json(r.binding)}};
}

Response response_from_json(const json& j) {
  Response r;
  r.skipped = j.value("skipped", false);
  if (!r.skipped) r.binding = binding_from_json(field(j, "binding"));
  return r;
}

json to_json(const ExperimentSpec& s) {
  return {{"language", s.language},          {"kind", s.kind},
          {"parameters", to_json(s.parameters)}, {"frame_tag", s.frame_tag},
          {"origin_request", s.origin_request},  {"origin_query", s.origin_query}};
}

ExperimentSpec spec_from_json(const json& j) {
  ExperimentSpec s;
  s.language = field(j, "language").get<std::string>();
  s.kind = field(j, "kind").get<std::string>();
  s.parameters = binding_from_json(field(j, "parameters"));
  s.frame_tag = j.value("frame_tag", std::string());
  s.origin_request = j.value("origin_request", std::string());
  s.origin_query = j.value("origin_query", std::string());
  return s;
}

json to_json(const ResultMeta& m) {
  return {{"spec_key", m.spec_key}, {"wall_time_s", format_double(m.wall_time_s)}, {"step", format_double(m.step)}};
}

ResultMeta meta_from_json(const json& j) {
  ResultMeta m;
  m.spec_key = field(j, "spec_key").get<std::string>();
  m.wall_time_s = parse_double(field(j, "wall_time_s").get<std::string>());
  m.step = parse_double(field(j, "step").get<std::string>());
  return m;
}

// --- plain ------------------------------------------------------------------

Binding parse_plain_binding(const QueryLanguage& lang, const json& j) {
  if (!j.is_object()) bad("binding must be an object");
  Binding b;
  for (const auto& [raw, v] : j.items()) {
    auto alias = lang.aliases.find(raw);
    const std::string name = alias == lang.aliases.end() ? raw : alias->second;
    auto dom = lang.domains.find(name);
    if (dom == lang.domains.end())
      throw Error(ErrorCode::SchemeMismatch, lang.id + ": unknown variable '" + raw + "'");
    Value value;
    if (const auto* rd = std::get_if<RealDomain>(&dom->second)) {
      if (v.is_string() && v.get<std::string>() == "*") value = Unspecified{};
      else value = Real{real_of(v), rd->unit};
    } else if (std::holds_alternative<EnumDomain>(dom->second)) {
      if (!v.is_string()) bad("'" + raw + "' expects a symbol");
      value = Symbol{v.get<std::string>()};
    } else if (std::holds_alternative<ProfileDomain>(dom->second)) {
      if (!v.is_string()) bad("'" + raw + "' expects a profile id");
      value = ProfileRef{v.get<std::string>()};
    } else {
      value = box_from(v);
    }
    if (!b.emplace(raw, std::move(value)).second) bad("variable '" + raw + "' bound twice");
  }
  return b;
}

json plain(const Value& v) {
  struct V {
    json operator()(const Real& r) const {
      if (std::isfinite(r.value)) return r.value;
      return format_double(r.value);
    }
    json operator()(const Symbol& s) const { return s.name; }
    json operator()(const Unspecified&) const { return "*"; }
    json operator()(const ProfileRef& p) const { return p.id; }
    json operator()(const BoxConstraint& b) const {
      json o = json::object();
      for (const auto& a : b.axes)
        o[a.variable] = {{"min", a.min}, {"max", a.max}, {"step", a.step}, {"include_max", a.include_max}};
      return o;
    }
  };
  return std::visit(V{}, v.storage());
}

json plain(const Binding& b) {
  json o = json::object();
  for (const auto& [k, v] : b) o[k] = plain(v);
  return o;
}

json plain(const Answer& a) {
  if (const auto* b = std::get_if<bool>(&a)) return *b;
  const auto& f = std::get<ParetoFront>(a);
  json pts = json::array();
  for (const auto& p : f.points) pts.push_back(plain(p));
  return {{"front", std::move(pts)}, {"all_skipped", f.all_skipped}};
}

json describe(const QueryLanguage& lang) {
  json vars = json::object();
  for (const auto& [name, dom] : lang.domains) {
    json d;
    if (const auto* rd = std::get_if<RealDomain>(&dom)) {
      d = {{"kind", "real"}, {"unit", rd->unit}, {"allow_unspecified", rd->allow_unspecified}};
      if (rd->min) d["min"] = *rd->min;
      if (rd->max) d["max"] = *rd->max;
    } else if (const auto* ed = std::get_if<EnumDomain>(&dom)) {
      d = {{"kind", "enum"}, {"members", ed->members}};
    } else if (const auto* cd = std::get_if<ConstraintDomain>(&dom)) {
      d = {{"kind", "box"}, {"variables", cd->variables}};
    } else {
      d = {{"kind", "profile"}, {"members", std::get<ProfileDomain>(dom).members}};
    }
    vars[name] = std::move(d);
  }
  json schemes = json::array();
  for (const auto& s : lang.schemes) schemes.push_back(s);
  return {{"id", lang.id},
          {"variables", std::move(vars)},
          {"schemes", std::move(schemes)},
          {"aliases", lang.aliases},
          {"answer", lang.answer == AnswerKind::Boolean ? "boolean" : "pareto-set"}};
}

}  // namespace expreuse::codec
