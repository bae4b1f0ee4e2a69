#include <expreuse/battery.hpp>

#include <expreuse/error.hpp>
#include <expreuse/pareto.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace expreuse::battery {

namespace {

constexpr const char* kVars[3] = {"Voltage", "MaxTorque", "InternalRes"};
constexpr const char* kUnits[3] = {"V", "Nm", "ohm"};

}  // namespace

DriveCycle DriveCycle::standard() {
  DriveCycle c;
  c.id = kStandardCycle;
  c.dt = 1.0;
  c.power.resize(1800);
  for (std::size_t k = 0; k < c.power.size(); ++k)
    c.power[k] = 50000.0 + 30000.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(k) / 300.0);
  return c;
}

DriveCycle DriveCycle::load(const std::string& id, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read drive cycle '" + path.string() + "'");
  std::vector<double> t;
  DriveCycle c;
  c.id = id;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double time = 0.0;
    double watts = 0.0;
    if (!(ss >> time >> watts)) throw Error(ErrorCode::ConfigError, path.string() + ": malformed line '" + line + "'");
    t.push_back(time);
    c.power.push_back(watts);
  }
  if (t.size() < 2) throw Error(ErrorCode::ConfigError, path.string() + ": need at least two samples");
  c.dt = t[1] - t[0];
  if (!(c.dt > 0.0)) throw Error(ErrorCode::ConfigError, path.string() + ": time must increase");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (std::fabs((t[i] - t[i - 1]) - c.dt) > 1e-9 * std::max(1.0, c.dt))
      throw Error(ErrorCode::ConfigError, path.string() + ": samples are not equally spaced");
  return c;
}

CycleLibrary::CycleLibrary() { add(DriveCycle::standard()); }

void CycleLibrary::add(DriveCycle cycle) {
  const std::string id = cycle.id;
  cycles_[id] = std::move(cycle);
}

const DriveCycle& CycleLibrary::get(const std::string& id) const {
  auto it = cycles_.find(id);
  if (it == cycles_.end()) throw Error(ErrorCode::DomainViolation, "unknown drive cycle '" + id + "'");
  return it->second;
}

bool CycleLibrary::contains(const std::string& id) const { return cycles_.count(id) > 0; }

std::vector<std::string> CycleLibrary::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : cycles_) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------------------

ExperimentResult simulate_battery(const Layout& l, const DriveCycle& cycle) {
  if (!(l.voltage > 0.0) || !(l.max_torque > 0.0) || !(l.internal_res >= 0.0) || !std::isfinite(l.voltage) ||
      !std::isfinite(l.max_torque) || !std::isfinite(l.internal_res))
    throw Error(ErrorCode::InvalidLayout, "battery layout needs Voltage > 0, MaxTorque > 0, InternalRes >= 0");
  const std::size_t n = cycle.power.size();
  Trace soc;
  Trace tbl;
  soc.time.reserve(n + 1);
  soc.value.reserve(n + 1);
  tbl.value.reserve(n + 1);
  double energy = 0.0;
  double losses = 0.0;
  soc.time.push_back(0.0);
  soc.value.push_back(100.0);
  tbl.value.push_back(0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double p = cycle.power[k];
    const double current = p / l.voltage;
    const double loss = current * current * l.internal_res +
                        kOverloadFactor * std::max(0.0, p / kOmega - l.max_torque) * kOmega;
    energy += (p + loss) * cycle.dt;
    losses += loss * cycle.dt;
    soc.time.push_back(static_cast<double>(k + 1) * cycle.dt);
    soc.value.push_back(100.0 * (1.0 - energy / kCapacity));
    tbl.value.push_back(losses);
  }
  tbl.time = soc.time;
  ExperimentResult r;
  r.traces.emplace("SoC", std::move(soc));
  r.traces.emplace("TBL", std::move(tbl));
  r.meta.step = cycle.dt;
  return r;
}

BatteryMetrics metrics_of(const ExperimentResult& result) {
  const Trace* soc = result.trace("SoC");
  const Trace* tbl = result.trace("TBL");
  if (!soc || !tbl || soc->value.empty() || tbl->value.empty())
    throw Error(ErrorCode::MissingSignal, "battery result needs SoC and TBL traces");
  return {soc->value.back(), tbl->value.back()};
}

Response battery_compute(const Request& r, std::span<const ExperimentResult> results) {
  if (results.empty()) throw Error(ErrorCode::EmptyResults, "battery: no simulation result");
  const auto& res = results.back();
  Response rsp;
  for (const auto& p : r.poi) {
    const Trace* t = res.trace(p);
    if (!t || t->value.empty()) throw Error(ErrorCode::MissingSignal, "battery: no '" + p + "' trace");
    if (p == "SoC") {
      // minimal state of charge; the last value whenever demand never turns negative
      rsp.binding["SoC"] = Value::real(*std::min_element(t->value.begin(), t->value.end()), "%");
    } else if (p == "TBL") {
      rsp.binding["TBL"] = Value::real(t->value.back(), "J");
    } else {
      throw Error(ErrorCode::MissingSignal, "battery: unknown property '" + p + "'");
    }
  }
  return rsp;
}

bool battery_justify_unstable(const Layout& fresh, const Layout& stored, double stored_soc) {
  return stored.stim == fresh.stim && stored.voltage >= fresh.voltage && stored.max_torque >= fresh.max_torque &&
         stored.internal_res <= fresh.internal_res && stored_soc < kUnstableSoC;
}

Layout layout_of(const Binding& b) {
  Layout l{number_of(b, "Voltage"), number_of(b, "MaxTorque"), number_of(b, "InternalRes"), kStandardCycle};
  if (auto it = b.find("stim"); it != b.end()) l.stim = it->second.as_profile().id;
  return l;
}

Request layout_request(const Layout& l, std::set<std::string> poi) {
  Request r;
  r.language = kRequestLanguage;
  const double xs[3] = {l.voltage, l.max_torque, l.internal_res};
  for (int i = 0; i < 3; ++i) r.binding.emplace(kVars[i], Value::real(xs[i], kUnits[i]));
  r.binding.emplace("stim", Value::profile(l.stim));
  r.poi = std::move(poi);
  return r;
}

Query box_query(const BoxConstraint& box, const std::string& stim, const std::string& poi) {
  Query q;
  q.language = kQueryLanguage;
  for (int i = 0; i < 3; ++i) {
    if (!box.axis(kVars[i]))
      throw Error(ErrorCode::DomainViolation, std::string("tms box needs an axis for '") + kVars[i] + "'");
    q.binding.emplace(kVars[i], Value::unspecified());
  }
  q.binding.emplace("stim", Value::profile(stim));
  q.binding.emplace("Constr", Value(box));
  q.binding.emplace("PoI", Value::symbol(poi));
  return q;
}

namespace {

std::set<std::string> poi_set(const Query& q) {
  auto it = q.binding.find("PoI");
  const std::string s = it == q.binding.end() ? "TBL,SoC" : it->second.as_symbol().name;
  if (s == "SoC") return {"SoC"};
  if (s == "TBL") return {"TBL"};
  return {"SoC", "TBL"};
}

double poi_code(const std::set<std::string>& poi) {
  return (poi.count("SoC") ? 1.0 : 0.0) + (poi.count("TBL") ? 2.0 : 0.0);
}

void validate_tms(const Query& q) {
  const auto& box = q.binding.at("Constr").as_box();
  std::set<std::string> seen;
  for (const auto& a : box.axes)
    if (!seen.insert(a.variable).second)
      throw Error(ErrorCode::DomainViolation, "tms: variable '" + a.variable + "' constrained twice");
  for (const char* v : kVars) {
    const bool free = q.binding.at(v).is_unspecified();
    if (free != (box.axis(v) != nullptr))
      throw Error(ErrorCode::DomainViolation, std::string("tms: '") + v +
                                                  (free ? "' is under-specified but not constrained"
                                                        : "' is fixed but also constrained"));
  }
}

std::vector<Request> decompose_tms(const Query& q) {
  const auto& box = q.binding.at("Constr").as_box();
  std::vector<std::vector<double>> axes(3);
  for (int i = 0; i < 3; ++i) {
    const auto& v = q.binding.at(kVars[i]);
    axes[i] = v.is_unspecified() ? box.axis(kVars[i])->values() : std::vector<double>{v.number()};
  }
  const std::string stim = q.binding.at("stim").as_profile().id;
  const auto poi = poi_set(q);
  std::vector<Request> out;
  out.reserve(axes[0].size() * axes[1].size() * axes[2].size());
  for (double a : axes[0])
    for (double b : axes[1])
      for (double c : axes[2]) out.push_back(layout_request({a, b, c, stim}, poi));
  return out;
}

Answer aggregate_tms(const Query& q, std::span<const RequestResponse> rs) {
  const auto poi = poi_set(q);
  std::vector<Objective> objectives;
  std::vector<std::size_t> source;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const auto& rsp = rs[i].response;
    if (rsp.skipped) continue;
    // unstable layouts are never design candidates, however they were found out
    if (auto soc = rsp.binding.find("SoC"); soc != rsp.binding.end() && soc->second.number() < kUnstableSoC) continue;
    Objective o;
    o.cost = poi.count("TBL") ? number_of(rsp.binding, "TBL") : 0.0;
    o.gain = poi.count("SoC") ? number_of(rsp.binding, "SoC") : 0.0;
    objectives.push_back(o);
    source.push_back(i);
  }
  ParetoFront front;
  front.all_skipped = objectives.empty() && !rs.empty();
  for (auto k : pareto_front(objectives)) {
    const auto& rr = rs[source[k]];
    Binding point = rr.request.binding;
    for (const auto& [name, v] : rr.response.binding) point.emplace(name, v);
    front.points.push_back(std::move(point));
  }
  return front;
}

}  // namespace

void register_battery(LanguageRegistry& registry, const BatteryConfig& config) {
  auto cycles = config.cycles ? config.cycles : std::make_shared<const CycleLibrary>();

  QueryLanguage tms;
  tms.id = kQueryLanguage;
  tms.variables = {"Voltage", "MaxTorque", "InternalRes", "stim", "Constr", "PoI"};
  tms.schemes = {tms.variables, {"Voltage", "MaxTorque", "InternalRes", "stim", "Constr"}};
  for (int i = 0; i < 3; ++i) tms.domains[kVars[i]] = RealDomain{kUnits[i], 0.0, std::nullopt, true};
  tms.domains["stim"] = ProfileDomain{cycles->ids()};
  tms.domains["Constr"] = ConstraintDomain{{"Voltage", "MaxTorque", "InternalRes"}};
  tms.domains["PoI"] = EnumDomain{{"TBL,SoC", "SoC", "TBL"}};
  tms.answer = AnswerKind::ParetoSet;
  registry.register_language(tms);

  RequestLanguage req;
  req.id = kRequestLanguage;
  req.request_vars = {"Voltage", "MaxTorque", "InternalRes", "stim"};
  req.poi_vars = {"SoC", "TBL"};
  for (int i = 0; i < 3; ++i) req.domains[kVars[i]] = RealDomain{kUnits[i], 0.0, std::nullopt, false};
  req.domains["stim"] = ProfileDomain{cycles->ids()};
  req.domains["SoC"] = RealDomain{"%", std::nullopt, 100.0, false};
  req.domains["TBL"] = RealDomain{"J", 0.0, std::nullopt, false};
  registry.register_language(req);

  SpecLanguage sim;
  sim.id = kSpecLanguage;
  sim.order.kinds = {"Load", "Execute"};
  sim.order.before = {{"Load", "Execute"}};
  sim.result_kinds = {"Execute"};
  sim.result_schema = {{"SoC", "%"}, {"TBL", "J"}};
  registry.register_language(sim);

  DecompositionRule rule;
  rule.request_language = kRequestLanguage;
  rule.validate = validate_tms;
  rule.decompose = decompose_tms;
  rule.aggregate = aggregate_tms;
  registry.register_decomposer(kQueryLanguage, std::move(rule));

  CompletionRule completion;
  completion.spec_language = kSpecLanguage;
  completion.complete = [](const Request& r) {
    ExperimentSpec load;
    load.language = kSpecLanguage;
    load.kind = "Load";
    load.parameters.emplace("model", Value::symbol("battery-surrogate"));
    load.parameters.emplace("stim", r.binding.at("stim"));
    ExperimentSpec run;
    run.language = kSpecLanguage;
    run.kind = "Execute";
    run.parameters = r.binding;
    return std::vector<ExperimentSpec>{load, run};
  };
  completion.compute = battery_compute;
  registry.register_completer(kRequestLanguage, std::move(completion));

  registry.register_executor(kSpecLanguage, [cycles](const ExperimentSpec& s) {
    if (s.kind == "Load") {
      (void)cycles->get(s.parameters.at("stim").as_profile().id);
      return ExperimentResult{};
    }
    const Layout l = layout_of(s.parameters);
    return simulate_battery(l, cycles->get(l.stim));
  });

  RequestScheme scheme;
  scheme.layer = Layer::Decomposition;
  scheme.featurize = [](const Request& r) {
    const Layout l = layout_of(r.binding);
    return Features{std::string(kRequestLanguage) + "|" + l.stim,
                    {l.voltage, l.max_torque, l.internal_res, poi_code(r.poi)}};
  };
  const auto& t = config.tolerances;
  if (t[0] > 0.0 || t[1] > 0.0 || t[2] > 0.0) {
    scheme.get_distance = tolerance_distance({t[0], t[1], t[2], 0.0});
    scheme.t_get = 1.0;
  }
  if (config.recomputation) {
    scheme.comp_distance = tolerance_distance({0.0, 0.0, 0.0, kInfinity});
    scheme.t_comp = 1.0;
  }
  if (config.symbolic) {
    scheme.justify = [](const JustifyArgs<Request, Response>& a) -> std::optional<Response> {
      if (a.fresh.poi != std::set<std::string>{"SoC", "TBL"} || a.stored_value.skipped) return std::nullopt;
      auto soc = a.stored_value.binding.find("SoC");
      if (soc == a.stored_value.binding.end()) return std::nullopt;
      const auto& f = a.fresh_features.x;
      const auto& s = a.stored_features.x;
      const Layout fresh{f[0], f[1], f[2], kStandardCycle};
      const Layout stored{s[0], s[1], s[2], kStandardCycle};
      if (!battery_justify_unstable(fresh, stored, soc->second.number())) return std::nullopt;
      Response skip;
      skip.skipped = true;
      return skip;
    };
    scheme.justify_source = [](const Response& r) {
      if (r.skipped) return false;
      auto soc = r.binding.find("SoC");
      return soc != r.binding.end() && soc->second.number() < kUnstableSoC;
    };
  }
  registry.register_scheme(kRequestLanguage, std::move(scheme));
}

}  // namespace expreuse::battery
