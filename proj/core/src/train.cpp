#include <expreuse/train.hpp>

#include <expreuse/error.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace expreuse::train {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Variable names and units of the eng language and the request language.
constexpr const char* kVars[5] = {"m", "F_B", "v", "mu", "theta"};
constexpr const char* kUnits[5] = {"t", "kN/T", "km/h", "dimensionless", "deg"};

}  // namespace

void check(const TrainParams& p) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::DomainViolation, "train: " + what); };
  if (!(p.m > 0.0) || !std::isfinite(p.m)) fail("mass must be positive");
  if (!(p.F_B >= 0.0) || !std::isfinite(p.F_B)) fail("braking force must be non-negative");
  if (!(p.v >= 0.0) || !std::isfinite(p.v)) fail("velocity must be non-negative");
  if (!(p.mu >= 0.0 && p.mu <= 1.0)) fail("friction must lie in [0, 1]");
  if (!(p.theta >= -45.0 && p.theta <= 45.0)) fail("slope must lie in [-45, 45] degrees");
}

double slope_term(double mu, double theta_deg) {
  const double t = theta_deg * kDegToRad;
  return std::sin(t) + mu * std::cos(t);
}

double deceleration(const TrainParams& p) { return p.F_B + p.m * kGravity * slope_term(p.mu, p.theta); }

double stopping_distance_closed_form(const TrainParams& p) {
  const double u = to_mps(p.v);
  if (u == 0.0) return 0.0;
  const double a = deceleration(p);
  if (!(a > 0.0)) return kInfinity;
  return u * u / (2.0 * a);
}

TrainTrace simulate_trace(const TrainParams& p) {
  check(p);
  TrainTrace tr;
  double u = to_mps(p.v);
  const double a = deceleration(p);
  double x = 0.0;
  double t = 0.0;
  auto sample = [&] {
    tr.time.push_back(t);
    tr.displacement.push_back(x);
    tr.velocity.push_back(u);
  };
  const auto cap = static_cast<std::size_t>(std::llround(kTMax / kDt));
  tr.time.reserve(a > 0.0 ? 256 : cap + 1);
  sample();
  std::size_t steps = 0;
  if (u > 0.0 && a > 0.0) {
    while (steps < cap) {
      if (u - a * kDt <= 0.0) {
        x += u * u / (2.0 * a);  // exact remainder of the braking run
        t += u / a;
        u = 0.0;
        sample();
        break;
      }
      x += u * kDt - 0.5 * a * kDt * kDt;
      u -= a * kDt;
      ++steps;
      t = static_cast<double>(steps) * kDt;
      sample();
    }
  } else if (u > 0.0) {
    while (steps < cap) {
      x += u * kDt - 0.5 * a * kDt * kDt;
      u -= a * kDt;
      ++steps;
      t = static_cast<double>(steps) * kDt;
      sample();
    }
  }
  tr.stopped = u == 0.0;
  if (tr.stopped) {
    const double t_stop = t;
    for (int k = 1; k <= kTailSamples; ++k) {
      t = t_stop + k * kDt;
      sample();
    }
  }
  return tr;
}

ExperimentResult to_result(const TrainTrace& trace) {
  ExperimentResult r;
  r.traces["displacement"] = Trace{trace.time, trace.displacement};
  r.traces["velocity"] = Trace{trace.time, trace.velocity};
  r.meta.step = kDt;
  return r;
}

Response train_compute(const Request& r, std::span<const ExperimentResult> results) {
  if (results.empty()) throw Error(ErrorCode::EmptyResults, "train: no simulation result");
  for (const auto& p : r.poi)
    if (p != "stopDist") throw Error(ErrorCode::MissingSignal, "train: no signal yields '" + p + "'");
  const Trace* x = results.front().trace("displacement");
  const Trace* v = results.front().trace("velocity");
  if (!x || !v || x->value.empty() || v->value.empty())
    throw Error(ErrorCode::MissingSignal, "train: displacement and velocity traces required");
  const bool stopped = v->value.back() == 0.0;
  const double d = stopped ? *std::max_element(x->value.begin(), x->value.end()) : kInfinity;
  Response rsp;
  rsp.binding["stopDist"] = Value::real(d, "m");
  return rsp;
}

TrainParams params_of(const Binding& b) {
  return {number_of(b, "m"), number_of(b, "F_B"), number_of(b, "v"), number_of(b, "mu"), number_of(b, "theta")};
}

Binding binding_of(const TrainParams& p) {
  const double xs[5] = {p.m, p.F_B, p.v, p.mu, p.theta};
  Binding b;
  for (int i = 0; i < 5; ++i) b.emplace(kVars[i], Value::real(xs[i], kUnits[i]));
  return b;
}

// ---------------------------------------------------------------------------

bool no_harder_than(const TrainParams& s, const TrainParams& f) {
  if (!(f.v <= s.v && f.F_B >= s.F_B && f.mu >= s.mu && f.theta >= s.theta)) return false;
  if (f.m == s.m) return true;
  return (slope_term(s.mu, s.theta) >= 0.0 && f.m >= s.m) || (slope_term(f.mu, f.theta) <= 0.0 && f.m <= s.m);
}

bool no_easier_than(const TrainParams& s, const TrainParams& f) {
  if (!(f.v >= s.v && f.F_B <= s.F_B && f.mu <= s.mu && f.theta <= s.theta)) return false;
  if (f.m == s.m) return true;
  return (slope_term(f.mu, f.theta) >= 0.0 && f.m <= s.m) || (slope_term(s.mu, s.theta) <= 0.0 && f.m >= s.m);
}

std::optional<bool> train_justify(const TrainParams& fresh, double fresh_dist, const TrainParams& stored,
                                  double stored_dist, bool stored_answer, std::optional<double> stored_stop) {
  if (stored_stop) {
    if (*stored_stop < fresh_dist && no_harder_than(stored, fresh)) return true;
    if (*stored_stop > fresh_dist && no_easier_than(stored, fresh)) return false;
  }
  if (stored_answer && stored_dist <= fresh_dist && no_harder_than(stored, fresh)) return true;
  if (!stored_answer && fresh_dist <= stored_dist && no_easier_than(stored, fresh)) return false;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

Catalog default_catalog() {
  Catalog c;
  c.trains = {{"t1", {120.0, 2.4}}, {"t2", {300.0, 1.6}}, {"t3", {100.0, 0.05}}};
  c.situations = {{"lvl1", {100.0, 0.12, -6.8, 900.0}}, {"lvl2", {160.0, 0.06, -3.5, 1200.0}}};
  return c;
}

Query eng_query(const TrainParams& p, double dist) {
  Query q{kEngLanguage, binding_of(p)};
  q.binding.emplace("dist", Value::real(dist, "m"));
  return q;
}

Query sale_query(const std::string& train, const std::optional<std::string>& situation) {
  Query q{kSaleLanguage, {}};
  q.binding.emplace("train", Value::symbol(train));
  if (situation) q.binding.emplace("situation", Value::symbol(*situation));
  return q;
}

namespace {

Request request_for(const TrainParams& p) {
  return {kRequestLanguage, binding_of(p), {"stopDist"}};
}

TrainParams from_features(const Features& f) { return {f.x[0], f.x[1], f.x[2], f.x[3], f.x[4]}; }

std::optional<double> stop_of(const std::vector<RequestResponse>* rs) {
  if (!rs || rs->size() != 1 || rs->front().response.skipped) return std::nullopt;
  const auto& b = rs->front().response.binding;
  auto it = b.find("stopDist");
  if (it == b.end() || !it->second.is_real()) return std::nullopt;
  return it->second.number();
}

std::vector<double> tolerance_vector(const Tolerances& t, double t_dist) {
  return {t[0], t[1], t[2], t[3], t[4], t_dist};
}

std::vector<std::string> keys_of(const auto& map) {
  std::vector<std::string> out;
  for (const auto& [k, _] : map) out.push_back(k);
  return out;
}

}  // namespace

void register_train(LanguageRegistry& registry, const TrainConfig& config) {
  const Catalog catalog = config.catalog;

  QueryLanguage eng;
  eng.id = kEngLanguage;
  eng.variables = {"m", "F_B", "v", "mu", "theta", "dist"};
  eng.schemes = {eng.variables};
  eng.domains["m"] = RealDomain{"t", 0.0, std::nullopt, false};
  eng.domains["F_B"] = RealDomain{"kN/T", 0.0, std::nullopt, false};
  eng.domains["v"] = RealDomain{"km/h", 0.0, std::nullopt, false};
  eng.domains["mu"] = RealDomain{"dimensionless", 0.0, 1.0, false};
  eng.domains["theta"] = RealDomain{"deg", -45.0, 45.0, false};
  eng.domains["dist"] = RealDomain{"m", 0.0, std::nullopt, false};
  eng.aliases = {{"slip", "mu"}, {"weight", "m"}, {"slope", "theta"}};
  eng.answer = AnswerKind::Boolean;
  registry.register_language(eng);

  QueryLanguage sale;
  sale.id = kSaleLanguage;
  sale.variables = {"train", "situation"};
  sale.schemes = {{"train", "situation"}, {"train"}};
  sale.domains["train"] = EnumDomain{keys_of(catalog.trains)};
  sale.domains["situation"] = EnumDomain{keys_of(catalog.situations)};
  sale.answer = AnswerKind::Boolean;
  registry.register_language(sale);

  RequestLanguage req;
  req.id = kRequestLanguage;
  req.request_vars = {"m", "F_B", "v", "mu", "theta"};
  req.poi_vars = {"stopDist"};
  for (const auto& v : req.request_vars) req.domains[v] = eng.domains.at(v);
  req.domains["stopDist"] = RealDomain{"m", 0.0, std::nullopt, false};
  registry.register_language(req);

  SpecLanguage sim;
  sim.id = kSpecLanguage;
  sim.order.kinds = {"Simulate"};
  sim.result_kinds = {"Simulate"};
  sim.result_schema = {{"displacement", "m"}, {"velocity", "m/s"}};
  registry.register_language(sim);

  auto stop_of_response = [](const Response& r) {
    return r.skipped ? kInfinity : number_of(r.binding, "stopDist");
  };

  DecompositionRule eng_rule;
  eng_rule.request_language = kRequestLanguage;
  eng_rule.validate = [](const Query& q) { check(params_of(q.binding)); };
  eng_rule.decompose = [](const Query& q) { return std::vector<Request>{request_for(params_of(q.binding))}; };
  eng_rule.aggregate = [stop_of_response](const Query& q, std::span<const RequestResponse> rs) -> Answer {
    return stop_of_response(rs.front().response) < number_of(q.binding, "dist");
  };
  registry.register_decomposer(kEngLanguage, std::move(eng_rule));

  auto situations_of = [catalog](const Query& q) {
    std::vector<std::string> out;
    if (auto it = q.binding.find("situation"); it != q.binding.end()) out.push_back(it->second.as_symbol().name);
    else out = keys_of(catalog.situations);
    return out;
  };
  auto params_for = [catalog](const std::string& train, const std::string& situation) {
    const auto& t = catalog.trains.at(train);
    const auto& s = catalog.situations.at(situation);
    return TrainParams{t.m, t.F_B, s.v, s.mu, s.theta};
  };

  DecompositionRule sale_rule;
  sale_rule.request_language = kRequestLanguage;
  sale_rule.decompose = [situations_of, params_for](const Query& q) {
    const auto train = q.binding.at("train").as_symbol().name;
    std::vector<Request> out;
    for (const auto& s : situations_of(q)) out.push_back(request_for(params_for(train, s)));
    return out;
  };
  sale_rule.aggregate = [catalog, situations_of, params_for, stop_of_response](
                             const Query& q, std::span<const RequestResponse> rs) -> Answer {
    const auto train = q.binding.at("train").as_symbol().name;
    for (const auto& s : situations_of(q)) {
      const auto key = request_for(params_for(train, s)).key();
      auto it = std::find_if(rs.begin(), rs.end(), [&](const RequestResponse& rr) { return rr.request.key() == key; });
      if (it == rs.end()) throw Error(ErrorCode::MissingResponses, "train-sale: no response for situation " + s);
      if (!(stop_of_response(it->response) < catalog.situations.at(s).dist)) return false;
    }
    return true;
  };
  registry.register_decomposer(kSaleLanguage, std::move(sale_rule));

  CompletionRule completion;
  completion.spec_language = kSpecLanguage;
  completion.complete = [](const Request& r) {
    ExperimentSpec s;
    s.language = kSpecLanguage;
    s.kind = "Simulate";
    s.parameters = r.binding;
    return std::vector<ExperimentSpec>{s};
  };
  completion.compute = train_compute;
  registry.register_completer(kRequestLanguage, std::move(completion));

  registry.register_executor(kSpecLanguage, [](const ExperimentSpec& s) {
    return to_result(simulate_trace(params_of(s.parameters)));
  });

  // --- schemes ---
  QueryScheme eng_scheme;
  eng_scheme.layer = Layer::User;
  eng_scheme.featurize = [](const Query& q) {
    const auto p = params_of(q.binding);
    return Features{kEngLanguage, {p.m, p.F_B, p.v, p.mu, p.theta, number_of(q.binding, "dist")}};
  };
  if (config.user_tolerances) {
    eng_scheme.get_distance = tolerance_distance(tolerance_vector(*config.user_tolerances, config.t_dist));
    eng_scheme.t_get = 1.0;
  }
  if (config.user_recomputation) {
    eng_scheme.comp_distance = tolerance_distance({0, 0, 0, 0, 0, kInfinity});
    eng_scheme.t_comp = 1.0;
  }
  if (config.symbolic) {
    eng_scheme.justify = [](const JustifyArgs<Query, Answer>& a) -> std::optional<Answer> {
      const auto* stored_answer = std::get_if<bool>(&a.stored_value);
      if (!stored_answer) return std::nullopt;
      auto v = train_justify(from_features(a.fresh_features), a.fresh_features.x[5], from_features(a.stored_features),
                             a.stored_features.x[5], *stored_answer, stop_of(a.stored_responses));
      if (!v) return std::nullopt;
      return Answer{*v};
    };
  }
  registry.register_scheme(kEngLanguage, std::move(eng_scheme));

  if (config.symbolic) {
    QueryScheme sale_scheme;
    sale_scheme.layer = Layer::User;
    sale_scheme.featurize = [](const Query& q) {
      return Features{std::string(kSaleLanguage) + "|" + q.binding.at("train").as_symbol().name, {}};
    };
    sale_scheme.justify = [catalog, params_for](const JustifyArgs<Query, Answer>& a) -> std::optional<Answer> {
      const auto* stored = std::get_if<bool>(&a.stored_value);
      if (!stored) return std::nullopt;
      const auto fs = a.fresh.binding.find("situation");
      const auto ss = a.stored.binding.find("situation");
      const bool fresh_all = fs == a.fresh.binding.end();
      const bool stored_all = ss == a.stored.binding.end();
      if (!fresh_all && stored_all) {
        if (*stored) return Answer{true};
        if (!a.stored_responses) return std::nullopt;
        const auto train = a.fresh.binding.at("train").as_symbol().name;
        const auto situation = fs->second.as_symbol().name;
        const auto key = request_for(params_for(train, situation)).key();
        for (const auto& rr : *a.stored_responses)
          if (rr.request.key() == key && !rr.response.skipped)
            return Answer{number_of(rr.response.binding, "stopDist") < catalog.situations.at(situation).dist};
        return std::nullopt;
      }
      if (fresh_all && !stored_all && !*stored) return Answer{false};
      return std::nullopt;
    };
    registry.register_scheme(kSaleLanguage, std::move(sale_scheme));
  }

  if (config.request_tolerances) {
    RequestScheme rs;
    rs.layer = Layer::Decomposition;
    rs.featurize = [](const Request& r) {
      const auto p = params_of(r.binding);
      std::string group = kRequestLanguage;
      for (const auto& x : r.poi) group += "|" + x;
      return Features{group, {p.m, p.F_B, p.v, p.mu, p.theta}};
    };
    rs.get_distance = tolerance_distance({config.request_tolerances->begin(), config.request_tolerances->end()});
    rs.t_get = 1.0;
    registry.register_scheme(kRequestLanguage, std::move(rs));
  }
}

}  // namespace expreuse::train
