#include "dynbif/model_io.hpp"

#include <fstream>
#include <set>

#include "dynbif/demo.hpp"

namespace dynbif {

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) throw ValidationError("schema", what + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ValidationError("schema", what + ": unknown key '" + it.key() + "'");
}

void check_schema(const json& j, const char* schema) {
  if (!j.contains("schema") || j.at("schema") != schema)
    throw ValidationError("schema", std::string("expected schema ") + schema);
}

template <class T>
T get(const json& j, const char* key, const std::string& what) {
  if (!j.contains(key)) throw ValidationError("schema", what + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("schema", what + ": bad value for '" + key + "': " + e.what());
  }
}

template <class T>
void get_opt(const json& j, const char* key, T& out, const std::string& what) {
  if (j.contains(key)) out = get<T>(j, key, what);
}

json polys_to_json(const std::vector<ScalarPoly>& ps) {
  json a = json::array();
  for (const auto& p : ps) a.push_back(poly_to_json(p));
  return a;
}

std::vector<ScalarPoly> polys_from_json(const json& j, const char* key, std::size_t count,
                                        const PolyShape& shape, const std::string& what) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != count)
    throw ValidationError("schema", what + ": '" + key + "' must be an array of " +
                                        std::to_string(count) + " polynomials");
  std::vector<ScalarPoly> out;
  for (const auto& p : j.at(key)) out.push_back(poly_from_json(p, shape));
  return out;
}

json radii_to_json(const Radii& r) { return {{"R0", r.R0}, {"Rstar", r.Rstar}, {"Rstar_up", r.Rstar_up}}; }

Radii radii_from_json(const json& j) {
  check_keys(j, {"R0", "Rstar", "Rstar_up"}, "radii");
  Radii r;
  get_opt(j, "R0", r.R0, "radii");
  get_opt(j, "Rstar", r.Rstar, "radii");
  get_opt(j, "Rstar_up", r.Rstar_up, "radii");
  r.validate();
  return r;
}

json vec_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from_json(const json& j, const char* key, const std::string& what) {
  auto v = get<std::vector<double>>(j, key, what);
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const char* target_name(TrigTerm::Target t) {
  switch (t) {
    case TrigTerm::R: return "R";
    case TrigTerm::Phi: return "Phi";
    case TrigTerm::Z: return "Z";
  }
  return "?";
}

}  // namespace

// ------------------------------------------------------------------ polynomials

json poly_to_json(const ScalarPoly& p) {
  json a = json::array();
  for (const auto& t : p.terms()) {
    if (t.c.imag() != 0.0)
      throw ValidationError("schema", "only real polynomials can be serialized");
    json e = {{"eps", t.eps}, {"c", t.c.real()}};
    if (t.y.size() > 0) e["y"] = t.y.exps();
    if (t.v.size() > 0) e["v"] = t.v.exps();
    a.push_back(e);
  }
  return a;
}

ScalarPoly poly_from_json(const json& j, const PolyShape& shape) {
  if (!j.is_array()) throw ValidationError("schema", "polynomial: expected an array of terms");
  ScalarPoly p(shape);
  for (const auto& e : j) {
    check_keys(e, {"y", "eps", "v", "c"}, "polynomial term");
    std::vector<int> y(shape.ny, 0), v(shape.nv, 0);
    get_opt(e, "y", y, "polynomial term");
    get_opt(e, "v", v, "polynomial term");
    int eps = 0;
    get_opt(e, "eps", eps, "polynomial term");
    const double c = get<double>(e, "c", "polynomial term");
    if (static_cast<int>(y.size()) != shape.ny || static_cast<int>(v.size()) != shape.nv)
      throw ValidationError("schema", "polynomial term: exponent vector length mismatch");
    MultiIndex qy(y), qv(v);
    if (qy.order() > shape.max_y || eps > shape.max_eps || qv.order() > shape.max_v || eps < 0)
      throw ValidationError("schema", "polynomial term exceeds the truncation orders");
    for (int x : y)
      if (x < 0) throw ValidationError("schema", "negative exponent");
    for (int x : v)
      if (x < 0) throw ValidationError("schema", "negative exponent");
    p.add_term(qy, eps, qv, c);
  }
  return p;
}

// ------------------------------------------------------------------ Taylor model

json taylor_to_json(const TaylorModel& tm) {
  return {{"schema", kTaylorSchema}, {"n", tm.n},
          {"m", tm.m},               {"N", tm.N},
          {"s", tm.s},               {"dv", tm.dv},
          {"radii", radii_to_json(tm.radii)},
          {"fast", polys_to_json(tm.fast)},
          {"slow", polys_to_json(tm.slow)},
          {"omega", polys_to_json(tm.omega)}};
}

TaylorModel taylor_from_json(const json& j) {
  const std::string w = "taylor model";
  check_keys(j, {"schema", "n", "m", "N", "s", "dv", "radii", "fast", "slow", "omega"}, w);
  check_schema(j, kTaylorSchema);
  TaylorModel tm;
  tm.n = get<int>(j, "n", w);
  tm.m = get<int>(j, "m", w);
  get_opt(j, "N", tm.N, w);
  get_opt(j, "s", tm.s, w);
  get_opt(j, "dv", tm.dv, w);
  require(tm.n >= 1 && tm.n <= 8 && tm.m >= 1 && tm.m <= 8, "model", "dimensions out of range");
  require(tm.N >= 3 && tm.N <= 15 && tm.s >= 1 && tm.s <= 15 && tm.dv >= 0 && tm.dv <= 15,
          "model", "truncation orders out of range");
  if (j.contains("radii")) tm.radii = radii_from_json(j.at("radii"));
  tm.fast = polys_from_json(j, "fast", 2 * tm.n, tm.shape(), w);
  tm.slow = polys_from_json(j, "slow", tm.m, tm.shape(), w);
  tm.omega = polys_from_json(j, "omega", tm.n, tm.omega_shape(), w);
  tm.validate();
  return tm;
}

// ------------------------------------------------------------------ polar model

json polar_to_json(const PolarModel& pm, double nu) {
  json j = {{"schema", kPolarSchema},
            {"n", pm.n},
            {"m", pm.m},
            {"N", pm.N},
            {"s", pm.s},
            {"dv", pm.dv},
            {"eps0", pm.eps0},
            {"rho", pm.rho},
            {"radii", radii_to_json(pm.radii)},
            {"r_scale", pm.r_scale},
            {"alpha", polys_to_json(pm.alpha)},
            {"omega", polys_to_json(pm.omega)},
            {"c", polys_to_json(pm.c)},
            {"A", polys_to_json(pm.A)},
            {"B", polys_to_json(pm.B)},
            {"W", polys_to_json(pm.W)},
            {"Psi", polys_to_json(pm.Psi)}};
  if (!pm.remainder) {
    j["remainder"] = {{"kind", "none"}};
  } else if (auto tr = std::dynamic_pointer_cast<const TrigRemainder>(pm.remainder)) {
    json terms = json::array();
    for (const auto& t : tr->terms())
      terms.push_back({{"target", target_name(t.target)},
                       {"comp", t.comp},
                       {"coef", t.coef},
                       {"sqrt_r", t.sqrt_r},
                       {"r_pow", t.r_pow},
                       {"v_pow", t.v_pow},
                       {"k", t.k},
                       {"sin", t.is_sin}});
    j["remainder"] = {{"kind", "trig"}, {"terms", terms}};
  } else if (auto nr = std::dynamic_pointer_cast<const NormalFormRemainder>(pm.remainder)) {
    j["remainder"] = {{"kind", "normal_form"}, {"nu", nu}, {"taylor_model", taylor_to_json(nr->model())}};
  } else {
    throw ValidationError("schema", "remainder kind cannot be serialized: " + pm.remainder->kind());
  }
  return j;
}

PolarModel polar_from_json(const json& j) {
  const std::string w = "polar model";
  check_keys(j, {"schema", "n", "m", "N", "s", "dv", "eps0", "rho", "radii", "r_scale", "alpha",
                 "omega", "c", "A", "B", "W", "Psi", "remainder"},
             w);
  check_schema(j, kPolarSchema);
  PolarModel pm;
  pm.n = get<int>(j, "n", w);
  pm.m = get<int>(j, "m", w);
  require(pm.n >= 1 && pm.n <= 8 && pm.m >= 1 && pm.m <= 8, "polar_model", "dimensions out of range");
  get_opt(j, "N", pm.N, w);
  get_opt(j, "s", pm.s, w);
  get_opt(j, "dv", pm.dv, w);
  get_opt(j, "eps0", pm.eps0, w);
  get_opt(j, "rho", pm.rho, w);
  if (j.contains("radii")) pm.radii = radii_from_json(j.at("radii"));
  pm.r_scale = std::vector<double>(pm.n, 1.0);
  get_opt(j, "r_scale", pm.r_scale, w);
  const PolyShape vs = pm.v_shape(), rs = pm.r_shape();
  pm.alpha = polys_from_json(j, "alpha", pm.n, vs, w);
  pm.omega = polys_from_json(j, "omega", pm.n, vs, w);
  pm.c = polys_from_json(j, "c", pm.m, vs, w);
  pm.A = polys_from_json(j, "A", pm.n * pm.n, vs, w);
  pm.B = polys_from_json(j, "B", pm.n, rs, w);
  pm.W = polys_from_json(j, "W", pm.m, rs, w);
  pm.Psi = polys_from_json(j, "Psi", pm.n, rs, w);
  if (j.contains("remainder")) {
    const json& r = j.at("remainder");
    const std::string kind = get<std::string>(r, "kind", "remainder");
    if (kind == "none") {
      check_keys(r, {"kind"}, "remainder");
    } else if (kind == "trig") {
      check_keys(r, {"kind", "terms"}, "remainder");
      std::vector<TrigTerm> terms;
      for (const auto& e : get<json>(r, "terms", "remainder")) {
        const std::string tw = "trig term";
        check_keys(e, {"target", "comp", "coef", "sqrt_r", "r_pow", "v_pow", "k", "sin"}, tw);
        TrigTerm t;
        const auto tgt = get<std::string>(e, "target", tw);
        if (tgt == "R")
          t.target = TrigTerm::R;
        else if (tgt == "Phi")
          t.target = TrigTerm::Phi;
        else if (tgt == "Z")
          t.target = TrigTerm::Z;
        else
          throw ValidationError("schema", "trig term: unknown target '" + tgt + "'");
        t.comp = get<int>(e, "comp", tw);
        t.coef = get<double>(e, "coef", tw);
        get_opt(e, "sqrt_r", t.sqrt_r, tw);
        t.r_pow = std::vector<int>(pm.n, 0);
        t.v_pow = std::vector<int>(pm.m, 0);
        t.k = std::vector<int>(pm.n, 0);
        get_opt(e, "r_pow", t.r_pow, tw);
        get_opt(e, "v_pow", t.v_pow, tw);
        get_opt(e, "k", t.k, tw);
        get_opt(e, "sin", t.is_sin, tw);
        terms.push_back(std::move(t));
      }
      pm.remainder = std::make_shared<TrigRemainder>(pm.n, pm.m, std::move(terms));
    } else if (kind == "normal_form") {
      check_keys(r, {"kind", "nu", "taylor_model"}, "remainder");
      double nu = 0.05;
      get_opt(r, "nu", nu, "remainder");
      auto tm = std::make_shared<const TaylorModel>(taylor_from_json(r.at("taylor_model")));
      require(tm->n == pm.n && tm->m == pm.m, "polar_model",
              "remainder Taylor model dimensions differ from the polar model");
      auto nf = std::make_shared<const NormalFormResult>(
          solve_normal_form(*tm, ResonanceStructure(tm->n, tm->N, nu)));
      pm.remainder = std::make_shared<NormalFormRemainder>(tm, nf);
    } else {
      throw ValidationError("schema", "unknown remainder kind '" + kind + "'");
    }
  }
  pm.validate();
  return pm;
}

bool polar_equal(const PolarModel& a, const PolarModel& b) {
  if (!(a.n == b.n && a.m == b.m && a.N == b.N && a.s == b.s && a.dv == b.dv &&
        a.eps0 == b.eps0 && a.rho == b.rho && a.radii == b.radii && a.r_scale == b.r_scale &&
        a.alpha == b.alpha && a.omega == b.omega && a.c == b.c && a.A == b.A && a.B == b.B &&
        a.W == b.W && a.Psi == b.Psi))
    return false;
  if (!a.remainder || !b.remainder) return !a.remainder && !b.remainder;
  if (a.remainder->kind() != b.remainder->kind()) return false;
  if (auto x = std::dynamic_pointer_cast<const TrigRemainder>(a.remainder)) {
    auto y = std::dynamic_pointer_cast<const TrigRemainder>(b.remainder);
    return x->terms() == y->terms();
  }
  if (auto x = std::dynamic_pointer_cast<const NormalFormRemainder>(a.remainder)) {
    auto y = std::dynamic_pointer_cast<const NormalFormRemainder>(b.remainder);
    return x->model() == y->model();
  }
  return false;
}

// ------------------------------------------------------------------ torus

json torus_to_json(const TorusGrid& tg) {
  json xi = json::array();
  for (const auto& x : tg.xi) xi.push_back(vec_to_json(x));
  return {{"schema", kTorusSchema},     {"n", tg.n},
          {"dim", tg.dim},              {"grid_res", tg.res},
          {"eps", tg.eps},              {"y_base", vec_to_json(tg.y_base)},
          {"y_ref", vec_to_json(tg.y_ref)}, {"xi", xi},
          {"L", tg.L},                  {"rho", tg.rho},
          {"residual", tg.residual},    {"iterations", tg.iterations},
          {"history", tg.history}};
}

TorusGrid torus_from_json(const json& j) {
  const std::string w = "torus";
  check_keys(j, {"schema", "n", "dim", "grid_res", "eps", "y_base", "y_ref", "xi", "L", "rho",
                 "residual", "iterations", "history"},
             w);
  check_schema(j, kTorusSchema);
  TorusGrid tg;
  tg.n = get<int>(j, "n", w);
  tg.dim = get<int>(j, "dim", w);
  tg.res = get<int>(j, "grid_res", w);
  tg.eps = get<double>(j, "eps", w);
  tg.y_base = vec_from_json(j, "y_base", w);
  tg.y_ref = vec_from_json(j, "y_ref", w);
  require(tg.n >= 1 && tg.n <= 4 && tg.dim > tg.n && tg.res >= 2 && tg.res <= 512, "schema",
          "torus: dimensions out of range");
  require(tg.y_base.size() == tg.dim && tg.y_ref.size() == tg.dim, "schema",
          "torus: base point dimension");
  for (const auto& x : get<std::vector<std::vector<double>>>(j, "xi", w)) {
    require(static_cast<int>(x.size()) == tg.dim, "schema", "torus: node value dimension");
    tg.xi.push_back(Eigen::Map<const Vec>(x.data(), tg.dim));
  }
  get_opt(j, "residual", tg.residual, w);
  get_opt(j, "iterations", tg.iterations, w);
  get_opt(j, "history", tg.history, w);
  tg.finalize();
  return tg;
}

// ------------------------------------------------------------------ files

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("parse", "'" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IOError("write failed for '" + path + "'");
}

// ------------------------------------------------------------------ scenario

void ScenarioConfig::validate(double eps0) const {
  require(N >= 3, "config", "N must be at least 3");
  require(k > 0 && k < N - 2, "k_range", "k must satisfy 0 < k < N - 2");
  require(s >= 1 && nu > 0, "config", "s >= 1 and nu > 0 required");
  require(!eps.empty(), "eps", "eps list must not be empty");
  for (double e : eps) require(e > 0 && e < eps0, "eps", "eps values must lie strictly inside (0, eps0)");
  require(eps_ref > 0 && eps_ref < eps0, "eps", "eps_ref must lie strictly inside (0, eps0)");
  for (double e : measure_eps) require(e > 0 && e < 1, "eps", "measure_eps values must lie in (0, 1)");
  require(grid_res >= 4 && grid_res % 2 == 0 && grid_res <= 256, "config",
          "grid_res must be even, in [4, 256]");
  require(sim_horizon > 0 && census_horizon > 0, "config", "horizons must be positive");
  require(rtol > 0 && atol > 0, "config", "tolerances must be positive");
  require(jobs >= 1, "config", "jobs must be at least 1");
  require(ensemble > 0 && probes > 0 && census_samples > 0 && measure_samples > 0 &&
              inclusion_samples > 0,
          "config", "sample counts must be positive");
  require(measure_rho > 0, "config", "measure_rho must be positive");
}

ScenarioConfig scenario_from_json(const json& j) {
  const std::string w = "scenario";
  check_keys(j, {"schema", "model", "eps", "eps_ref", "k", "N", "s", "nu", "grid_res", "sim_horizon",
                 "census_horizon", "rtol", "atol", "seed", "out", "jobs", "ensemble", "probes",
                 "census_samples", "measure_samples", "inclusion_samples", "measure_eps",
                 "measure_rho"},
             w);
  check_schema(j, kScenarioSchema);
  ScenarioConfig c;
  get_opt(j, "model", c.model, w);
  get_opt(j, "eps", c.eps, w);
  get_opt(j, "eps_ref", c.eps_ref, w);
  get_opt(j, "k", c.k, w);
  get_opt(j, "N", c.N, w);
  get_opt(j, "s", c.s, w);
  get_opt(j, "nu", c.nu, w);
  get_opt(j, "grid_res", c.grid_res, w);
  get_opt(j, "sim_horizon", c.sim_horizon, w);
  get_opt(j, "census_horizon", c.census_horizon, w);
  get_opt(j, "rtol", c.rtol, w);
  get_opt(j, "atol", c.atol, w);
  get_opt(j, "seed", c.seed, w);
  get_opt(j, "out", c.out, w);
  get_opt(j, "jobs", c.jobs, w);
  get_opt(j, "ensemble", c.ensemble, w);
  get_opt(j, "probes", c.probes, w);
  get_opt(j, "census_samples", c.census_samples, w);
  get_opt(j, "measure_samples", c.measure_samples, w);
  get_opt(j, "inclusion_samples", c.inclusion_samples, w);
  get_opt(j, "measure_eps", c.measure_eps, w);
  get_opt(j, "measure_rho", c.measure_rho, w);
  return c;
}

json scenario_to_json(const ScenarioConfig& c) {
  return {{"schema", kScenarioSchema},
          {"model", c.model},
          {"eps", c.eps},
          {"eps_ref", c.eps_ref},
          {"k", c.k},
          {"N", c.N},
          {"s", c.s},
          {"nu", c.nu},
          {"grid_res", c.grid_res},
          {"sim_horizon", c.sim_horizon},
          {"census_horizon", c.census_horizon},
          {"rtol", c.rtol},
          {"atol", c.atol},
          {"seed", c.seed},
          {"out", c.out},
          {"jobs", c.jobs},
          {"ensemble", c.ensemble},
          {"probes", c.probes},
          {"census_samples", c.census_samples},
          {"measure_samples", c.measure_samples},
          {"inclusion_samples", c.inclusion_samples},
          {"measure_eps", c.measure_eps},
          {"measure_rho", c.measure_rho}};
}

LoadedModel load_model(const std::string& source, double nu) {
  LoadedModel lm;
  if (source == "demo") {
    auto tm = std::make_shared<const TaylorModel>(demo_taylor_model());
    lm.taylor = tm;
    lm.nf = std::make_shared<const NormalFormResult>(
        solve_normal_form(*tm, ResonanceStructure(tm->n, tm->N, nu)));
    lm.polar = demo_polar_model();
    return lm;
  }
  const json j = read_json_file(source);
  const std::string schema = j.is_object() && j.contains("schema") && j.at("schema").is_string()
                                 ? j.at("schema").get<std::string>()
                                 : "";
  if (schema == kTaylorSchema) {
    auto tm = std::make_shared<const TaylorModel>(taylor_from_json(j));
    lm.taylor = tm;
    lm.nf = std::make_shared<const NormalFormResult>(
        solve_normal_form(*tm, ResonanceStructure(tm->n, tm->N, nu)));
    lm.polar = to_polar(lm.nf, tm);
  } else if (schema == kPolarSchema) {
    lm.polar = polar_from_json(j);
  } else {
    throw ValidationError("schema", "'" + source + "' is neither a Taylor nor a polar model file");
  }
  return lm;
}

}  // namespace dynbif
