#include "dynbif/suite.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dynbif/demo.hpp"
#include "dynbif/sampling.hpp"

namespace dynbif {

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string eps_tag(double eps) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", eps);
  return buf;
}

Check make_check(std::string name, double value, const std::string& relation, double lo,
                 double hi, std::string detail) {
  Check c{std::move(name), value, relation, lo, hi, false, std::move(detail)};
  if (relation == "<=")
    c.passed = value <= lo;
  else if (relation == ">=")
    c.passed = value >= lo;
  else if (relation == "==")
    c.passed = value == lo;
  else if (relation == "in")
    c.passed = value >= lo && value <= hi;
  else
    throw ValidationError("check", "unknown relation " + relation);
  return c;
}

void print_check(std::ostream& os, const Check& c) {
  char buf[256];
  if (c.relation == "in")
    std::snprintf(buf, sizeof buf, "%s  %-34s %.6g in [%.6g, %.6g]", c.passed ? "PASS" : "FAIL",
                  c.name.c_str(), c.value, c.lo, c.hi);
  else
    std::snprintf(buf, sizeof buf, "%s  %-34s %.6g %s %.6g", c.passed ? "PASS" : "FAIL",
                  c.name.c_str(), c.value, c.relation.c_str(), c.lo);
  os << buf;
  if (!c.detail.empty()) os << "  (" << c.detail << ")";
  os << '\n';
}

void write_checks_csv(std::ostream& os, const std::vector<Check>& checks) {
  os << "property,value,relation,lo,hi,pass,detail\n";
  for (const auto& c : checks)
    os << c.name << ',' << g17(c.value) << ',' << c.relation << ',' << g17(c.lo) << ','
       << g17(c.hi) << ',' << (c.passed ? 1 : 0) << ",\"" << c.detail << "\"\n";
}

// ------------------------------------------------------------------ normal form

std::vector<Check> check_normal_form(const LoadedModel& lm) {
  if (!lm.taylor || !lm.nf) return {};
  const auto ts = transform_system(*lm.nf);
  const auto nc = check_normal_form(*lm.nf, ts);
  return {make_check("nf_fast_nonresonant", nc.fast_nonresonant, "<=", 1e-10),
          make_check("nf_fast_resonant", nc.fast_resonant, "<=", 1e-10),
          make_check("nf_slow_nonresonant", nc.slow_nonresonant, "<=", 1e-10),
          make_check("nf_slow_resonant", nc.slow_resonant, "<=", 1e-10, 0,
                     std::to_string(nc.checked) + " coefficients")};
}

std::vector<Check> check_block_diagonalization(int s, const std::vector<double>& eps) {
  const auto sys = demo_blockdiag_system(s);
  const auto r = eps_block_diagonalize<long double>(sys.A, sys.d, sys.G, s, sys.v0);
  std::vector<double> x, y;
  for (double e : eps) {
    x.push_back(std::log(e));
    y.push_back(std::log(static_cast<double>(r.defect(static_cast<long double>(e)))));
  }
  const auto f = linear_fit(x, y);
  return {make_check("blockdiag_defect_slope", f.slope, "in", s + 1 - 0.3, s + 1 + 0.3),
          make_check("blockdiag_commutator", r.commutator, "<=", 1e-10)};
}

// ------------------------------------------------------------------ ensemble

EnsembleStart random_start_Ds(const PolarModel& pm, std::uint64_t seed, int i) {
  CounterRng rng(seed, static_cast<std::uint64_t>(i), 41);
  EnsembleStart s;
  do {
    s.r = sample_simplex(rng, pm.n, pm.rho);
  } while (!(s.r.minCoeff() > 0));
  Vec dir(pm.m);
  do {
    for (int l = 0; l < pm.m; ++l) dir(l) = rng.normal();
  } while (dir.norm() == 0);
  const double a = std::pow(pm.radii.Rstar, pm.m), b = std::pow(pm.radii.Rstar_up, pm.m);
  const double rad = std::pow(a + (b - a) * (1.0 - rng.uniform()), 1.0 / pm.m);
  s.v = std::min(rad, pm.radii.Rstar_up) * dir / dir.norm();
  s.phi.resize(pm.n);
  for (int j = 0; j < pm.n; ++j) s.phi(j) = 2 * std::numbers::pi * rng.uniform();
  return s;
}

namespace {

Trajectory tail_from(const Trajectory& tr, double t0) {
  Trajectory out;
  out.n = tr.n;
  out.m = tr.m;
  out.eps = tr.eps;
  for (std::size_t i = 0; i < tr.size(); ++i)
    if (tr.t[i] >= t0) {
      out.t.push_back(tr.t[i]);
      out.r.push_back(tr.r[i]);
      out.v.push_back(tr.v[i]);
      out.phi.push_back(tr.phi[i]);
      out.zone.push_back(tr.zone[i]);
    }
  return out;
}

}  // namespace

std::vector<Check> check_ensemble(const PolarModel& pm, const EnsembleSetup& es) {
  const ZoneConstants zc = verify_conditions(pm);
  const PolarBounds pb = polar_bounds(pm);
  struct Out {
    int decay_viol = 0, decay_checked = 0;
    bool captured = false;
    double t_K = 0;
    int exits = 0, warnings = 0;
    int lyap_checked = 0, lyap_viol = 0;
  };
  std::vector<Out> out(es.count);
  SimOptions so;
  so.rtol = es.rtol;
  so.atol = es.atol;
  parallel_for(es.count, es.jobs, [&](int i) {
    const EnsembleStart s = random_start_Ds(pm, es.seed, i);
    const auto tr = simulate(pm, es.eps, s.r, s.v, s.phi, es.horizon / es.eps, so, &zc);
    auto& o = out[i];
    const auto dr = decay_certificate(tr, zc, pm.radii, false);
    o.decay_viol = dr.violations;
    o.decay_checked = dr.checked;
    const auto cr = capture_detector(tr, zc, pm.radii, 10 * es.atol);
    o.captured = cr.captured;
    o.t_K = cr.t_K;
    o.exits = cr.exits;
    o.warnings = tr.invariance_warnings;
    if (cr.captured) {
      const auto lr = lyapunov_monitor(tail_from(tr, cr.t_K), pm, zc, es.eps, 1.0, pb.C0, 1e-9,
                                       std::sqrt(es.eps));
      o.lyap_checked = lr.checked;
      o.lyap_viol = lr.violations;
    }
  });
  int dv = 0, dc = 0, cap = 0, ex = 0, w = 0, lc = 0, lv = 0;
  double tK = 0;
  for (const auto& o : out) {
    dv += o.decay_viol;
    dc += o.decay_checked;
    cap += o.captured;
    ex += o.exits;
    w += o.warnings;
    lc += o.lyap_checked;
    lv += o.lyap_viol;
    if (o.captured) tK = std::max(tK, o.t_K);
  }
  const std::string tag = "eps=" + eps_tag(es.eps) + ", " + std::to_string(es.count) + " starts";
  return {
      make_check("decay_violations", dv, "==", 0, 0, tag + ", " + std::to_string(dc) + " samples"),
      make_check("capture_fraction", static_cast<double>(cap) / es.count, "==", 1, 0,
                 "latest t_K*eps = " + eps_tag(tK * es.eps)),
      make_check("capture_exits", ex, "==", 0),
      make_check("invariance_warnings", w, "==", 0),
      make_check("lyapunov_violations", lv, "==", 0, 0,
                 std::to_string(lc) + " pairs outside the sqrt(eps) ball")};
}

std::vector<Check> check_hessian(const PolarModel& pm, int trials, std::uint64_t seed) {
  const auto hr = hessian_identity_check(pm, trials, seed);
  return {make_check("hessian_identity_scaled", hr.max_scaled, "<=", 1e-12, 0,
                     std::to_string(hr.trials) + " trials")};
}

// ------------------------------------------------------------------ torus

TorusSweep run_torus_sweep(const PolarModel& pm, const std::vector<double>& eps, int grid_res,
                           int probes, std::uint64_t seed, int jobs) {
  TorusSweep sw;
  const int K = static_cast<int>(eps.size());
  sw.eps = eps;
  sw.grids.resize(K);
  sw.systems.resize(K);
  sw.dis.resize(K);
  sw.probe_residual.resize(K);
  TorusOptions to;
  to.grid_res = grid_res;
  parallel_for(K, jobs, [&](int i) {
    sw.systems[i] = combined_system(pm, eps[i]);
    sw.dis[i] = dissipativity_constants(sw.systems[i], 512, 0.5, seed);
    sw.grids[i] = solve_invariant_torus(sw.systems[i], to);
    sw.probe_residual[i] = invariance_residual(sw.grids[i], sw.systems[i], probes, seed);
  });
  return sw;
}

std::vector<Check> check_torus(const TorusSweep& sw) {
  std::vector<Check> out;
  std::vector<double> sup, sup_eps;
  std::vector<double> fsup;
  for (std::size_t i = 0; i < sw.eps.size(); ++i) {
    const auto& tg = sw.grids[i];
    const auto& cs = sw.systems[i];
    const std::string t = "eps=" + eps_tag(sw.eps[i]);
    out.push_back(make_check("torus_probe_residual[" + t + "]", sw.probe_residual[i], "<=", 1e-6));
    out.push_back(make_check("torus_internal_residual[" + t + "]", tg.residual, "<=", 1e-8, 0,
                             std::to_string(tg.iterations) + " iterations"));
    out.push_back(make_check("torus_gamma[" + t + "]", sw.dis[i].gamma, ">=", 1e-12, 0,
                             "sigma = " + eps_tag(sw.dis[i].sigma)));
    // internal residual is a rate; over the probe window it predicts a drift of residual * dt
    const double dt = 0.1 / cs.omega0.cwiseAbs().maxCoeff();
    const double floor = 1e-12;
    const double gap = std::abs(std::log10(std::max(sw.probe_residual[i], floor)) -
                                std::log10(std::max(tg.residual * dt, floor)));
    out.push_back(make_check("torus_residual_agreement[" + t + "]", gap, "<=", 1.0, 0,
                             "decades, floor 1e-12"));
    sup.push_back(tg.sup_distance(tg.y_ref));
    sup_eps.push_back(tg.sup_distance(tg.y_base));
    fsup.push_back(reduced_field_extract(tg, cs).sup);
  }
  if (sw.eps.size() >= 2) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < sup.size(); ++i) {
      x.push_back(std::log(sw.eps[i]));
      y.push_back(std::log(sup[i]));
    }
    const auto f = linear_fit(x, y);
    out.push_back(make_check("torus_sup_distance_slope", f.slope, "in", 0.5, 1.5, "vs y* at eps=0"));
    for (std::size_t i = 0; i < sup_eps.size(); ++i) y[i] = std::log(sup_eps[i]);
    const auto g = linear_fit(x, y);
    out.push_back(make_check("torus_sup_distance_slope_eps_root", g.slope, "in", 0.5, 1.5,
                             "vs the equilibrium y*(eps) of the averaged field"));
    double lo = fsup[0], hi = fsup[0];
    for (double v : fsup) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out.push_back(make_check("reduced_field_sup_ratio", hi / lo, "<=", 2.0, 0,
                             "max/min sup|f| over the sweep"));
  }
  return out;
}

void write_torus_scaling_csv(std::ostream& os, const TorusSweep& sw) {
  os << "eps,sup_distance_ref,sup_distance_base,rho,L,residual,probe_residual,gamma,sigma,"
        "reduced_sup,reduced_L\n";
  for (std::size_t i = 0; i < sw.eps.size(); ++i) {
    const auto& tg = sw.grids[i];
    const auto rf = reduced_field_extract(tg, sw.systems[i]);
    os << g17(sw.eps[i]) << ',' << g17(tg.sup_distance(tg.y_ref)) << ','
       << g17(tg.sup_distance(tg.y_base)) << ',' << g17(tg.rho) << ',' << g17(tg.L) << ','
       << g17(tg.residual) << ',' << g17(sw.probe_residual[i]) << ',' << g17(sw.dis[i].gamma)
       << ',' << g17(sw.dis[i].sigma) << ',' << g17(rf.sup) << ',' << g17(rf.L) << '\n';
  }
}

// ------------------------------------------------------------------ attraction

std::vector<Check> check_attraction(const PolarModel& pm, const CombinedSystem& cs,
                                    const TorusGrid& tg, const Dissipativity& dis, int probes,
                                    std::uint64_t seed) {
  const ZoneConstants zc = verify_conditions(pm);
  const double eps = cs.eps;
  const int n = pm.n, d = cs.dim();
  double min_rate = std::numeric_limits<double>::infinity(), max_ratio = 0;
  int found = 0;
  std::vector<std::pair<Vec, Vec>> states;
  for (int i = 0; i < probes; ++i) {
    const EnsembleStart s = random_start_Ds(pm, seed, 1000 + i);
    const auto tr = simulate(pm, eps, s.r, s.v, s.phi, 30 / eps, {}, &zc);
    const auto cr = capture_detector(tr, zc, pm.radii);
    if (!cr.captured) continue;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      if (tr.t[k] < cr.t_K) continue;
      Vec y(d);
      y << tr.r[k], tr.v[k];
      if ((y - cs.y_star).norm() <= dis.sigma) {
        states.emplace_back(y, tr.phi[k]);
        break;
      }
    }
  }
  for (const auto& [y, phi] : states) {
    const auto pr = asymptotic_phase(cs, tg, dis, y, phi);
    min_rate = std::min(min_rate, pr.rate);
    max_ratio = std::max(max_ratio, pr.max_bound_ratio);
    ++found;
  }
  std::vector<Check> out;
  const std::string tag = std::to_string(found) + "/" + std::to_string(probes) + " probes";
  out.push_back(make_check("attraction_probes_found", found, "==", probes));
  out.push_back(make_check("attraction_rate_over_eps_gamma", found ? min_rate / (eps * dis.gamma) : 0,
                           ">=", 0.8, 0, tag));
  out.push_back(make_check("attraction_bound_ratio", max_ratio, "<=", 2.5, 0,
                           "max d(t) / (e^{-eps gamma t} d0)"));

  Vec ph(n);
  for (int j = 0; j < n; ++j) ph(j) = 1.0 + j;
  const auto self = asymptotic_phase(cs, tg, dis, tg.point(ph), ph);
  Vec dph = self.phi_star - ph;
  for (int j = 0; j < n; ++j) dph(j) = wrap_pi(dph(j));
  out.push_back(make_check("phase_fixed_point", dph.lpNorm<Eigen::Infinity>(), "<=", 1e-6));

  if (!states.empty()) {
    const auto le = lipschitz_estimate(cs, dis);
    const Vec& y0 = states.front().first;
    const Vec& p0 = states.front().second;
    Vec y1 = y0;
    y1(0) += 1e-4;
    const auto a = asymptotic_phase(cs, tg, dis, y0, p0);
    const auto b = asymptotic_phase(cs, tg, dis, y1, p0);
    Vec dd = a.phi_star - b.phi_star;
    for (int j = 0; j < n; ++j) dd(j) = wrap_pi(dd(j));
    const double L = dd.norm() * eps / (y1 - y0).norm();
    out.push_back(make_check("phase_lipschitz_over_M", L / le.M, "<=", 1.0, 0,
                             "M = 4K/gamma = " + eps_tag(le.M)));
  }
  return out;
}

// ------------------------------------------------------------------ sub-level geometry

std::vector<Check> check_sublevel(const SublevelSetup& ss, std::vector<BasinRow>* rows) {
  std::vector<Check> out;
  std::vector<double> frac;
  long first_viol = 0, first_checked = 0, q_viol = 0, q_checked = 0;
  for (double e : ss.eps) {
    const auto m = sublevel_complement_measure(e, ss.k, ss.rho, ss.n, ss.measure_samples, ss.seed,
                                               ss.jobs);
    frac.push_back(m.fraction);
    const auto f1 = first_inclusion_check(e, ss.k, ss.c, ss.rho, ss.n, ss.inclusion_samples,
                                          ss.seed, ss.jobs);
    first_viol += f1.violations;
    first_checked += f1.checked;
    const auto q = q_set_inclusion(e, ss.k, 0.0, ss.rho, ss.n, ss.inclusion_samples, ss.seed, ss.jobs);
    q_viol += q.violations;
    q_checked += q.checked;
  }
  const auto sl = log_log_slope(ss.eps, frac);
  if (rows)
    for (std::size_t i = 0; i < ss.eps.size(); ++i)
      rows->push_back({ss.eps[i], ss.k, frac[i], std::nan(""), ss.measure_samples, sl.slope, sl.stderr_});
  out.push_back(make_check("first_inclusion_violations", first_viol, "==", 0, 0,
                           std::to_string(first_checked) + " checked"));
  out.push_back(make_check("q_set_inclusion_violations", q_viol, "==", 0, 0,
                           std::to_string(q_checked) + " checked"));
  const double target = ss.k / ss.n;
  out.push_back(make_check("complement_measure_slope", sl.slope, "in", target - 0.1, target + 0.1,
                           "stderr " + eps_tag(sl.stderr_)));
  bool mono = true;
  for (std::size_t i = 1; i < frac.size(); ++i)
    if (ss.eps[i] < ss.eps[i - 1] && frac[i] > frac[i - 1]) mono = false;
  out.push_back(make_check("complement_measure_monotone", mono ? 1 : 0, "==", 1));
  if (!ss.eps.empty()) {
    const auto a = sublevel_complement_measure(ss.eps[0], ss.k, ss.rho, ss.n, ss.measure_samples,
                                               ss.seed, ss.jobs);
    const auto b = sublevel_complement_measure(ss.eps[0], ss.k, ss.rho, ss.n,
                                               2 * ss.measure_samples, ss.seed, ss.jobs);
    const double sd = std::sqrt(std::max(a.fraction * (1 - a.fraction), 1e-300) / a.samples);
    out.push_back(make_check("estimator_consistency_sd", std::abs(a.fraction - b.fraction) / sd,
                             "<=", 3.0, 0, "doubling samples"));
  }
  return out;
}

std::vector<Check> check_census(const PolarModel& pm, const CombinedSystem& cs,
                                const TorusGrid& tg, double probe_residual, double k,
                                long samples, double horizon, double rtol, double atol,
                                std::uint64_t seed, int jobs, BasinRow* row) {
  CensusOptions co;
  co.horizon_factor = horizon;
  co.rtol = rtol;
  co.atol = atol;
  co.seed = seed;
  co.jobs = jobs;
  const auto c = attraction_census(pm, cs, tg, probe_residual, k, samples, co);
  if (row) {
    row->eps = cs.eps;
    row->k = k;
    row->attracted_fraction = c.fraction;
    row->samples = samples;
  }
  return {make_check("census_attracted_fraction", c.fraction, "==", 1.0, 0,
                     std::to_string(c.attracted) + "/" + std::to_string(c.samples) +
                         ", threshold " + eps_tag(c.threshold) + ", worst " +
                         eps_tag(c.max_distance))};
}

// ------------------------------------------------------------------ verify

std::vector<Check> run_verify(const ScenarioConfig& cfg, const LoadedModel& lm, std::ostream& log) {
  namespace fs = std::filesystem;
  const PolarModel& pm = lm.polar;
  cfg.validate(pm.eps0);
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw IOError("cannot create output directory '" + cfg.out + "'");
  std::vector<Check> all;
  auto add = [&](std::vector<Check> cs) {
    for (auto& c : cs) {
      print_check(log, c);
      all.push_back(std::move(c));
    }
  };
  add(check_normal_form(lm));
  add(check_block_diagonalization(cfg.s, {1e-2, 1e-3, 1e-4}));
  EnsembleSetup es;
  es.eps = cfg.eps_ref;
  es.count = cfg.ensemble;
  es.horizon = cfg.sim_horizon;
  es.rtol = cfg.rtol;
  es.atol = cfg.atol;
  es.seed = cfg.seed;
  es.jobs = cfg.jobs;
  add(check_ensemble(pm, es));
  add(check_hessian(pm, 1000, cfg.seed));

  std::vector<double> eps = cfg.eps;
  std::size_t iref = eps.size();
  for (std::size_t i = 0; i < eps.size(); ++i)
    if (eps[i] == cfg.eps_ref) iref = i;
  auto sw = run_torus_sweep(pm, eps, cfg.grid_res, cfg.probes, cfg.seed, cfg.jobs);
  add(check_torus(sw));
  {
    std::ostringstream os;
    write_torus_scaling_csv(os, sw);
    write_text_file((fs::path(cfg.out) / "torus_scaling.csv").string(), os.str());
  }
  for (std::size_t i = 0; i < eps.size(); ++i)
    write_text_file((fs::path(cfg.out) / ("torus_eps" + eps_tag(eps[i]) + ".json")).string(),
                    torus_to_json(sw.grids[i]).dump(1) + "\n");
  if (iref == eps.size()) {
    auto extra = run_torus_sweep(pm, {cfg.eps_ref}, cfg.grid_res, cfg.probes, cfg.seed, 1);
    sw.eps.push_back(cfg.eps_ref);
    sw.grids.push_back(extra.grids[0]);
    sw.systems.push_back(extra.systems[0]);
    sw.dis.push_back(extra.dis[0]);
    sw.probe_residual.push_back(extra.probe_residual[0]);
  }
  const auto& cs = sw.systems[iref];
  const auto& tg = sw.grids[iref];
  add(check_attraction(pm, cs, tg, sw.dis[iref], 4, cfg.seed));

  SublevelSetup ss;
  ss.eps = cfg.measure_eps;
  ss.k = cfg.k;
  ss.rho = cfg.measure_rho;
  ss.n = pm.n;
  ss.measure_samples = cfg.measure_samples;
  ss.inclusion_samples = cfg.inclusion_samples;
  ss.seed = cfg.seed;
  ss.jobs = cfg.jobs;
  std::vector<BasinRow> rows;
  add(check_sublevel(ss, &rows));
  BasinRow crow;
  crow.complement_fraction =
      sublevel_complement_measure(cfg.eps_ref, cfg.k, cfg.measure_rho, pm.n, cfg.measure_samples,
                                  cfg.seed, cfg.jobs)
          .fraction;
  add(check_census(pm, cs, tg, sw.probe_residual[iref], cfg.k, cfg.census_samples,
                   cfg.census_horizon, cfg.rtol, cfg.atol, cfg.seed, cfg.jobs, &crow));
  crow.slope = std::nan("");
  crow.stderr_ = std::nan("");
  rows.insert(rows.begin(), crow);
  {
    std::ostringstream os;
    write_basin_csv(os, rows);
    write_text_file((fs::path(cfg.out) / "basin_report.csv").string(), os.str());
  }
  write_text_file((fs::path(cfg.out) / "polar_model.json").string(),
                  polar_to_json(pm, cfg.nu).dump(1) + "\n");
  {
    std::ostringstream os;
    write_checks_csv(os, all);
    write_text_file((fs::path(cfg.out) / "verify.csv").string(), os.str());
  }
  return all;
}

}  // namespace dynbif
