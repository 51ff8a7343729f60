#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "dynbif/demo.hpp"
#include "dynbif/suite.hpp"

using namespace dynbif;
namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::vector<double> eps;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> jobs;
  std::string model;
  bool strict = false;
  int starts = 1;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "scenario JSON file");
  sub->add_option("--eps", f.eps, "eps list (comma separated)")->delimiter(',');
  sub->add_option("--seed", f.seed, "RNG seed");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--jobs", f.jobs, "worker threads");
  sub->add_option("--model", f.model, "\"demo\" or a Taylor / polar model file");
}

ScenarioConfig make_config(const Flags& f) {
  ScenarioConfig c;
  if (!f.config.empty()) c = scenario_from_json(read_json_file(f.config));
  if (!f.eps.empty()) c.eps = f.eps;
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.out = f.out;
  if (f.jobs) c.jobs = *f.jobs;
  if (!f.model.empty()) c.model = f.model;
  return c;
}

LoadedModel load_checked(const ScenarioConfig& c) {
  auto lm = load_model(c.model, c.nu);
  require(lm.polar.N == c.N && lm.polar.s == c.s, "config_model",
          "config N, s (" + std::to_string(c.N) + ", " + std::to_string(c.s) +
              ") differ from the model (" + std::to_string(lm.polar.N) + ", " +
              std::to_string(lm.polar.s) + ")");
  c.validate(lm.polar.eps0);
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw IOError("cannot create output directory '" + c.out + "'");
  return lm;
}

std::string out_path(const ScenarioConfig& c, const std::string& name) {
  return (fs::path(c.out) / name).string();
}

void write_poly_rows(std::ostream& os, const std::string& family, int comp, const ScalarPoly& p) {
  for (const auto& t : p.terms()) {
    os << family << ',' << comp << ",\"";
    for (int i = 0; i < t.y.size(); ++i) os << (i ? " " : "") << t.y[i];
    os << "\"," << t.eps << ",\"";
    for (int i = 0; i < t.v.size(); ++i) os << (i ? " " : "") << t.v[i];
    os << "\"," << g17(t.c.real()) << ',' << g17(t.c.imag()) << '\n';
  }
}

int run_normalform(const ScenarioConfig& c, const LoadedModel& lm, std::ostream& log) {
  write_text_file(out_path(c, "polar_model.json"), polar_to_json(lm.polar, c.nu).dump(1) + "\n");
  if (!lm.nf) {
    log << "polar model file: no normal form to tabulate\n";
    return 0;
  }
  std::ostringstream os;
  os << "family,component,y,eps,v,re,im\n";
  const auto& nf = *lm.nf;
  for (std::size_t i = 0; i < nf.J.size(); ++i) write_poly_rows(os, "J", static_cast<int>(i), nf.J[i]);
  for (std::size_t i = 0; i < nf.H.size(); ++i) write_poly_rows(os, "H", static_cast<int>(i), nf.H[i]);
  for (std::size_t i = 0; i < nf.X.size(); ++i) write_poly_rows(os, "X", static_cast<int>(i), nf.X[i]);
  for (std::size_t i = 0; i < nf.C.size(); ++i) write_poly_rows(os, "C", static_cast<int>(i), nf.C[i]);
  for (std::size_t i = 0; i < nf.U.size(); ++i) write_poly_rows(os, "U", static_cast<int>(i), nf.U[i]);
  write_text_file(out_path(c, "normal_form_coefficients.csv"), os.str());
  for (const auto& ch : check_normal_form(lm)) print_check(log, ch);
  log << "resonance margin " << nf.resonance_margin << '\n';
  return 0;
}

int run_simulate(const ScenarioConfig& c, const LoadedModel& lm, int starts, std::ostream& log) {
  const ZoneConstants zc = verify_conditions(lm.polar);
  SimOptions so;
  so.rtol = c.rtol;
  so.atol = c.atol;
  for (double e : c.eps)
    for (int i = 0; i < starts; ++i) {
      const auto s = random_start_Ds(lm.polar, c.seed, i);
      const auto tr = simulate(lm.polar, e, s.r, s.v, s.phi, c.sim_horizon / e, so, &zc);
      const std::string tag = "eps" + eps_tag(e) + "_" + std::to_string(i);
      std::ostringstream a, b;
      write_trajectory_csv(a, tr);
      write_event_log(b, tr);
      write_text_file(out_path(c, "trajectory_" + tag + ".csv"), a.str());
      write_text_file(out_path(c, "events_" + tag + ".log"), b.str());
      const auto cr = capture_detector(tr, zc, lm.polar.radii, 10 * c.atol);
      log << "eps=" << eps_tag(e) << " start " << i << ": " << tr.size() << " samples, "
          << (cr.captured ? "captured at t*eps=" + eps_tag(cr.t_K * e) : std::string("not captured"))
          << ", " << tr.invariance_warnings << " invariance warnings\n";
    }
  return 0;
}

bool report(const std::vector<Check>& checks, std::ostream& log) {
  int failed = 0;
  for (const auto& ch : checks) failed += !ch.passed;
  log << checks.size() - failed << "/" << checks.size() << " checks passed\n";
  return failed == 0;
}

int run_torus(const ScenarioConfig& c, const LoadedModel& lm, std::ostream& log) {
  const auto sw = run_torus_sweep(lm.polar, c.eps, c.grid_res, c.probes, c.seed, c.jobs);
  for (std::size_t i = 0; i < c.eps.size(); ++i)
    write_text_file(out_path(c, "torus_eps" + eps_tag(c.eps[i]) + ".json"),
                    torus_to_json(sw.grids[i]).dump(1) + "\n");
  std::ostringstream os;
  write_torus_scaling_csv(os, sw);
  write_text_file(out_path(c, "torus_scaling.csv"), os.str());
  const auto checks = check_torus(sw);
  for (const auto& ch : checks) print_check(log, ch);
  return report(checks, log) ? 0 : 1;
}

int run_basin(const ScenarioConfig& c, const LoadedModel& lm, std::ostream& log) {
  SublevelSetup ss;
  ss.eps = c.measure_eps;
  ss.k = c.k;
  ss.rho = c.measure_rho;
  ss.n = lm.polar.n;
  ss.measure_samples = c.measure_samples;
  ss.inclusion_samples = c.inclusion_samples;
  ss.seed = c.seed;
  ss.jobs = c.jobs;
  std::vector<BasinRow> rows;
  auto checks = check_sublevel(ss, &rows);
  const std::string tp = out_path(c, "torus_eps" + eps_tag(c.eps_ref) + ".json");
  TorusSweep sw;
  if (fs::exists(tp)) {
    // reuse a torus written by a previous `torus` run
    sw.eps = {c.eps_ref};
    sw.grids = {torus_from_json(read_json_file(tp))};
    sw.systems = {combined_system(lm.polar, c.eps_ref)};
    sw.dis = {dissipativity_constants(sw.systems[0], 512, 0.5, c.seed)};
    sw.probe_residual = {invariance_residual(sw.grids[0], sw.systems[0], c.probes, c.seed)};
    log << "torus loaded from " << tp << '\n';
  } else {
    sw = run_torus_sweep(lm.polar, {c.eps_ref}, c.grid_res, c.probes, c.seed, 1);
  }
  BasinRow row;
  row.complement_fraction = sublevel_complement_measure(c.eps_ref, c.k, c.measure_rho, lm.polar.n,
                                                        c.measure_samples, c.seed, c.jobs)
                                .fraction;
  row.slope = row.stderr_ = std::nan("");
  for (auto& ch : check_census(lm.polar, sw.systems[0], sw.grids[0], sw.probe_residual[0], c.k,
                               c.census_samples, c.census_horizon, c.rtol, c.atol, c.seed, c.jobs,
                               &row))
    checks.push_back(std::move(ch));
  rows.insert(rows.begin(), row);
  std::ostringstream os;
  write_basin_csv(os, rows);
  write_text_file(out_path(c, "basin_report.csv"), os.str());
  for (const auto& ch : checks) print_check(log, ch);
  return report(checks, log) ? 0 : 1;
}

int run_verify_cmd(const ScenarioConfig& c, const LoadedModel& lm, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto checks = run_verify(c, lm, log);
  const bool ok = report(checks, log);
  log << "verify took "
      << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
  return ok ? 0 : 1;
}

void error_record(const std::string& kind, const std::string& code, const std::string& msg) {
  json j;
  j["error"] = {{"kind", kind}, {"code", code}, {"message", msg}};
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynbif: normal forms, invariant tori and basins near a dynamic bifurcation"};
  app.require_subcommand(1);
  Flags f;
  const char* names[] = {"normalform", "simulate", "torus", "basin", "verify", "demo"};
  const char* help[] = {"normal-form pipeline: coefficient tables and the polar model file",
                        "simulate trajectories from random starts; CSV and event logs",
                        "solve the invariant torus for each eps; torus files and scaling fit",
                        "sub-level geometry and attraction census; basin report",
                        "full property suite with one pass/fail line per property",
                        "bundled demo end-to-end"};
  std::vector<CLI::App*> subs;
  for (int i = 0; i < 6; ++i) {
    auto* s = app.add_subcommand(names[i], help[i]);
    add_common(s, f);
    s->add_flag("--strict", f.strict, "nonzero exit when a property fails");
    subs.push_back(s);
  }
  subs[1]->add_option("--starts", f.starts, "trajectories per eps")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_record("validation", "usage", e.what());
    return 2;
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    ScenarioConfig c = make_config(f);
    if (cmd == "demo" && f.model.empty() && f.config.empty()) c.model = "demo";
    const LoadedModel lm = load_checked(c);
    std::ostream& log = std::cout;
    int rc = 0;
    if (cmd == "normalform") {
      rc = run_normalform(c, lm, log);
    } else if (cmd == "simulate") {
      rc = run_simulate(c, lm, f.starts, log);
    } else if (cmd == "torus") {
      rc = run_torus(c, lm, log);
    } else if (cmd == "basin") {
      rc = run_basin(c, lm, log);
    } else if (cmd == "verify") {
      rc = run_verify_cmd(c, lm, log);
    } else {
      write_text_file(out_path(c, "scenario.json"), scenario_to_json(c).dump(1) + "\n");
      run_normalform(c, lm, log);
      run_simulate(c, lm, 1, log);
      rc = run_verify_cmd(c, lm, log);
    }
    return f.strict && rc ? 3 : 0;
  } catch (const ValidationError& e) {
    error_record("validation", e.code(), e.what());
    return 2;
  } catch (const NumericError& e) {
    error_record("numeric", e.code(), e.what());
    return 3;
  } catch (const IOError& e) {
    error_record("io", e.code(), e.what());
    return 4;
  } catch (const json::exception& e) {
    error_record("validation", "json", e.what());
    return 2;
  } catch (const std::exception& e) {
    error_record("numeric", "internal", e.what());
    return 3;
  }
}
