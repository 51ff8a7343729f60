#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dynbif/demo.hpp"
#include "dynbif/suite.hpp"

using namespace dynbif;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const Check* find(const std::vector<Check>& cs, const std::string& name) {
  for (const auto& c : cs)
    if (c.name == name) return &c;
  return nullptr;
}

struct Reporter {
  int failed = 0;
  void line(const std::string& id, bool ok, const std::string& what, double secs, double budget) {
    const bool in_time = budget <= 0 || secs < budget;
    ok = ok && in_time;
    failed += !ok;
    char t[96];
    if (budget > 0)
      std::snprintf(t, sizeof t, "%.2f s %s %.0f s", secs, in_time ? "<" : ">=", budget);
    else
      std::snprintf(t, sizeof t, "%.2f s", secs);
    std::cout << id << ' ' << (ok ? "PASS" : "FAIL") << "  " << what << "  [" << t << "]\n";
  }
  void info(const std::string& what) { std::cout << "      " << what << '\n'; }
};

std::string brief(const Check* c) {
  if (!c) return "missing";
  std::ostringstream os;
  os << c->name << " = " << c->value;
  if (c->relation == "in")
    os << " in [" << c->lo << ", " << c->hi << "]";
  else
    os << ' ' << c->relation << ' ' << c->lo;
  if (!c->detail.empty()) os << " (" << c->detail << ")";
  return os.str();
}

bool all_pass(std::initializer_list<const Check*> cs) {
  for (auto* c : cs)
    if (!c || !c->passed) return false;
  return true;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--strict") == 0) strict = true;
  Reporter rep;
  const std::uint64_t seed = 0;
  const LoadedModel lm = load_model("demo");
  const PolarModel& pm = lm.polar;

  {
    auto t0 = Clock::now();
    auto lm1 = load_model("demo");
    auto cs = check_normal_form(lm1);
    const double s = seconds_since(t0);
    bool ok = !cs.empty();
    double worst = 0;
    for (const auto& c : cs) {
      ok &= c.passed;
      worst = std::max(worst, c.value);
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "normal-form residual: worst coefficient %.3g <= 1e-10", worst);
    rep.line("AC1 ", ok, buf, s, 10);
  }
  {
    auto t0 = Clock::now();
    auto cs = check_block_diagonalization(3, {1e-2, 1e-3, 1e-4});
    rep.line("AC2 ", all_pass({find(cs, "blockdiag_defect_slope"), find(cs, "blockdiag_commutator")}),
             "block-diagonalization defect: " + brief(find(cs, "blockdiag_defect_slope")),
             seconds_since(t0), 5);
  }
  {
    EnsembleSetup es;
    es.seed = seed;
    auto t0 = Clock::now();
    auto cs = check_ensemble(pm, es);
    const double s = seconds_since(t0);
    rep.line("AC3 ", all_pass({find(cs, "decay_violations")}),
             "decay phase: " + brief(find(cs, "decay_violations")), s, 30);
    rep.line("AC4 ",
             all_pass({find(cs, "capture_fraction"), find(cs, "capture_exits"),
                       find(cs, "invariance_warnings")}),
             "capture: " + brief(find(cs, "capture_fraction")) + ", " +
                 brief(find(cs, "capture_exits")),
             s, 60);
    rep.info(brief(find(cs, "lyapunov_violations")));
  }
  {
    auto t0 = Clock::now();
    auto cs = check_hessian(pm, 1000, seed);
    rep.line("AC5 ", all_pass({cs.data()}), "Hessian identity: " + brief(cs.data()),
             seconds_since(t0), 1);
  }
  TorusSweep sw;
  {
    auto t0 = Clock::now();
    sw = run_torus_sweep(pm, {0.02, 0.01, 0.005}, 32, 32, seed);
    auto cs = check_torus(sw);
    const double s = seconds_since(t0);
    double worst = 0;
    bool probes_ok = true;
    for (const auto& c : cs)
      if (c.name.rfind("torus_probe_residual", 0) == 0) {
        worst = std::max(worst, c.value);
        probes_ok &= c.passed;
      }
    const Check* lit = find(cs, "torus_sup_distance_slope_eps_root");
    char buf[160];
    std::snprintf(buf, sizeof buf, "torus: probe residual max %.3g <= 1e-6; ", worst);
    rep.line("AC6 ", probes_ok && all_pass({lit}), buf + brief(lit), s, 120);
    rep.info("measured from y* at eps = 0: " + brief(find(cs, "torus_sup_distance_slope")));
  }
  {
    auto t0 = Clock::now();
    auto cs = check_attraction(pm, sw.systems[1], sw.grids[1], sw.dis[1], 8, seed);
    rep.line("AC7 ",
             all_pass({find(cs, "attraction_probes_found"),
                       find(cs, "attraction_rate_over_eps_gamma"),
                       find(cs, "attraction_bound_ratio")}),
             "attraction: " + brief(find(cs, "attraction_rate_over_eps_gamma")) + ", " +
                 brief(find(cs, "attraction_bound_ratio")),
             seconds_since(t0), 120);
  }
  {
    SublevelSetup ss;
    ss.seed = seed;
    auto t0 = Clock::now();
    auto cs = check_sublevel(ss);
    rep.line("AC8 ",
             all_pass({find(cs, "first_inclusion_violations"),
                       find(cs, "q_set_inclusion_violations"),
                       find(cs, "complement_measure_slope")}),
             "sub-level geometry: " + brief(find(cs, "complement_measure_slope")),
             seconds_since(t0), 120);
    rep.info(brief(find(cs, "first_inclusion_violations")) + "; " +
             brief(find(cs, "q_set_inclusion_violations")));
  }
  {
    auto t0 = Clock::now();
    auto cs = check_census(pm, sw.systems[1], sw.grids[1], sw.probe_residual[1], 1.0, 1000, 40,
                           1e-9, 1e-11, seed, 1);
    rep.line("AC9 ", all_pass({cs.data()}), "basin census: " + brief(cs.data()),
             seconds_since(t0), 300);
  }
  {
    const fs::path base = fs::temp_directory_path() / "dynbif_acceptance";
    fs::remove_all(base);
    ScenarioConfig cfg;
    cfg.seed = seed;
    std::ostringstream sink;
    auto t0 = Clock::now();
    cfg.out = (base / "a").string();
    run_verify(cfg, lm, sink);
    cfg.out = (base / "b").string();
    run_verify(cfg, lm, sink);
    const double s = seconds_since(t0);
    int files = 0, differ = 0;
    for (const auto& e : fs::directory_iterator(base / "a")) {
      ++files;
      const fs::path other = base / "b" / e.path().filename();
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differ;
    }
    for (const auto& e : fs::directory_iterator(base / "b"))
      if (!fs::exists(base / "a" / e.path().filename())) ++differ;
    rep.line("AC10", files > 0 && differ == 0,
             "determinism: " + std::to_string(files) + " artifacts, " + std::to_string(differ) +
                 " differ",
             s, 0);
  }
  std::cout << (10 - rep.failed) << "/10 criteria passed\n";
  return strict && rep.failed ? 1 : 0;
}
