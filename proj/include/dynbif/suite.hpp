#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "dynbif/basin.hpp"
#include "dynbif/model_io.hpp"

namespace dynbif {

struct Check {
  std::string name;
  double value = 0;
  std::string relation;  // "<=", ">=", "==", "in"
  double lo = 0, hi = 0; // threshold, or interval for "in"
  bool passed = false;
  std::string detail;
};

Check make_check(std::string name, double value, const std::string& relation, double lo,
                 double hi = 0, std::string detail = {});
void print_check(std::ostream& os, const Check& c);
void write_checks_csv(std::ostream& os, const std::vector<Check>& checks);

std::vector<Check> check_normal_form(const LoadedModel& lm);
std::vector<Check> check_block_diagonalization(int s, const std::vector<double>& eps);

struct EnsembleStart {
  Vec r, v, phi;
};
// r uniform on the simplex, v uniform in the annulus D_s, phi uniform; stream fixed by (seed, i)
EnsembleStart random_start_Ds(const PolarModel& pm, std::uint64_t seed, int i);

struct EnsembleSetup {
  double eps = 0.01;
  int count = 50;
  double horizon = 20;  // in units of 1/eps
  double rtol = 1e-9, atol = 1e-11;
  std::uint64_t seed = 0;
  int jobs = 1;
};
// decay certificate, capture into K x D_u, forward invariance and the V monitor
std::vector<Check> check_ensemble(const PolarModel& pm, const EnsembleSetup& es);
std::vector<Check> check_hessian(const PolarModel& pm, int trials, std::uint64_t seed);

struct TorusSweep {
  std::vector<double> eps;
  std::vector<TorusGrid> grids;
  std::vector<CombinedSystem> systems;
  std::vector<Dissipativity> dis;
  std::vector<double> probe_residual;
};
TorusSweep run_torus_sweep(const PolarModel& pm, const std::vector<double>& eps, int grid_res,
                           int probes, std::uint64_t seed, int jobs = 1);
std::vector<Check> check_torus(const TorusSweep& sw);
void write_torus_scaling_csv(std::ostream& os, const TorusSweep& sw);

// probes: post-capture states inside B_sigma(y*) of trajectories from random starts
std::vector<Check> check_attraction(const PolarModel& pm, const CombinedSystem& cs,
                                    const TorusGrid& tg, const Dissipativity& dis, int probes,
                                    std::uint64_t seed);

struct SublevelSetup {
  std::vector<double> eps{1e-2, 1e-3, 1e-4};
  double k = 1, c = 1.5, rho = 3;
  int n = 2;
  long measure_samples = 1000000;
  long inclusion_samples = 100000;
  std::uint64_t seed = 0;
  int jobs = 1;
};
std::vector<Check> check_sublevel(const SublevelSetup& ss, std::vector<BasinRow>* rows = nullptr);

std::vector<Check> check_census(const PolarModel& pm, const CombinedSystem& cs,
                                const TorusGrid& tg, double probe_residual, double k,
                                long samples, double horizon, double rtol, double atol,
                                std::uint64_t seed, int jobs, BasinRow* row = nullptr);

// full property suite for `verify`; artifacts go to cfg.out
std::vector<Check> run_verify(const ScenarioConfig& cfg, const LoadedModel& lm, std::ostream& log);

std::string g17(double x);
std::string eps_tag(double eps);

}  // namespace dynbif
