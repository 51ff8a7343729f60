#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "dynbif/torus.hpp"

namespace dynbif {

struct MeasureEstimate {
  double fraction = 0;
  long hits = 0, samples = 0;
  double stderr_ = 0;  // binomial standard error
};

// fraction of the simplex S_rho (dimension n) with V0(r) > |ln eps^k|
MeasureEstimate sublevel_complement_measure(double eps, double k, double rho, int n, long samples,
                                            std::uint64_t seed = 0, int jobs = 1);

// samples with V0(r) <= |ln eps^k| + c - 1 that violate r_j >= e^{-c} eps^k
struct InclusionCount {
  long checked = 0, violations = 0;
};
InclusionCount first_inclusion_check(double eps, double k, double c, double rho, int n,
                                     long samples, std::uint64_t seed = 0, int jobs = 1);

// samples of {r_j >= e^{-c} eps^{k/n}} cap S_rho with V0(r) > |ln eps^k|;
// throws "hypothesis" unless |ln eps^{k/n}| > rho - ln rho
InclusionCount q_set_inclusion(double eps, double k, double c, double rho, int n, long samples,
                               std::uint64_t seed = 0, int jobs = 1);

struct SlopeFit {
  double slope = 0, stderr_ = 0;
};
// fit of log(y) against log(eps); entries with y <= 0 are dropped
SlopeFit log_log_slope(const std::vector<double>& eps, const std::vector<double>& y);

struct CensusOptions {
  bool restricted = true;       // sample inside V0 <= |ln eps^k|
  double horizon_factor = 40;   // horizon = factor / eps
  double rtol = 1e-9, atol = 1e-11;
  int jobs = 1;
  std::uint64_t seed = 0;
};
struct CensusResult {
  long samples = 0, attracted = 0;
  double fraction = 0;
  double threshold = 0;
  double max_attracted_distance = 0;
  double max_distance = 0;
};
// distance between the state reached at `horizon` and the torus point at the same phase
double terminal_torus_distance(const PolarModel& pm, const TorusGrid& tg, const Vec& r,
                               const Vec& v, const Vec& phi, double horizon, double rtol = 1e-9,
                               double atol = 1e-11);

// integrates each sample to the horizon; attracted iff the terminal distance to the torus
// graph is below 10 (probe residual + rtol + atol)
CensusResult attraction_census(const PolarModel& pm, const CombinedSystem& cs,
                               const TorusGrid& tg, double probe_residual, double k, long samples,
                               const CensusOptions& opt = {});

struct BasinRow {
  double eps = 0, k = 0;
  double complement_fraction = 0, attracted_fraction = 0;
  long samples = 0;
  double slope = 0, stderr_ = 0;
};
void write_basin_csv(std::ostream& os, const std::vector<BasinRow>& rows);

}  // namespace dynbif
