#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "dynbif/dynamics.hpp"

namespace dynbif {

// y' = eps F(y) + eps^{N/2} s G(y, phi),  phi' = omega_bar(y) + eps^{N/2} s H(y, phi)
// with y = (r, v) and s = remainder_scale. State layout (y, phi).
struct CombinedSystem {
  int n = 0, m = 0, N = 5;
  double eps = 0;
  double remainder_scale = 1.0;
  std::function<void(const double* y, double* F)> F;   // at eps
  std::function<void(const double* y, double* F)> F0;  // at eps = 0
  std::function<void(const double* y, const double* phi, double* G, double* H)> GH;
  std::function<void(const double* y, double* w)> omega_bar;
  Vec omega0;      // omega at v = 0
  Vec y_star;      // root of F0
  Vec y_star_eps;  // root of F

  int dim() const { return n + m; }
  double epsN2() const;
  void rhs(const double* x, double* dx) const;
  Field field() const;
  // angular velocity omega_bar + eps^{N/2} s H
  Vec angular(const Vec& y, const Vec& phi) const;
  Mat F_jacobian(const Vec& y, bool at_zero = false) const;
  // Jacobian in y of eps^{(N-2)/2} s G
  Mat G_jacobian(const Vec& y, const Vec& phi) const;
  // Newton from the given guesses; throws "root" on failure
  void solve_roots(const Vec& guess);
};

CombinedSystem combined_system(const PolarModel& pm, double eps, double remainder_scale = 1.0);

// P > 0 with J^T P + P J = -I; throws "stability" when J is not Hurwitz
Mat stability_form(const Mat& J);

struct Dissipativity {
  Mat P;
  double gamma0 = 0;  // at y* over the phase cloud
  double gamma = 0;
  double sigma = 0;
  int samples = 0;
};
// <[F_y' + eps^{(N-2)/2} G_y'] z, z>_P <= -2 gamma |z|_P^2 on B_sigma(y*) x T^n
Dissipativity dissipativity_constants(const CombinedSystem& cs, int sample_budget = 512,
                                      double sigma_start = 0.5, std::uint64_t seed = 0);
double p_norm(const Mat& P, const Vec& z);

class TorusGrid {
 public:
  int n = 0, dim = 0, res = 0;
  double eps = 0;
  Vec y_base;             // y_*(eps)
  Vec y_ref;              // y* at eps = 0
  std::vector<Vec> xi;    // res^n node values, axis 0 fastest
  double L = 0, rho = 0;
  double residual = 0;    // invariance-equation defect on the doubled grid
  int iterations = 0;
  std::vector<double> history;

  int nodes() const { return static_cast<int>(xi.size()); }
  Vec node_phase(int idx) const;
  // recomputes the interpolant, L and rho from the node values
  void finalize();
  Vec xi_at(const Vec& phi) const;
  Vec point(const Vec& phi) const { return y_base + eps * xi_at(phi); }
  double sup_distance(const Vec& ref) const;

 private:
  std::vector<std::vector<Complex>> coef_;  // per component, res^n modes
};

struct TorusOptions {
  int grid_res = 32;
  double tol = 1e-13;
  int max_iter = 200;
  double damping = 1.0;
};
TorusGrid solve_invariant_torus(const CombinedSystem& cs, const TorusOptions& opt = {});

struct ProbeOptions {
  double rtol = 1e-12, atol = 1e-14;
};
double invariance_residual(const TorusGrid& tg, const CombinedSystem& cs,
                           const std::vector<Vec>& phases, const ProbeOptions& opt = {});
double invariance_residual(const TorusGrid& tg, const CombinedSystem& cs, int probes,
                           std::uint64_t seed = 0, const ProbeOptions& opt = {});

struct PhaseOptions {
  double window_factor = 5.0;  // T_w = window_factor / (eps gamma)
  double phase_tol = 1e-6;
  int max_iter = 30;
  int curve_samples = 400;
  double rtol = 1e-11, atol = 1e-13;
  double floor = 1e-10;        // distances below this are excluded from the fit
};
struct PhaseResult {
  Vec phi_star;
  double rate = 0;
  int iterations = 0;
  double window = 0;
  double d0 = 0;
  std::vector<double> t, dist;  // P-norm distance of the y-components
  double max_bound_ratio = 0;   // max d(t) / (e^{-eps gamma t} d0)
};
PhaseResult asymptotic_phase(const CombinedSystem& cs, const TorusGrid& tg,
                             const Dissipativity& dis, const Vec& y0, const Vec& phi0,
                             const PhaseOptions& opt = {});

struct LipschitzEstimate {
  double K = 0, M = 0;
};
LipschitzEstimate lipschitz_estimate(const CombinedSystem& cs, const Dissipativity& dis,
                                     int samples = 256, std::uint64_t seed = 0);

struct ReducedField {
  std::vector<Vec> f;  // node values of [angular(torus point) - omega(0)] / eps
  double sup = 0, L = 0;
};
ReducedField reduced_field_extract(const TorusGrid& tg, const CombinedSystem& cs);

double wrap_pi(double a);

}  // namespace dynbif
