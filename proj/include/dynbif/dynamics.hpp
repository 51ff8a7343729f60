#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dynbif/normalform.hpp"

namespace dynbif {

// ------------------------------------------------------------------ integrator

using Field = std::function<void(double t, const Vec& y, Vec& dy)>;

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-11;
  double h0 = 0;           // 0: automatic
  double h_min = 1e-12;
  long max_steps = 50'000'000;
  int clip_count = 0;      // leading components that must stay >= 0
  double dt_out = 0;       // 0: store every accepted step
  bool store = true;
  // > 0: distance outside the forward-invariant region
  std::function<double(const Vec&)> invariance;
};

struct OdeEvent {
  std::string name;
  std::function<double(double t, const Vec& y)> g;
  int direction = 0;  // +1 rising, -1 falling, 0 both
  bool terminal = false;
};

struct EventHit {
  std::string name;
  double t = 0;
  bool operator==(const EventHit&) const = default;
};

struct OdeResult {
  std::vector<double> t;
  std::vector<Vec> y;
  std::vector<EventHit> events;
  Vec y_end;
  double t_end = 0;
  long steps = 0, rejected = 0;
  int invariance_warnings = 0;
  double max_violation = 0;
};

// Dormand-Prince 5(4) with FSAL, embedded error control and the 4th-order dense output;
// events located by bisection on the dense output to 1e-10 in time.
OdeResult integrate(const Field& f, const Vec& y0, double t0, double t1, const OdeOptions& opt,
                    const std::vector<OdeEvent>& events = {});

// ------------------------------------------------------------------ polar system

// State layout: (r_1..r_n, v_1..v_m, phi_1..phi_n), phi unwrapped.
class PolarSystem {
 public:
  PolarSystem(const PolarModel& pm, double eps, bool full = true, double remainder_scale = 1.0);

  int n() const { return n_; }
  int m() const { return m_; }
  int dim() const { return 2 * n_ + m_; }
  double eps() const { return eps_; }
  bool full() const { return full_; }
  double remainder_scale() const { return scale_; }
  const PolarModel& model() const { return pm_; }

  void rhs(const double* y, double* dy) const;
  Field field() const;

  // F(y, eps) = (2[alpha - A r + eps B] . r, c + eps W)
  void drift(const double* r, const double* v, double* F) const;
  // G = (sqrt(r) . R, eps^{3/2} Z), H = r^{-1/2} . Phi, both without the eps^{N/2} factor
  void remainder_terms(const double* r, const double* v, const double* phi, double* G,
                       double* H) const;
  // omega(v) + eps Psi(r, v, eps)
  void omega_bar(const double* r, const double* v, double* w) const;

 private:
  PolarModel pm_;
  int n_, m_;
  double eps_, epsN2_;
  bool full_;
  double scale_;
  std::vector<CompiledPoly> alpha_, omega_, c_, A_, B_, W_, Psi_;
  std::vector<double> rs_sqrt_;
};

// ------------------------------------------------------------------ trajectories

enum class Zone { Ds, Dstar, Du };
const char* zone_name(Zone z);

// boundary ties belong to the outer zone
Zone classify_zone(const Vec& v, const Radii& radii);

struct Trajectory {
  int n = 0, m = 0;
  double eps = 0;
  std::vector<double> t;
  std::vector<Vec> r, v, phi;  // phi wrapped to [0, 2pi)
  std::vector<Zone> zone;
  std::vector<EventHit> events;
  int invariance_warnings = 0;
  double max_invariance_violation = 0;
  Vec r_end, v_end, phi_end_lift;
  std::size_t size() const { return t.size(); }
};

struct SimOptions {
  bool full = true;
  double rtol = 1e-9;
  double atol = 1e-11;
  double dt_out = 0;
  double remainder_scale = 1.0;
  bool store = true;
};

Trajectory simulate(const PolarModel& pm, double eps, const Vec& r0, const Vec& v0,
                    const Vec& phi0, double t_end, const SimOptions& opt = {},
                    const ZoneConstants* zc = nullptr);

void write_trajectory_csv(std::ostream& os, const Trajectory& tr);
void write_event_log(std::ostream& os, const Trajectory& tr);

// ------------------------------------------------------------------ certificates

struct DecayReport {
  bool ok = true;
  int checked = 0;
  int violations = 0;
  double first_violation = -1;
  double T1 = 0;          // exit time from D_s (or end of trajectory)
  double rate = 0;        // exponent used in the bound
  double worst_ratio = 0; // max |r(t)| / (|r(0)| e^{-rate t})
};
// first_approx selects the sharper 2 eps alpha_* rate
DecayReport decay_certificate(const Trajectory& tr, const ZoneConstants& zc, const Radii& radii,
                              bool first_approx);

struct CaptureReport {
  bool captured = false;
  double t_K = -1;
  bool invariance_ok = false;
  int exits = 0;
};
CaptureReport capture_detector(const Trajectory& tr, const ZoneConstants& zc, const Radii& radii,
                               double guard = 1e-10);

double V0(const Vec& r);

struct LyapunovReport {
  double q = 0, lambda = 0, mu = 0, C0 = 0;
  double ball_radius = 0;
  double c = 1.5;
  std::vector<double> V0_values, V_values;
  int checked = 0;
  int violations = 0;
};
struct LyapunovConstants {
  double q = 0, lambda = 0, mu = 0;
};
LyapunovConstants lyapunov_constants(const PolarModel& pm, const ZoneConstants& zc,
                                     int sample_budget = 2048);
// ball_radius < 0 selects 6 sqrt(eps) C0 / mu
LyapunovReport lyapunov_monitor(const Trajectory& tr, const PolarModel& pm,
                                const ZoneConstants& zc, double eps, double k, double C0,
                                double atol = 1e-9, double ball_radius = -1);

struct HessianReport {
  double max_residual = 0;
  double max_scaled = 0;  // residual / (||A(0)|| ||r||^2)
  int trials = 0;
};
// <H_{V0}(r*) r, J(r*) r> + <A(0) r, r>
double hessian_identity_lhs(const PolarModel& pm, const Vec& r);
double hessian_identity_rhs(const PolarModel& pm, const Vec& r);
HessianReport hessian_identity_check(const PolarModel& pm, int trials, std::uint64_t seed);

// c* = max V on the sphere of radius 6 sqrt(2) eps C0 / mu about (r*, 0); C* is the
// smallest constant with V^{-1}([0, c*]) inside the ball of radius C* sqrt(eps)
struct CstarResult {
  double sphere_radius = 0;
  double c_star = 0;
  double Cstar = 0;
};
CstarResult compute_Cstar(const PolarModel& pm, const LyapunovConstants& lc, double C0,
                          double eps, int directions = 512);

// first time after which ||r - r*|| < C* sqrt(eps) and ||v|| < C* eps hold at every later sample
std::optional<double> hitting_time(const Trajectory& tr, const Vec& r_star, double Cstar,
                                   double eps);

// sign structure of d|r|/dt for the first-approximation field
struct AbsRDerivativeReport {
  int upper_checked = 0, upper_violations = 0;
  int lower_checked = 0, lower_violations = 0;
};
AbsRDerivativeReport abs_r_derivative_check(const PolarModel& pm, const ZoneConstants& zc,
                                            double eps, int samples, std::uint64_t seed);

// -------------------------------------------------------------------- workers

void parallel_for(int count, int jobs, const std::function<void(int)>& body);

}  // namespace dynbif
