#include "dynbif/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "dynbif/sampling.hpp"

namespace dynbif {

// ------------------------------------------------------------------ integrator

namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

struct Dense {
  Vec r1, r2, r3, r4, r5;
  double t0 = 0, h = 0;
  Vec at(double t) const {
    const double th = (t - t0) / h, th1 = 1.0 - th;
    return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
  }
};

double rms_norm(const Vec& x, const Vec& sc) {
  return std::sqrt((x.array() / sc.array()).square().mean());
}

}  // namespace

OdeResult integrate(const Field& f, const Vec& y0, double t0, double t1, const OdeOptions& opt,
                    const std::vector<OdeEvent>& events) {
  const int d = static_cast<int>(y0.size());
  OdeResult res;
  Vec y = y0, k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d), yt(d), yn(d), err(d), sc(d);
  double t = t0;
  auto check_inv = [&](const Vec& s) {
    if (!opt.invariance) return;
    const double viol = opt.invariance(s);
    res.max_violation = std::max(res.max_violation, viol);
    if (viol > 10 * opt.atol) ++res.invariance_warnings;
  };
  auto record = [&](double tt, const Vec& s) {
    if (!opt.store) return;
    res.t.push_back(tt);
    res.y.push_back(s);
  };
  record(t, y);
  check_inv(y);
  double next_out = t0 + opt.dt_out;
  if (!(t1 > t0)) {
    res.y_end = y;
    res.t_end = t;
    return res;
  }
  f(t, y, k1);

  double h = opt.h0;
  if (!(h > 0)) {
    sc = opt.atol + opt.rtol * y.cwiseAbs().array();
    const double dd0 = rms_norm(y, sc), dd1 = rms_norm(k1, sc);
    double h0 = (dd0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * dd0 / dd1;
    yt = y + h0 * k1;
    f(t + h0, yt, k2);
    const double dd2 = rms_norm(k2 - k1, sc) / h0;
    const double mx = std::max(dd1, dd2);
    const double h1 = mx <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / mx, 0.2);
    h = std::min(100 * h0, h1);
  }
  h = std::min(h, t1 - t0);

  std::vector<double> gprev(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) gprev[e] = events[e].g(t, y);

  bool last_rejected = false;
  Dense dense;
  while (t < t1) {
    if (res.steps + res.rejected >= opt.max_steps)
      throw NumericError("max_steps", "integrator exceeded the step budget at t = " +
                                          std::to_string(t));
    bool final_step = false;
    if (t + h >= t1 || t + 1.0001 * h >= t1) {
      h = t1 - t;
      final_step = true;
    }
    yt = y + h * a21 * k1;
    f(t + c2 * h, yt, k2);
    yt = y + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, yt, k3);
    yt = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, yt, k4);
    yt = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, yt, k5);
    yt = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, yt, k6);
    yn = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const double tn = final_step ? t1 : t + h;
    f(tn, yn, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    sc = opt.atol + opt.rtol * y.cwiseAbs().cwiseMax(yn.cwiseAbs()).array();
    const double en = rms_norm(err, sc);
    if (!std::isfinite(en)) {
      h *= 0.2;
      ++res.rejected;
      last_rejected = true;
      if (h < opt.h_min * std::max(1.0, std::abs(t)))
        throw NumericError("stiffness", "non-finite field value near t = " + std::to_string(t));
      continue;
    }
    if (en <= 1.0) {
      ++res.steps;
      dense.t0 = t;
      dense.h = tn - t;
      dense.r1 = y;
      dense.r2 = yn - y;
      dense.r3 = h * k1 - dense.r2;
      dense.r4 = dense.r2 - h * k7 - dense.r3;
      dense.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      bool clipped = false;
      for (int i = 0; i < opt.clip_count; ++i)
        if (yn(i) < 0 && yn(i) >= -opt.atol) {
          yn(i) = 0;
          clipped = true;
        }
      if (clipped) f(tn, yn, k7);
      check_inv(yn);

      bool stop = false;
      double t_stop = tn;
      for (std::size_t e = 0; e < events.size(); ++e) {
        const double g1 = events[e].g(tn, yn);
        const double g0 = gprev[e];
        gprev[e] = g1;
        const bool rising = g0 < 0 && g1 >= 0, falling = g0 > 0 && g1 <= 0;
        if (!(rising || falling)) continue;
        if ((events[e].direction > 0 && !rising) || (events[e].direction < 0 && !falling))
          continue;
        double lo = t, hi = tn;
        while (hi - lo > 1e-10) {
          const double mid = 0.5 * (lo + hi);
          const double gm = events[e].g(mid, dense.at(mid));
          if ((gm < 0) == (g0 < 0) && gm != 0)
            lo = mid;
          else
            hi = mid;
        }
        res.events.push_back({events[e].name, hi});
        if (events[e].terminal) {
          stop = true;
          t_stop = std::min(t_stop, hi);
        }
      }

      if (opt.dt_out > 0) {
        while (next_out < t_stop && next_out <= tn) {
          record(next_out, dense.at(next_out));
          next_out += opt.dt_out;
        }
        if (stop) {
          yn = dense.at(t_stop);
          record(t_stop, yn);
        } else if (final_step) {
          record(tn, yn);
        }
      } else if (stop) {
        yn = dense.at(t_stop);
        record(t_stop, yn);
      } else {
        record(tn, yn);
      }
      t = stop ? t_stop : tn;
      y = yn;
      if (stop) break;
      k1 = k7;
      double fac = 0.9 * std::pow(std::max(en, 1e-10), -0.2);
      fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
      h *= fac;
      last_rejected = false;
    } else {
      ++res.rejected;
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      last_rejected = true;
    }
    if (t < t1 && h < opt.h_min * std::max(1.0, std::abs(t))) {
      std::string st;
      for (int i = 0; i < d; ++i) st += (i ? ", " : "") + std::to_string(y(i));
      throw NumericError("stiffness", "step size underflow at t = " + std::to_string(t) +
                                          ", last state (" + st + ")");
    }
  }
  res.y_end = y;
  res.t_end = t;
  return res;
}

// ------------------------------------------------------------------ polar system

PolarSystem::PolarSystem(const PolarModel& pm, double eps, bool full, double remainder_scale)
    : pm_(pm), n_(pm.n), m_(pm.m), eps_(eps), full_(full), scale_(remainder_scale) {
  pm.validate();
  require(eps >= 0, "eps", "eps must be non-negative");
  epsN2_ = std::pow(eps, 0.5 * pm.N);
  for (const auto& p : pm.alpha) alpha_.emplace_back(p);
  for (const auto& p : pm.omega) omega_.emplace_back(p);
  for (const auto& p : pm.c) c_.emplace_back(p);
  for (const auto& p : pm.A) A_.emplace_back(p);
  for (const auto& p : pm.B) B_.emplace_back(p);
  for (const auto& p : pm.W) W_.emplace_back(p);
  for (const auto& p : pm.Psi) Psi_.emplace_back(p);
  for (double s : pm.r_scale) rs_sqrt_.push_back(std::sqrt(s));
}

void PolarSystem::drift(const double* r, const double* v, double* F) const {
  for (int j = 0; j < n_; ++j) {
    double a = alpha_[j](nullptr, 0.0, v) + eps_ * B_[j](r, eps_, v);
    for (int k = 0; k < n_; ++k) a -= A_[j * n_ + k](nullptr, 0.0, v) * r[k];
    F[j] = 2.0 * a * r[j];
  }
  for (int l = 0; l < m_; ++l) F[n_ + l] = c_[l](nullptr, 0.0, v) + eps_ * W_[l](r, eps_, v);
}

void PolarSystem::omega_bar(const double* r, const double* v, double* w) const {
  for (int j = 0; j < n_; ++j) w[j] = omega_[j](nullptr, 0.0, v) + eps_ * Psi_[j](r, eps_, v);
}

void PolarSystem::remainder_terms(const double* r, const double* v, const double* phi, double* G,
                                  double* H) const {
  double rp[32], R[32], P[32], Z[32];
  for (int j = 0; j < n_; ++j) rp[j] = pm_.r_scale[j] * std::max(r[j], 0.0);
  if (!pm_.remainder) {
    std::fill(G, G + n_ + m_, 0.0);
    std::fill(H, H + n_, 0.0);
    return;
  }
  pm_.remainder->eval(rp, v, phi, eps_, R, P, Z);
  const double e32 = eps_ * std::sqrt(eps_);
  for (int j = 0; j < n_; ++j) {
    const double rj = std::max(r[j], 0.0);
    G[j] = std::sqrt(rj) * R[j] / rs_sqrt_[j];
    H[j] = P[j] / (rs_sqrt_[j] * std::sqrt(std::max(rj, 1e-30)));
  }
  for (int l = 0; l < m_; ++l) G[n_ + l] = e32 * Z[l];
}

void PolarSystem::rhs(const double* y, double* dy) const {
  const double* r = y;
  const double* v = y + n_;
  const double* phi = y + n_ + m_;
  if (full_) {
    double F[32];
    drift(r, v, F);
    for (int i = 0; i < n_ + m_; ++i) dy[i] = eps_ * F[i];
    omega_bar(r, v, dy + n_ + m_);
    if (scale_ != 0.0 && pm_.remainder) {
      double G[32], H[32];
      remainder_terms(r, v, phi, G, H);
      const double f = epsN2_ * scale_;
      for (int i = 0; i < n_ + m_; ++i) dy[i] += f * G[i];
      for (int j = 0; j < n_; ++j) dy[n_ + m_ + j] += f * H[j];
    }
  } else {
    for (int j = 0; j < n_; ++j) {
      double a = alpha_[j](nullptr, 0.0, v);
      for (int k = 0; k < n_; ++k) a -= A_[j * n_ + k](nullptr, 0.0, v) * r[k];
      dy[j] = 2.0 * eps_ * a * r[j];
    }
    for (int l = 0; l < m_; ++l) dy[n_ + l] = eps_ * c_[l](nullptr, 0.0, v);
    for (int j = 0; j < n_; ++j) dy[n_ + m_ + j] = omega_[j](nullptr, 0.0, v);
  }
}

Field PolarSystem::field() const {
  return [this](double, const Vec& y, Vec& dy) { rhs(y.data(), dy.data()); };
}

// ------------------------------------------------------------------ trajectories

const char* zone_name(Zone z) {
  switch (z) {
    case Zone::Ds: return "D_s";
    case Zone::Dstar: return "D_*";
    case Zone::Du: return "D_u";
  }
  return "?";
}

namespace {

Zone zone_of(double nv, const Radii& radii) {
  if (nv >= radii.Rstar) return Zone::Ds;
  if (nv >= radii.R0) return Zone::Dstar;
  return Zone::Du;
}

double wrap_angle(double a) {
  double w = std::fmod(a, 2 * M_PI);
  if (w < 0) w += 2 * M_PI;
  if (w >= 2 * M_PI) w = 0;
  return w;
}

}  // namespace

Zone classify_zone(const Vec& v, const Radii& radii) {
  const double nv = v.norm();
  if (nv > radii.Rstar_up)
    throw ValidationError("domain", "||v|| = " + std::to_string(nv) + " exceeds R^*");
  return zone_of(nv, radii);
}

Trajectory simulate(const PolarModel& pm, double eps, const Vec& r0, const Vec& v0,
                    const Vec& phi0, double t_end, const SimOptions& opt,
                    const ZoneConstants* zc) {
  const int n = pm.n, m = pm.m;
  require(r0.size() == n && v0.size() == m && phi0.size() == n, "dimension",
          "initial state dimensions do not match the model");
  require(r0.minCoeff() >= 0, "domain", "initial r must be non-negative");
  PolarSystem sys(pm, eps, opt.full, opt.remainder_scale);
  Vec y0(2 * n + m);
  y0 << r0, v0, phi0;
  OdeOptions o;
  o.rtol = opt.rtol;
  o.atol = opt.atol;
  o.clip_count = n;
  o.dt_out = opt.dt_out;
  o.store = opt.store;
  const double rho = pm.rho, Rup = pm.radii.Rstar_up;
  o.invariance = [n, m, rho, Rup](const Vec& y) {
    const double rmin = y.head(n).minCoeff();
    return std::max({-rmin, y.head(n).sum() - rho, y.segment(n, m).norm() - Rup, 0.0});
  };
  std::vector<OdeEvent> ev;
  auto vnorm = [n, m](const Vec& y) { return y.segment(n, m).norm(); };
  const Radii rad = pm.radii;
  ev.push_back({"enter_D_*", [=](double, const Vec& y) { return vnorm(y) - rad.Rstar; }, -1});
  ev.push_back({"enter_D_s", [=](double, const Vec& y) { return vnorm(y) - rad.Rstar; }, +1});
  ev.push_back({"enter_D_u", [=](double, const Vec& y) { return vnorm(y) - rad.R0; }, -1});
  ev.push_back({"exit_D_u", [=](double, const Vec& y) { return vnorm(y) - rad.R0; }, +1});
  if (zc) {
    const double lo = zc->K_lower(), hi = zc->K_upper(n);
    ev.push_back({"enter_K", [=](double, const Vec& y) { return y.head(n).sum() - lo; }, +1});
    ev.push_back({"exit_K", [=](double, const Vec& y) { return y.head(n).sum() - lo; }, -1});
    ev.push_back({"enter_K", [=](double, const Vec& y) { return y.head(n).sum() - hi; }, -1});
    ev.push_back({"exit_K", [=](double, const Vec& y) { return y.head(n).sum() - hi; }, +1});
  }
  OdeResult res = integrate(sys.field(), y0, 0.0, t_end, o, ev);
  std::stable_sort(res.events.begin(), res.events.end(),
                   [](const EventHit& a, const EventHit& b) { return a.t < b.t; });

  Trajectory tr;
  tr.n = n;
  tr.m = m;
  tr.eps = eps;
  tr.events = res.events;
  tr.invariance_warnings = res.invariance_warnings;
  tr.max_invariance_violation = res.max_violation;
  for (std::size_t i = 0; i < res.t.size(); ++i) {
    const Vec& y = res.y[i];
    tr.t.push_back(res.t[i]);
    tr.r.push_back(y.head(n));
    tr.v.push_back(y.segment(n, m));
    Vec ph = y.tail(n);
    for (int j = 0; j < n; ++j) ph(j) = wrap_angle(ph(j));
    tr.phi.push_back(ph);
    tr.zone.push_back(zone_of(y.segment(n, m).norm(), pm.radii));
  }
  tr.r_end = res.y_end.head(n);
  tr.v_end = res.y_end.segment(n, m);
  tr.phi_end_lift = res.y_end.tail(n);
  return tr;
}

namespace {
std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}
}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t";
  for (int j = 1; j <= tr.n; ++j) os << ",r" << j;
  for (int l = 1; l <= tr.m; ++l) os << ",v" << l;
  for (int j = 1; j <= tr.n; ++j) os << ",phi" << j;
  os << ",zone\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    os << g17(tr.t[i]);
    for (int j = 0; j < tr.n; ++j) os << ',' << g17(tr.r[i](j));
    for (int l = 0; l < tr.m; ++l) os << ',' << g17(tr.v[i](l));
    for (int j = 0; j < tr.n; ++j) os << ',' << g17(tr.phi[i](j));
    os << ',' << zone_name(tr.zone[i]) << '\n';
  }
}

void write_event_log(std::ostream& os, const Trajectory& tr) {
  for (const auto& e : tr.events) os << "event," << e.name << ',' << g17(e.t) << '\n';
}

// ------------------------------------------------------------------ certificates

DecayReport decay_certificate(const Trajectory& tr, const ZoneConstants& zc, const Radii& radii,
                              bool first_approx) {
  require(tr.size() > 0, "trajectory", "empty trajectory");
  require(zone_of(tr.v[0].norm(), radii) == Zone::Ds, "zone",
          "decay certificate needs v(0) in D_s");
  DecayReport rep;
  rep.rate = (first_approx ? 2.0 : 1.0) * tr.eps * zc.alpha_star;
  const double r0 = tr.r[0].sum();
  rep.T1 = tr.t.back();
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (zone_of(tr.v[i].norm(), radii) != Zone::Ds) {
      rep.T1 = tr.t[i];
      break;
    }
    const double bound = r0 * std::exp(-rep.rate * tr.t[i]);
    const double val = tr.r[i].sum();
    ++rep.checked;
    if (bound > 0) rep.worst_ratio = std::max(rep.worst_ratio, val / bound);
    if (val > bound * (1 + 1e-9) + 1e-14) {
      if (rep.violations == 0) rep.first_violation = tr.t[i];
      ++rep.violations;
    }
  }
  rep.ok = rep.violations == 0;
  return rep;
}

CaptureReport capture_detector(const Trajectory& tr, const ZoneConstants& zc, const Radii& radii,
                               double guard) {
  CaptureReport rep;
  if (tr.size() < 2 || !(tr.t.back() > tr.t.front())) return rep;
  const double lo = zc.K_lower(), hi = zc.K_upper(tr.n);
  std::size_t i = 0;
  for (; i < tr.size(); ++i) {
    const double a = tr.r[i].sum();
    if (zone_of(tr.v[i].norm(), radii) == Zone::Du && a >= lo && a <= hi) break;
  }
  if (i == tr.size()) return rep;
  rep.captured = true;
  rep.t_K = tr.t[i];
  for (std::size_t k = i + 1; k < tr.size(); ++k) {
    const double a = tr.r[k].sum();
    if (tr.v[k].norm() >= radii.R0 + guard || a < lo - guard || a > hi + guard) ++rep.exits;
  }
  rep.invariance_ok = rep.exits == 0;
  return rep;
}

double V0(const Vec& r) {
  double s = 0;
  for (int i = 0; i < r.size(); ++i) {
    if (!(r(i) > 0)) throw ValidationError("domain", "V0 needs strictly positive r");
    s += r(i) - 1.0 - std::log(r(i));
  }
  return s;
}

LyapunovConstants lyapunov_constants(const PolarModel& pm, const ZoneConstants& zc,
                                     int sample_budget) {
  LyapunovConstants lc;
  const Vec z = Vec::Zero(pm.m);
  const Vec a0 = pm.alpha_at(z);
  const Mat A0 = pm.A_at(z);
  std::vector<Vec> pts = sobol_ball(pm.m, pm.radii.Rstar_up, sample_budget);
  for (auto& p : sobol_sphere(pm.m, pm.radii.Rstar_up, std::max(8, sample_budget / 16)))
    pts.push_back(p);
  for (const Vec& v : pts) {
    const double nv = v.norm();
    if (nv < 1e-9) continue;
    Eigen::JacobiSVD<Mat> svd(pm.A_at(v) - A0);
    const double val = (pm.alpha_at(v) - a0).norm() + svd.singularValues()(0) * pm.rho;
    lc.q = std::max(lc.q, val / nv);
  }
  lc.lambda = lc.q > 0 ? lc.q * lc.q / (zc.A_star * zc.kappa) : 1.0;
  Eigen::Matrix2d Qf;
  Qf << 2 * zc.A_star, -lc.q, -lc.q, lc.lambda * zc.kappa;
  lc.mu = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(Qf).eigenvalues()(0);
  return lc;
}

LyapunovReport lyapunov_monitor(const Trajectory& tr, const PolarModel& pm,
                                const ZoneConstants& zc, double eps, double k, double C0,
                                double atol, double ball_radius) {
  LyapunovConstants lc = lyapunov_constants(pm, zc);
  LyapunovReport rep;
  rep.q = lc.q;
  rep.lambda = lc.lambda;
  rep.mu = lc.mu;
  rep.C0 = C0;
  rep.c = std::max(1.5, lc.lambda * pm.radii.Rstar_up * pm.radii.Rstar_up / 2 + 1);
  rep.ball_radius = ball_radius >= 0 ? ball_radius : 6 * std::sqrt(eps) * C0 / lc.mu;
  const Vec rs = pm.r_star();
  const double qmin = std::exp(-rep.c) * std::pow(eps, k);
  auto in_set = [&](std::size_t i) {
    const Vec& r = tr.r[i];
    if (r.minCoeff() < qmin || r.sum() > pm.rho || tr.v[i].norm() > pm.radii.Rstar_up)
      return false;
    const double dist = std::sqrt((r - rs).squaredNorm() + tr.v[i].squaredNorm());
    return dist >= rep.ball_radius;
  };
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double v0 = tr.r[i].minCoeff() > 0 ? V0(tr.r[i]) : std::numeric_limits<double>::infinity();
    rep.V0_values.push_back(v0);
    rep.V_values.push_back(v0 + lc.lambda * tr.v[i].squaredNorm() / 2);
  }
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    if (!in_set(i) || !in_set(i + 1)) continue;
    ++rep.checked;
    if (rep.V_values[i + 1] > rep.V_values[i] + atol * std::max(1.0, std::abs(rep.V_values[i])))
      ++rep.violations;
  }
  return rep;
}

double hessian_identity_lhs(const PolarModel& pm, const Vec& r) {
  const Vec z = Vec::Zero(pm.m);
  const Vec rs = pm.r_star();
  const Mat A0 = pm.A_at(z);
  const Vec a0 = pm.alpha_at(z);
  Mat J = Mat((a0 - A0 * rs).asDiagonal()) - rs.asDiagonal() * A0;
  Vec Hr = r.cwiseQuotient(rs.cwiseProduct(rs));
  return Hr.dot(J * r);
}

double hessian_identity_rhs(const PolarModel& pm, const Vec& r) {
  return -r.dot(pm.A_at(Vec::Zero(pm.m)) * r);
}

HessianReport hessian_identity_check(const PolarModel& pm, int trials, std::uint64_t seed) {
  HessianReport rep;
  rep.trials = trials;
  const double An = pm.A_at(Vec::Zero(pm.m)).norm();
  for (int i = 0; i < trials; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i), 5);
    Vec r(pm.n);
    for (int j = 0; j < pm.n; ++j) r(j) = rng.normal();
    const double res = std::abs(hessian_identity_lhs(pm, r) - hessian_identity_rhs(pm, r));
    rep.max_residual = std::max(rep.max_residual, res);
    const double sc = An * r.squaredNorm();
    if (sc > 0) rep.max_scaled = std::max(rep.max_scaled, res / sc);
  }
  return rep;
}

CstarResult compute_Cstar(const PolarModel& pm, const LyapunovConstants& lc, double C0,
                          double eps, int directions) {
  CstarResult out;
  const int n = pm.n, m = pm.m, d = n + m;
  const Vec rs = pm.r_star();
  out.sphere_radius = 6 * std::sqrt(2.0) * eps * C0 / lc.mu;
  auto V = [&](const Vec& p) {
    const Vec r = p.head(n);
    if (r.minCoeff() <= 0) return std::numeric_limits<double>::infinity();
    return V0(r) + lc.lambda * p.tail(m).squaredNorm() / 2;
  };
  Vec center(d);
  center << rs, Vec::Zero(m);
  auto dirs = sobol_sphere(d, 1.0, directions);
  for (int i = 0; i < d; ++i) {
    Vec e = Vec::Zero(d);
    e(i) = 1;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  for (const Vec& u : dirs) out.c_star = std::max(out.c_star, V(center + out.sphere_radius * u));
  if (!std::isfinite(out.c_star)) {
    out.Cstar = std::numeric_limits<double>::infinity();
    return out;
  }
  double radius = 0;
  for (const Vec& u : dirs) {
    double hi = std::max(out.sphere_radius, 1e-12);
    int guard = 0;
    while (V(center + hi * u) <= out.c_star && guard++ < 200) hi *= 2;
    double lo = 0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (V(center + mid * u) <= out.c_star)
        lo = mid;
      else
        hi = mid;
    }
    radius = std::max(radius, hi);
  }
  out.Cstar = radius / std::sqrt(eps);
  return out;
}

std::optional<double> hitting_time(const Trajectory& tr, const Vec& r_star, double Cstar,
                                   double eps) {
  if (tr.size() < 2 || !(tr.t.back() > tr.t.front())) return std::nullopt;
  const double br = Cstar * std::sqrt(eps), bv = Cstar * eps;
  auto ok = [&](std::size_t i) {
    return (tr.r[i] - r_star).norm() < br && tr.v[i].norm() < bv;
  };
  if (!ok(tr.size() - 1)) return std::nullopt;
  std::size_t i = tr.size() - 1;
  while (i > 0 && ok(i - 1)) --i;
  return tr.t[i];
}

AbsRDerivativeReport abs_r_derivative_check(const PolarModel& pm, const ZoneConstants& zc,
                                            double eps, int samples, std::uint64_t seed) {
  AbsRDerivativeReport rep;
  PolarSystem sys(pm, eps, false);
  const int n = pm.n, m = pm.m;
  const double hi = zc.K_upper(n), lo = zc.K_lower();
  const double up_bound = -2 * eps * zc.delta * (zc.alpha_up + zc.delta) / zc.A_star;
  Vec y(2 * n + m), dy(2 * n + m);
  for (int i = 0; i < samples; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i), 11);
    Vec r = sample_simplex(rng, n, pm.rho);
    Vec v = sample_ball(rng, m, pm.radii.Rstar_up);
    const double a = r.sum();
    y << r, v, Vec::Zero(n);
    sys.rhs(y.data(), dy.data());
    const double da = dy.head(n).sum();
    if (a > hi) {
      ++rep.upper_checked;
      if (da > up_bound) ++rep.upper_violations;
    }
    if (v.norm() < pm.radii.R0 && a > 0 && a < lo) {
      ++rep.lower_checked;
      if (da < 2 * eps * zc.delta * a) ++rep.lower_violations;
    }
    // second draw aimed at the small-|r| band
    Vec r2 = sample_simplex(rng, n, std::min(lo, pm.rho));
    Vec v2 = sample_ball(rng, m, pm.radii.R0);
    if (v2.norm() < pm.radii.R0 && r2.sum() > 0 && r2.sum() < lo) {
      y << r2, v2, Vec::Zero(n);
      sys.rhs(y.data(), dy.data());
      ++rep.lower_checked;
      if (dy.head(n).sum() < 2 * eps * zc.delta * r2.sum()) ++rep.lower_violations;
    }
  }
  return rep;
}

// -------------------------------------------------------------------- workers

void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  const int nt = std::min(jobs, count);
  for (int w = 0; w < nt; ++w)
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= count) break;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (!err) err = std::current_exception();
          next.store(count);
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace dynbif
