#include "dynbif/torus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "dynbif/sampling.hpp"

namespace dynbif {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int ipow(int b, int e) {
  int r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

int mode_of(int i, int M) { return i < M / 2 ? i : i - M; }

// in-place transform along every axis of an M^n array, axis 0 fastest;
// forward: sum x e^{-ik.phi}, backward: sum c e^{+ik.phi} (both unscaled)
void fft_nd(std::vector<Complex>& a, int n, int M, bool forward) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<Complex> line(M), out(M);
  const int total = static_cast<int>(a.size());
  for (int ax = 0, stride = 1; ax < n; ++ax, stride *= M) {
    for (int base = 0; base < total; ++base) {
      if ((base / stride) % M != 0) continue;
      for (int i = 0; i < M; ++i) line[i] = a[base + i * stride];
      if (forward)
        fft.fwd(out, line);
      else
        fft.inv(out, line);
      for (int i = 0; i < M; ++i) a[base + i * stride] = out[i];
    }
  }
}

std::vector<int> multi_index(int idx, int n, int M) {
  std::vector<int> k(n);
  for (int j = 0; j < n; ++j, idx /= M) k[j] = idx % M;
  return k;
}

// Fourier coefficients c_k = res^{-n} sum xi e^{-ik.phi} of real node values
std::vector<Complex> coefficients(const std::vector<double>& vals, int n, int res) {
  std::vector<Complex> a(vals.begin(), vals.end());
  fft_nd(a, n, res, true);
  const double s = 1.0 / static_cast<double>(a.size());
  for (auto& z : a) z *= s;
  return a;
}

// real part of sum c_k (factor_k) e^{ik.phi} on the M^n grid, M >= res;
// deriv selects multiplication by i k_deriv (Nyquist mode dropped)
std::vector<double> synthesize(const std::vector<Complex>& c, int n, int res, int M,
                               int deriv = -1) {
  const int P = ipow(M, n);
  std::vector<Complex> a(P, Complex(0));
  for (int idx = 0; idx < static_cast<int>(c.size()); ++idx) {
    auto k = multi_index(idx, n, res);
    Complex z = c[idx];
    if (deriv >= 0) {
      if (k[deriv] == res / 2 && res % 2 == 0)
        z = 0;
      else
        z *= Complex(0, mode_of(k[deriv], res));
    }
    int dst = 0;
    for (int j = n - 1; j >= 0; --j) {
      const int kk = mode_of(k[j], res);
      dst = dst * M + (kk < 0 ? kk + M : kk);
    }
    a[dst] += z;
  }
  fft_nd(a, n, M, false);
  std::vector<double> out(P);
  for (int i = 0; i < P; ++i) out[i] = a[i].real();
  return out;
}

Vec grid_phase(int idx, int n, int M) {
  Vec phi(n);
  auto k = multi_index(idx, n, M);
  for (int j = 0; j < n; ++j) phi(j) = kTwoPi * k[j] / M;
  return phi;
}

}  // namespace

double wrap_pi(double a) {
  a = std::fmod(a + std::numbers::pi, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a - std::numbers::pi;
}

// ------------------------------------------------------------------ combined system

double CombinedSystem::epsN2() const { return std::pow(eps, 0.5 * N); }

void CombinedSystem::rhs(const double* x, double* dx) const {
  const int d = dim();
  double Fv[64], G[64], H[64];
  F(x, Fv);
  omega_bar(x, dx + d);
  for (int i = 0; i < d; ++i) dx[i] = eps * Fv[i];
  if (GH && remainder_scale != 0.0) {
    GH(x, x + d, G, H);
    const double f = epsN2() * remainder_scale;
    for (int i = 0; i < d; ++i) dx[i] += f * G[i];
    for (int j = 0; j < n; ++j) dx[d + j] += f * H[j];
  }
}

Field CombinedSystem::field() const {
  return [this](double, const Vec& x, Vec& dx) { rhs(x.data(), dx.data()); };
}

Vec CombinedSystem::angular(const Vec& y, const Vec& phi) const {
  Vec w(n);
  omega_bar(y.data(), w.data());
  if (GH && remainder_scale != 0.0) {
    double G[64], H[64];
    GH(y.data(), phi.data(), G, H);
    const double f = epsN2() * remainder_scale;
    for (int j = 0; j < n; ++j) w(j) += f * H[j];
  }
  return w;
}

Mat CombinedSystem::F_jacobian(const Vec& y, bool at_zero) const {
  const int d = dim();
  const auto& f = at_zero ? F0 : F;
  Mat J(d, d);
  Vec a(d), b(d);
  for (int k = 0; k < d; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(y(k)));
    Vec yp = y, ym = y;
    yp(k) += h;
    ym(k) -= h;
    f(yp.data(), a.data());
    f(ym.data(), b.data());
    J.col(k) = (a - b) / (2 * h);
  }
  return J;
}

Mat CombinedSystem::G_jacobian(const Vec& y, const Vec& phi) const {
  const int d = dim();
  Mat J = Mat::Zero(d, d);
  if (!GH || remainder_scale == 0.0) return J;
  const double f = std::pow(eps, 0.5 * (N - 2)) * remainder_scale;
  Vec a(d), b(d), H(n);
  for (int k = 0; k < d; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(y(k)));
    Vec yp = y, ym = y;
    yp(k) += h;
    ym(k) -= h;
    GH(yp.data(), phi.data(), a.data(), H.data());
    GH(ym.data(), phi.data(), b.data(), H.data());
    J.col(k) = f * (a - b) / (2 * h);
  }
  return J;
}

void CombinedSystem::solve_roots(const Vec& guess) {
  auto newton = [&](bool at_zero, Vec y) {
    const auto& f = at_zero ? F0 : F;
    Vec r(dim());
    for (int it = 0; it < 60; ++it) {
      f(y.data(), r.data());
      if (r.lpNorm<Eigen::Infinity>() <= 1e-13) return y;
      y -= F_jacobian(y, at_zero).partialPivLu().solve(r);
    }
    f(y.data(), r.data());
    if (!(r.lpNorm<Eigen::Infinity>() <= 1e-10))
      throw NumericError("root", "Newton iteration for the equilibrium of F did not converge");
    return y;
  };
  y_star = newton(true, guess);
  y_star_eps = newton(false, y_star);
}

CombinedSystem combined_system(const PolarModel& pm, double eps, double remainder_scale) {
  require(eps > 0 && eps < pm.eps0, "eps", "eps must lie in (0, eps0)");
  auto sys = std::make_shared<PolarSystem>(pm, eps, true, remainder_scale);
  auto sys0 = std::make_shared<PolarSystem>(pm, 0.0, true, remainder_scale);
  const int n = pm.n;
  CombinedSystem cs;
  cs.n = n;
  cs.m = pm.m;
  cs.N = pm.N;
  cs.eps = eps;
  cs.remainder_scale = remainder_scale;
  cs.F = [sys, n](const double* y, double* F) { sys->drift(y, y + n, F); };
  cs.F0 = [sys0, n](const double* y, double* F) { sys0->drift(y, y + n, F); };
  cs.GH = [sys, n](const double* y, const double* phi, double* G, double* H) {
    sys->remainder_terms(y, y + n, phi, G, H);
  };
  cs.omega_bar = [sys, n](const double* y, double* w) { sys->omega_bar(y, y + n, w); };
  cs.omega0 = pm.omega_at(Vec::Zero(pm.m));
  Vec guess(n + pm.m);
  guess << pm.r_star(), Vec::Zero(pm.m);
  cs.solve_roots(guess);
  return cs;
}

// ------------------------------------------------------------------ dissipativity

Mat stability_form(const Mat& J) {
  const int d = static_cast<int>(J.rows());
  Eigen::EigenSolver<Mat> es(J);
  for (int i = 0; i < d; ++i)
    if (!(es.eigenvalues()(i).real() < 0))
      throw NumericError("stability", "F_y'(y*, 0) is not Hurwitz");
  Mat K(d * d, d * d);
  for (int c = 0; c < d * d; ++c) {
    Mat E = Mat::Zero(d, d);
    E(c % d, c / d) = 1;
    const Mat L = J.transpose() * E + E * J;
    K.col(c) = Eigen::Map<const Vec>(L.data(), d * d);
  }
  const Mat I = -Mat::Identity(d, d);
  const Vec p = K.fullPivLu().solve(Eigen::Map<const Vec>(I.data(), d * d));
  const Mat P = Eigen::Map<const Mat>(p.data(), d, d);
  return 0.5 * (P + P.transpose());
}

double p_norm(const Mat& P, const Vec& z) { return std::sqrt(std::max(0.0, z.dot(P * z))); }

Dissipativity dissipativity_constants(const CombinedSystem& cs, int sample_budget,
                                      double sigma_start, std::uint64_t seed) {
  require(sample_budget > 0, "samples", "sample_budget must be positive");
  const int d = cs.dim(), n = cs.n;
  Dissipativity out;
  out.P = stability_form(cs.F_jacobian(cs.y_star, true));
  Eigen::LLT<Mat> llt(out.P);
  const Mat Linv = llt.matrixL().solve(Mat::Identity(d, d));
  // -1/2 max eigenvalue of sym(P M) relative to P
  auto gamma_at = [&](const Vec& y, const Vec& phi) {
    const Mat M = cs.F_jacobian(y) + cs.G_jacobian(y, phi);
    const Mat S = 0.5 * (out.P * M + M.transpose() * out.P);
    const Mat T = Linv * S * Linv.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (T + T.transpose()));
    return -0.5 * es.eigenvalues().maxCoeff();
  };
  auto phase = [&](int i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i), 7);
    Vec phi(n);
    for (int j = 0; j < n; ++j) phi(j) = kTwoPi * rng.uniform();
    return phi;
  };
  out.gamma0 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < std::min(sample_budget, 64); ++i)
    out.gamma0 = std::min(out.gamma0, gamma_at(cs.y_star, phase(i)));
  out.samples = std::min(sample_budget, 64);
  if (!(out.gamma0 > 0))
    throw NumericError("dissipativity", "no dissipativity at y*: gamma0 = " +
                                            std::to_string(out.gamma0));
  const auto cloud = sobol_ball(d, 1.0, sample_budget);
  for (double sigma = sigma_start; sigma >= 1e-3; sigma *= 0.7) {
    double g = out.gamma0;
    for (int i = 0; i < sample_budget && g >= 0.5 * out.gamma0; ++i) {
      g = std::min(g, gamma_at(cs.y_star + sigma * cloud[i], phase(i + 64)));
      ++out.samples;
    }
    if (g >= 0.5 * out.gamma0) {
      out.gamma = g;
      out.sigma = sigma;
      return out;
    }
  }
  throw NumericError("dissipativity", "no admissible sigma above 1e-3");
}

// ------------------------------------------------------------------ torus grid

Vec TorusGrid::node_phase(int idx) const { return grid_phase(idx, n, res); }

void TorusGrid::finalize() {
  require(res >= 2 && static_cast<int>(xi.size()) == ipow(res, n), "grid",
          "torus grid: node count must equal res^n");
  coef_.assign(dim, {});
  std::vector<double> vals(xi.size());
  for (int c = 0; c < dim; ++c) {
    for (std::size_t p = 0; p < xi.size(); ++p) vals[p] = xi[p](c);
    coef_[c] = coefficients(vals, n, res);
  }
  rho = 0;
  L = 0;
  const double h = kTwoPi / res;
  for (int p = 0; p < nodes(); ++p) {
    rho = std::max(rho, xi[p].norm());
    auto k = multi_index(p, n, res);
    for (int j = 0, stride = 1; j < n; ++j, stride *= res) {
      const int q = p + ((k[j] + 1) % res - k[j]) * stride;
      L = std::max(L, (xi[q] - xi[p]).norm() / h);
    }
  }
}

Vec TorusGrid::xi_at(const Vec& phi) const {
  std::vector<std::vector<Complex>> e(n, std::vector<Complex>(res));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < res; ++i) e[j][i] = std::polar(1.0, mode_of(i, res) * phi(j));
  Vec out = Vec::Zero(dim);
  for (int idx = 0; idx < nodes(); ++idx) {
    Complex w(1);
    for (int j = 0, r = idx; j < n; ++j, r /= res) w *= e[j][r % res];
    for (int c = 0; c < dim; ++c) out(c) += (coef_[c][idx] * w).real();
  }
  return out;
}

double TorusGrid::sup_distance(const Vec& ref) const {
  double s = 0;
  for (const auto& x : xi) s = std::max(s, (y_base + eps * x - ref).norm());
  return s;
}

// ------------------------------------------------------------------ torus solve

TorusGrid solve_invariant_torus(const CombinedSystem& cs, const TorusOptions& opt) {
  require(opt.grid_res >= 4 && opt.grid_res % 2 == 0, "grid", "grid_res must be even and >= 4");
  require(opt.damping > 0 && opt.damping <= 1, "damping", "damping must lie in (0, 1]");
  const int n = cs.n, d = cs.dim(), res = opt.grid_res;
  const double eps = cs.eps;
  const double gfac = std::pow(eps, 0.5 * (cs.N - 2)) * cs.remainder_scale;
  const double hfac = cs.epsN2() * cs.remainder_scale;
  TorusGrid tg;
  tg.n = n;
  tg.dim = d;
  tg.res = res;
  tg.eps = eps;
  tg.y_base = cs.y_star_eps;
  tg.y_ref = cs.y_star;
  const int P = ipow(res, n);
  tg.xi.assign(P, Vec::Zero(d));
  const Mat J = cs.F_jacobian(cs.y_star_eps);
  Vec w0(n);
  cs.omega_bar(cs.y_star_eps.data(), w0.data());

  // per-mode inverses of i<k, w0> - eps J
  std::vector<Eigen::PartialPivLU<CMat>> inv;
  inv.reserve(P);
  for (int idx = 0; idx < P; ++idx) {
    auto k = multi_index(idx, n, res);
    double kw = 0;
    for (int j = 0; j < n; ++j) kw += mode_of(k[j], res) * w0(j);
    CMat A = -eps * J.cast<Complex>();
    A.diagonal().array() += Complex(0, kw);
    inv.emplace_back(A);
  }

  // defect of D xi . Omega = F(Y) + eps^{N/2-1} s G on an M^n grid
  auto evaluate = [&](const std::vector<std::vector<Complex>>& coef, int M, std::vector<Vec>* nl) {
    const int Q = ipow(M, n);
    std::vector<std::vector<double>> xv(d), dxv(d * n);
    for (int c = 0; c < d; ++c) {
      xv[c] = synthesize(coef[c], n, res, M);
      for (int j = 0; j < n; ++j) dxv[c * n + j] = synthesize(coef[c], n, res, M, j);
    }
    if (nl) nl->assign(Q, Vec::Zero(d));
    double worst = 0;
    Vec Y(d), Fy(d), G(d), H(n), w(n), xi(d);
    for (int p = 0; p < Q; ++p) {
      const Vec phi = grid_phase(p, n, M);
      for (int c = 0; c < d; ++c) xi(c) = xv[c][p];
      Y = cs.y_star_eps + eps * xi;
      cs.F(Y.data(), Fy.data());
      cs.omega_bar(Y.data(), w.data());
      G.setZero();
      H.setZero();
      if (cs.GH && cs.remainder_scale != 0.0) cs.GH(Y.data(), phi.data(), G.data(), H.data());
      const Vec Om = w + hfac * H;
      Vec transport = Vec::Zero(d), drift = Vec::Zero(d);
      for (int c = 0; c < d; ++c)
        for (int j = 0; j < n; ++j) {
          transport(c) += dxv[c * n + j][p] * Om(j);
          drift(c) += dxv[c * n + j][p] * (Om(j) - w0(j));
        }
      const Vec rhs = Fy + gfac * G;
      worst = std::max(worst, eps * (transport - rhs).lpNorm<Eigen::Infinity>());
      if (nl) (*nl)[p] = Fy - eps * (J * xi) + gfac * G - drift;
    }
    return worst;
  };

  std::vector<std::vector<Complex>> coef(d, std::vector<Complex>(P, Complex(0)));
  std::vector<Vec> nl;
  std::vector<double> vals(P);
  for (int it = 0;; ++it) {
    const double r = evaluate(coef, res, &nl);
    tg.history.push_back(r);
    tg.iterations = it;
    if (r < opt.tol) break;
    if (it >= opt.max_iter || !std::isfinite(r)) {
      std::string h;
      for (std::size_t i = tg.history.size() > 8 ? tg.history.size() - 8 : 0;
           i < tg.history.size(); ++i)
        h += " " + std::to_string(tg.history[i]);
      throw NumericError("torus_solve", "invariant torus iteration did not converge; residuals:" + h);
    }
    std::vector<std::vector<Complex>> nh(d);
    for (int c = 0; c < d; ++c) {
      for (int p = 0; p < P; ++p) vals[p] = nl[p](c);
      nh[c] = coefficients(vals, n, res);
    }
    CVec b(d);
    for (int idx = 0; idx < P; ++idx) {
      for (int c = 0; c < d; ++c) b(c) = nh[c][idx];
      CVec x = inv[idx].solve(b);
      for (int c = 0; c < d; ++c)
        coef[c][idx] += opt.damping * (x(c) - coef[c][idx]);
    }
  }
  for (int c = 0; c < d; ++c) {
    auto v = synthesize(coef[c], n, res, res);
    for (int p = 0; p < P; ++p) tg.xi[p](c) = v[p];
  }
  tg.finalize();
  tg.residual = evaluate(coef, 2 * res, nullptr);
  return tg;
}

// ------------------------------------------------------------------ probes

namespace {

OdeResult flow(const CombinedSystem& cs, const Vec& y, const Vec& phi, double T, double rtol,
               double atol, double dt_out = 0, bool store = false) {
  Vec x(cs.dim() + cs.n);
  x << y, phi;
  OdeOptions o;
  o.rtol = rtol;
  o.atol = atol;
  o.store = store;
  o.dt_out = dt_out;
  return integrate(cs.field(), x, 0.0, T, o);
}

}  // namespace

double invariance_residual(const TorusGrid& tg, const CombinedSystem& cs,
                           const std::vector<Vec>& phases, const ProbeOptions& opt) {
  const int d = cs.dim(), n = cs.n;
  const double dt = 0.1 / cs.omega0.cwiseAbs().maxCoeff();
  double worst = 0;
  for (const auto& phi : phases) {
    auto res = flow(cs, tg.point(phi), phi, dt, opt.rtol, opt.atol);
    const Vec y1 = res.y_end.head(d);
    const Vec phi1 = res.y_end.tail(n);
    worst = std::max(worst, (y1 - tg.point(phi1)).norm());
  }
  return worst;
}

double invariance_residual(const TorusGrid& tg, const CombinedSystem& cs, int probes,
                           std::uint64_t seed, const ProbeOptions& opt) {
  std::vector<Vec> phases;
  for (int i = 0; i < probes; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i), 11);
    Vec phi(cs.n);
    for (int j = 0; j < cs.n; ++j) phi(j) = kTwoPi * rng.uniform();
    phases.push_back(phi);
  }
  return invariance_residual(tg, cs, phases, opt);
}

// ------------------------------------------------------------------ asymptotic phase

PhaseResult asymptotic_phase(const CombinedSystem& cs, const TorusGrid& tg,
                             const Dissipativity& dis, const Vec& y0, const Vec& phi0,
                             const PhaseOptions& opt) {
  require(dis.gamma > 0, "gamma", "asymptotic_phase needs gamma > 0");
  const int d = cs.dim(), n = cs.n;
  PhaseResult out;
  out.window = opt.window_factor / (cs.eps * dis.gamma);
  const double T = out.window;
  auto probe = flow(cs, y0, phi0, T, opt.rtol, opt.atol);
  const Vec target = probe.y_end.tail(n);
  auto terminal_phase = [&](const Vec& ph) {
    return Vec(flow(cs, tg.point(ph), ph, T, opt.rtol, opt.atol).y_end.tail(n));
  };
  auto offset = [&](const Vec& ph) {
    Vec e = target - terminal_phase(ph);
    for (int j = 0; j < n; ++j) e(j) = wrap_pi(e(j));
    return e;
  };
  Vec ph = phi0;
  Vec e = offset(ph);
  for (out.iterations = 0; e.lpNorm<Eigen::Infinity>() > opt.phase_tol; ++out.iterations) {
    if (out.iterations >= opt.max_iter)
      throw NumericError("attraction", "asymptotic phase iteration did not converge");
    Mat D(n, n);
    const Vec base = terminal_phase(ph);
    for (int j = 0; j < n; ++j) {
      Vec q = ph;
      q(j) += 1e-6;
      D.col(j) = (terminal_phase(q) - base) / 1e-6;
    }
    ph += D.partialPivLu().solve(e);
    e = offset(ph);
  }
  for (int j = 0; j < n; ++j) ph(j) = wrap_pi(ph(j) - std::numbers::pi) + std::numbers::pi;
  out.phi_star = ph;

  const double dt = T / opt.curve_samples;
  auto a = flow(cs, y0, phi0, T, opt.rtol, opt.atol, dt, true);
  auto b = flow(cs, tg.point(ph), ph, T, opt.rtol, opt.atol, dt, true);
  const std::size_t K = std::min(a.t.size(), b.t.size());
  std::vector<double> ft, fl;
  for (std::size_t i = 0; i < K; ++i) {
    const double dist = p_norm(dis.P, Vec(a.y[i].head(d) - b.y[i].head(d)));
    out.t.push_back(a.t[i]);
    out.dist.push_back(dist);
    if (dist > opt.floor) {
      ft.push_back(a.t[i]);
      fl.push_back(std::log(dist));
    }
  }
  out.d0 = out.dist.front();
  if (out.d0 > opt.floor && !(out.dist.back() < out.d0))
    throw NumericError("attraction", "distance to the torus trajectory did not decrease");
  if (ft.size() >= 2) out.rate = -linear_fit(ft, fl).slope;
  for (std::size_t i = 0; i < out.t.size(); ++i)
    if (out.d0 > 0)
      out.max_bound_ratio = std::max(
          out.max_bound_ratio, out.dist[i] / (std::exp(-cs.eps * dis.gamma * out.t[i]) * out.d0));
  return out;
}

LipschitzEstimate lipschitz_estimate(const CombinedSystem& cs, const Dissipativity& dis,
                                     int samples, std::uint64_t seed) {
  const int d = cs.dim(), n = cs.n;
  const auto cloud = sobol_ball(d, 2 * dis.sigma, samples);
  LipschitzEstimate out;
  for (int i = 0; i < samples; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i), 13);
    Vec phi(n);
    for (int j = 0; j < n; ++j) phi(j) = kTwoPi * rng.uniform();
    const Vec y = cs.y_star + cloud[i];
    Mat Dy(n, d);
    for (int k = 0; k < d; ++k) {
      const double h = 1e-6;
      Vec yp = y, ym = y;
      yp(k) += h;
      ym(k) -= h;
      Dy.col(k) = (cs.angular(yp, phi) - cs.angular(ym, phi)) / (2 * h);
    }
    const Mat Fy = cs.F_jacobian(y) + cs.G_jacobian(y, phi);
    out.K = std::max({out.K, Dy.operatorNorm(), Fy.operatorNorm()});
  }
  out.M = 4 * out.K / dis.gamma;
  return out;
}

ReducedField reduced_field_extract(const TorusGrid& tg, const CombinedSystem& cs) {
  ReducedField out;
  for (int p = 0; p < tg.nodes(); ++p) {
    const Vec phi = tg.node_phase(p);
    const Vec y = tg.y_base + tg.eps * tg.xi[p];
    out.f.push_back((cs.angular(y, phi) - cs.omega0) / tg.eps);
    out.sup = std::max(out.sup, out.f.back().lpNorm<Eigen::Infinity>());
  }
  const double h = kTwoPi / tg.res;
  for (int p = 0; p < tg.nodes(); ++p) {
    auto k = multi_index(p, tg.n, tg.res);
    for (int j = 0, stride = 1; j < tg.n; ++j, stride *= tg.res) {
      const int q = p + ((k[j] + 1) % tg.res - k[j]) * stride;
      out.L = std::max(out.L, (out.f[q] - out.f[p]).norm() / h);
    }
  }
  return out;
}

}  // namespace dynbif
