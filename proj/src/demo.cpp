#include "dynbif/demo.hpp"

#include <cmath>

#include "dynbif/sampling.hpp"

namespace dynbif {

ScalarPoly conj_swap(const ScalarPoly& p, int n) {
  ScalarPoly out(p.shape());
  for (const auto& t : p.terms()) {
    std::vector<int> q(2 * n);
    for (int j = 0; j < n; ++j) {
      q[j] = t.y[j + n];
      q[j + n] = t.y[j];
    }
    out.add_term(MultiIndex(q), t.eps, t.v, std::conj(t.c));
  }
  return out;
}

TaylorModel taylor_from_w_form(int n, int m, int N, int s, int dv, const Radii& radii,
                               const std::vector<ScalarPoly>& fast_w,
                               const std::vector<ScalarPoly>& slow_w,
                               const std::vector<ScalarPoly>& omega) {
  require(static_cast<int>(fast_w.size()) == n && static_cast<int>(slow_w.size()) == m,
          "model", "w-form needs n fast and m slow components");
  TaylorModel tm;
  tm.n = n;
  tm.m = m;
  tm.N = N;
  tm.s = s;
  tm.dv = dv;
  tm.radii = radii;
  tm.omega = omega;
  const PolyShape W = tm.shape();
  const int d = 2 * n;
  std::vector<ScalarPoly> hw(d, ScalarPoly(W));
  for (int j = 0; j < n; ++j) {
    require(fast_w[j].shape() == W, "model", "w-form fast component shape");
    hw[j] = fast_w[j];
    hw[j + n] = conj_swap(fast_w[j], n);
  }
  BasisChange b = BasisChange::standard(n);
  std::vector<ScalarPoly> wsub(d, ScalarPoly(W));
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k)
      if (b.S_inv(i, k) != Complex(0)) wsub[i] += ScalarPoly::y_var(W, k) * b.S_inv(i, k);
  std::vector<ScalarPoly> hx;
  for (int i = 0; i < d; ++i) hx.push_back(hw[i].compose(&wsub, nullptr, W));
  auto realify = [](const ScalarPoly& p) {
    ScalarPoly out(p.shape());
    double scale = std::max(1.0, p.max_abs());
    for (const auto& t : p.terms()) {
      if (std::abs(t.c.imag()) > 1e-13 * scale)
        throw ValidationError("model", "w-form data does not describe a real system");
      if (std::abs(t.c.real()) > 1e-15 * scale) out.add_term(t.y, t.eps, t.v, t.c.real());
    }
    return out;
  };
  for (int k = 0; k < d; ++k) {
    ScalarPoly f(W);
    for (int i = 0; i < d; ++i)
      if (b.S(k, i) != Complex(0)) f += hx[i] * b.S(k, i);
    tm.fast.push_back(realify(f));
  }
  for (int l = 0; l < m; ++l) tm.slow.push_back(realify(slow_w[l].compose(&wsub, nullptr, W)));
  return tm;
}

namespace {

MultiIndex mi(std::initializer_list<int> e) { return MultiIndex(std::vector<int>(e)); }

}  // namespace

TaylorModel demo_taylor_model() {
  const int n = 2, m = 1, N = 5, s = 3, dv = 4;
  const PolyShape W{2 * n, m, N, s, dv};
  const PolyShape O{0, m, 0, 0, dv};
  const Complex I(0, 1);
  const double r2 = std::sqrt(2.0);
  auto t = [&](ScalarPoly& p, MultiIndex q, int e, int v, Complex c) {
    p.add_term(q, e, mi({v}), c);
  };
  ScalarPoly w1(W), w2(W), g(W);
  // w1' = (eps(0.5 - v^2) + 0.1 eps^2 + i) w1 + ...
  t(w1, mi({1, 0, 0, 0}), 0, 0, I);
  t(w1, mi({1, 0, 0, 0}), 1, 0, 0.5);
  t(w1, mi({1, 0, 0, 0}), 1, 2, -1.0);
  t(w1, mi({1, 0, 0, 0}), 2, 0, 0.1);
  t(w1, mi({2, 0, 1, 0}), 0, 0, Complex(-1.0, 0.4));
  t(w1, mi({1, 1, 0, 1}), 0, 0, Complex(-0.3, 0.1));
  t(w1, mi({1, 1, 0, 0}), 1, 0, 0.2);
  t(w1, mi({1, 1, 0, 0}), 1, 1, 0.1);
  t(w1, mi({2, 0, 0, 1}), 0, 0, 0.25);
  t(w1, mi({0, 3, 0, 0}), 0, 0, 0.1);
  t(w1, mi({2, 2, 0, 0}), 0, 0, 0.05);
  t(w1, mi({3, 0, 2, 0}), 0, 0, -0.1);
  // w2' = (eps(0.5 - v^2) + i sqrt2) w2 + ...
  t(w2, mi({0, 1, 0, 0}), 0, 0, I * r2);
  t(w2, mi({0, 1, 0, 0}), 1, 0, 0.5);
  t(w2, mi({0, 1, 0, 0}), 1, 2, -1.0);
  t(w2, mi({1, 1, 1, 0}), 0, 0, Complex(-0.3, -0.2));
  t(w2, mi({0, 2, 0, 1}), 0, 0, Complex(-1.0, -0.3));
  t(w2, mi({2, 0, 1, 0}), 0, 0, 0.15);
  t(w2, mi({0, 1, 1, 0}), 1, 1, 0.3);
  // u' = eps g
  t(g, mi({0, 0, 0, 0}), 0, 1, -1.0);
  t(g, mi({1, 1, 0, 0}), 0, 0, 0.15);
  t(g, mi({0, 0, 1, 1}), 0, 0, 0.15);
  t(g, mi({1, 0, 1, 0}), 0, 0, 0.1);
  t(g, mi({0, 1, 0, 0}), 0, 1, 0.1);
  t(g, mi({0, 0, 0, 1}), 0, 1, 0.1);
  std::vector<ScalarPoly> om{ScalarPoly::constant(O, 1.0), ScalarPoly::constant(O, r2)};
  return taylor_from_w_form(n, m, N, s, dv, Radii{}, {w1, w2}, {g}, om);
}

PolarModel demo_polar_model_raw() {
  PolarModel pm;
  pm.n = 2;
  pm.m = 1;
  pm.N = 5;
  pm.s = 3;
  pm.dv = 4;
  pm.eps0 = 0.05;
  pm.rho = 4.0;
  pm.radii = Radii{};
  pm.r_scale = {1.0, 1.0};
  const PolyShape vs = pm.v_shape(), rs = pm.r_shape();
  const MultiIndex none = MultiIndex::zero(0);
  ScalarPoly alpha(vs);
  alpha.add_term(none, 0, mi({0}), 0.5);
  alpha.add_term(none, 0, mi({2}), -1.0);
  pm.alpha = {alpha, alpha};
  pm.omega = {ScalarPoly::constant(vs, 1.0), ScalarPoly::constant(vs, std::sqrt(2.0))};
  ScalarPoly c(vs);
  c.add_term(none, 0, mi({1}), -1.0);
  pm.c = {c};
  pm.A = {ScalarPoly::constant(vs, 1.0), ScalarPoly::constant(vs, 0.3),
          ScalarPoly::constant(vs, 0.3), ScalarPoly::constant(vs, 1.0)};
  pm.B = {ScalarPoly::constant(rs, 0.3), ScalarPoly::constant(rs, -0.2)};
  pm.W = {ScalarPoly(rs)};
  ScalarPoly p1(rs), p2(rs);
  p1.add_term(mi({1, 0}), 0, mi({0}), -0.2);
  p1.add_term(mi({0, 1}), 0, mi({0}), 0.1);
  p2.add_term(mi({1, 0}), 0, mi({0}), 0.1);
  p2.add_term(mi({0, 1}), 0, mi({0}), -0.3);
  pm.Psi = {p1, p2};

  using T = TrigTerm;
  auto term = [](T::Target tg, int comp, double coef, bool sq, std::vector<int> vpow,
                 std::vector<int> k, bool is_sin) {
    T x;
    x.target = tg;
    x.comp = comp;
    x.coef = coef;
    x.sqrt_r = sq;
    x.r_pow = {0, 0};
    x.v_pow = std::move(vpow);
    x.k = std::move(k);
    x.is_sin = is_sin;
    return x;
  };
  std::vector<T> terms{
      term(T::R, 0, 0.4, true, {0}, {1, 0}, false),
      term(T::R, 0, 0.3, true, {0}, {1, -1}, true),
      term(T::R, 0, 0.2, true, {1}, {0, 0}, false),
      term(T::R, 1, 0.4, true, {0}, {0, 1}, true),
      term(T::R, 1, 0.3, true, {0}, {1, 1}, false),
      term(T::R, 1, -0.1, true, {1}, {0, 0}, false),
      term(T::Phi, 0, 0.5, true, {0}, {0, 1}, true),
      term(T::Phi, 1, 0.5, true, {0}, {1, 0}, false),
      term(T::Z, 0, 0.5, false, {0}, {1, 2}, true),
      term(T::Z, 0, 0.2, false, {1}, {1, 0}, false),
  };
  pm.remainder = std::make_shared<TrigRemainder>(2, 1, terms);
  pm.validate();
  return pm;
}

PolarModel demo_polar_model() { return demo_polar_model_raw().rescaled(); }

BlockDiagSystem demo_blockdiag_system(int s, std::uint64_t seed) {
  BlockDiagSystem out;
  const int d = out.d;
  const PolyShape sh{0, 1, 0, s + 1, 2};
  const MultiIndex none = MultiIndex::zero(0);
  CounterRng rng(seed, 0);
  Mat A0(d, d);
  A0 << 0.1, -1, 0, 0, 1, 0.1, 0, 0, 0, 0, -0.2, -2.2, 0, 0, 2.2, -0.2;
  Mat Q = Mat::Identity(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) Q(i, j) += 0.3 * rng.normal();
  A0 = Q * A0 * Q.inverse();
  out.A.assign(d * d, ScalarPoly(sh));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      out.A[i * d + j].add_term(none, 0, mi({0}), A0(i, j));
      for (int e = 0; e <= s + 1; ++e)
        for (int p = 0; p <= 2; ++p)
          if (e + p > 0) out.A[i * d + j].add_term(none, e, mi({p}), 0.5 * rng.normal());
    }
  ScalarPoly g(sh);
  g.add_term(none, 0, mi({1}), -1.0);
  g.add_term(none, 0, mi({0}), 0.2);
  out.G = {g};
  out.v0 = Vec::Constant(1, 0.3);
  return out;
}

}  // namespace dynbif
