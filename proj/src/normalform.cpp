#include "dynbif/normalform.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "dynbif/sampling.hpp"

namespace dynbif {

namespace {

std::string vec_str(const Vec& v) {
  std::ostringstream os;
  os.precision(6);
  os << "(";
  for (int i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i);
  os << ")";
  return os.str();
}

// polynomial in v only, taken from the (q, j) coefficient of p
ScalarPoly extract_vpoly(const ScalarPoly& p, const MultiIndex& q, int j, const PolyShape& vs) {
  ScalarPoly out(vs);
  for (const auto& t : p.terms())
    if (t.y == q && t.eps == j) out.add_term(MultiIndex::zero(0), 0, t.v, t.c);
  return out;
}

// y-free polynomial in (eps, v) lifted into `target`
ScalarPoly lift_y_free(const ScalarPoly& p, const PolyShape& target) {
  ScalarPoly out(target);
  for (const auto& t : p.terms()) {
    if (t.y.order() != 0) throw ValidationError("poly_shape", "expected a y-free polynomial");
    out.add_term(MultiIndex::zero(target.ny), t.eps, t.v, t.c);
  }
  return out;
}

std::vector<Vec> parameter_samples(int m, double R, int budget) {
  std::vector<Vec> pts;
  pts.push_back(Vec::Zero(m));
  for (auto& p : sobol_ball(m, R, budget)) pts.push_back(p);
  for (auto& p : sobol_sphere(m, R, std::max(8, budget / 16))) pts.push_back(p);
  return pts;
}

bool is_resonant(const ResonanceStructure& rs, const MultiIndex& q, int i) {
  // i is 0 for the slow equation, 1..2n for the fast one
  std::vector<int> Iq = rs.apply_I(q);
  if (i >= 1) {
    if (i <= rs.n)
      Iq[i - 1] -= 1;
    else
      Iq[i - 1 - rs.n] += 1;
  }
  return std::all_of(Iq.begin(), Iq.end(), [](int x) { return x == 0; });
}

}  // namespace

void Radii::validate() const {
  require(R0 > 0 && R0 < Rstar && Rstar < Rstar_up, "radii",
          "radii must satisfy 0 < R0 < R_* < R^*");
}

// ---------------------------------------------------------------- TaylorModel

Vec TaylorModel::omega_at(const Vec& v) const {
  Vec w(n);
  for (int j = 0; j < n; ++j) w(j) = omega[j].eval_real(nullptr, 0.0, v.data());
  return w;
}

bool TaylorModel::operator==(const TaylorModel& o) const {
  return n == o.n && m == o.m && N == o.N && s == o.s && dv == o.dv && radii == o.radii &&
         fast == o.fast && slow == o.slow && omega == o.omega;
}

void TaylorModel::validate(int sample_budget) const {
  require(n >= 1 && m >= 1, "model", "dimensions must be positive");
  require(N >= 3, "model", "truncation order N must be at least 3");
  require(s >= 1, "model", "eps order s must be at least 1");
  radii.validate();
  require(static_cast<int>(fast.size()) == 2 * n, "model", "fast field needs 2n components");
  require(static_cast<int>(slow.size()) == m, "model", "slow field needs m components");
  require(static_cast<int>(omega.size()) == n, "model", "omega needs n components");
  for (const auto& p : fast) require(p.shape() == shape(), "model", "fast component shape");
  for (const auto& p : slow) require(p.shape() == shape(), "model", "slow component shape");
  for (const auto& p : omega) require(p.shape() == omega_shape(), "model", "omega shape");
  auto real_check = [](const ScalarPoly& p) {
    for (const auto& e : p.entries())
      require(e.second.imag() == 0.0, "model", "model coefficients must be real");
  };
  for (const auto& p : fast) real_check(p);
  for (const auto& p : slow) real_check(p);
  for (const auto& p : omega) real_check(p);
  for (const auto& p : fast)
    for (const auto& e : p.entries())
      require(p.key_ydeg(e.first) > 0, "C2", "fast field has a constant term (f(0,u,eps) != 0)");

  // F_1 block structure
  const PolyShape vs{0, m, 0, 0, dv};
  const double tol = 1e-12;
  for (int i = 0; i < 2 * n; ++i) {
    for (int k = 0; k < 2 * n; ++k) {
      if (i / 2 == k / 2) continue;
      for (int e = 0; e <= s; ++e)
        require(extract_vpoly(fast[i], MultiIndex::unit(2 * n, k), e, vs).max_abs() <= tol,
                "block_form", "F_1 is not block diagonal; apply eps_block_diagonalize first");
    }
  }
  for (int j = 0; j < n; ++j) {
    const int a = 2 * j, b = 2 * j + 1;
    for (int e = 0; e <= s; ++e) {
      auto faa = extract_vpoly(fast[a], MultiIndex::unit(2 * n, a), e, vs);
      auto fab = extract_vpoly(fast[a], MultiIndex::unit(2 * n, b), e, vs);
      auto fba = extract_vpoly(fast[b], MultiIndex::unit(2 * n, a), e, vs);
      auto fbb = extract_vpoly(fast[b], MultiIndex::unit(2 * n, b), e, vs);
      require((faa - fbb).max_abs() <= tol && (fab + fba).max_abs() <= tol, "block_form",
              "F_1 blocks must have the rotation form [[a,-w],[w,a]]");
      if (e == 0) {
        require(faa.max_abs() <= tol, "C3",
                "F_1(u,0) must have purely imaginary eigenvalues (nonzero real part found)");
        require((fba - omega[j]).max_abs() <= tol, "block_form",
                "F_1(u,0) rotation block does not match omega_j");
      }
    }
  }
  for (const Vec& v : parameter_samples(m, radii.Rstar_up, sample_budget)) {
    Vec w = omega_at(v);
    for (int j = 0; j < n; ++j) {
      require(w(j) > 0, "C3", "omega_j(v) must be positive; fails at v = " + vec_str(v));
      for (int k = j + 1; k < n; ++k)
        require(std::abs(w(j) - w(k)) > 0, "C3",
                "frequencies must be separated; fails at v = " + vec_str(v));
    }
  }
}

// ------------------------------------------------------------ NormalFormResult

static ScalarPoly coeff_of(const std::vector<ScalarPoly>& P, int comp, const MultiIndex& q,
                           int j, int m, int dv) {
  return extract_vpoly(P.at(comp), q, j, PolyShape{0, m, 0, 0, dv});
}

ScalarPoly NormalFormResult::H_coeff(int i, const MultiIndex& q, int j) const {
  return coeff_of(H, i, q, j, m, shape.max_v);
}
ScalarPoly NormalFormResult::X_coeff(int i, const MultiIndex& q, int j) const {
  return coeff_of(X, i, q, j, m, shape.max_v);
}
ScalarPoly NormalFormResult::C_coeff(int l, const MultiIndex& q, int j) const {
  return coeff_of(C, l, q, j, m, shape.max_v);
}
ScalarPoly NormalFormResult::U_coeff(int l, const MultiIndex& q, int j) const {
  return coeff_of(U, l, q, j, m, shape.max_v);
}

namespace {

struct Solver {
  const TaylorModel& model;
  ResonanceStructure rs;
  NormalFormResult& nf;
  std::vector<ScalarPoly> omegaW;  // omega lifted into the w-shape
  std::map<std::vector<int>, ScalarPoly> recip_cache;

  Solver(const TaylorModel& mdl, const ResonanceStructure& r, NormalFormResult& out)
      : model(mdl), rs(r), nf(out) {
    for (const auto& p : model.omega) omegaW.push_back(lift_y_free(p, nf.shape));
  }

  // 1 / (i <omega(v), a>) as a series in v
  const ScalarPoly& recip(const std::vector<int>& a) {
    auto it = recip_cache.find(a);
    if (it != recip_cache.end()) return it->second;
    ScalarPoly lam(nf.shape);
    for (int j = 0; j < model.n; ++j)
      if (a[j]) lam += omegaW[j] * Complex(0.0, double(a[j]));
    return recip_cache.emplace(a, series_reciprocal(lam)).first->second;
  }

  PolyShape capped(int k) const {
    PolyShape s = nf.shape;
    s.max_y = k;
    return s;
  }
  ScalarPoly cap(const ScalarPoly& p, int k) const {
    return p.with_caps(k, nf.shape.max_eps, nf.shape.max_v);
  }

  void substitutes(int k, std::vector<ScalarPoly>& Y, std::vector<ScalarPoly>& V,
                   std::vector<ScalarPoly>& h, std::vector<ScalarPoly>& c) const {
    const PolyShape sk = capped(k);
    const int d = 2 * nf.n;
    Y.assign(d, ScalarPoly(sk));
    h.assign(d, ScalarPoly(sk));
    V.assign(nf.m, ScalarPoly(sk));
    c.assign(nf.m, ScalarPoly(sk));
    for (int i = 0; i < d; ++i) {
      ScalarPoly wi = ScalarPoly::y_var(sk, i);
      Y[i] = wi + cap(nf.X[i], k);
      h[i] = cap(nf.J[i], k) * wi + cap(nf.H[i], k);
    }
    for (int l = 0; l < nf.m; ++l) {
      V[l] = ScalarPoly::v_var(sk, l) + cap(nf.U[l], k).shift_eps(1);
      c[l] = cap(nf.C[l], k);
    }
  }

  // (I + X_w) h + eps X_v c - fhat(w + X, v + eps U), truncated at degree k
  std::vector<ScalarPoly> residual_fast(int k) const {
    std::vector<ScalarPoly> Y, V, h, c;
    substitutes(k, Y, V, h, c);
    const PolyShape sk = capped(k);
    std::vector<ScalarPoly> E;
    for (int i = 0; i < 2 * nf.n; ++i) {
      ScalarPoly Xi = cap(nf.X[i], k);
      ScalarPoly e = h[i] - cap(nf.fhat[i], k).compose(&Y, &V, sk);
      for (int a = 0; a < 2 * nf.n; ++a) e += Xi.derivative_y(a) * h[a];
      for (int l = 0; l < nf.m; ++l) e += (Xi.derivative_v(l) * c[l]).shift_eps(1);
      E.push_back(e.y_degree_slice(k));
    }
    return E;
  }

  // c + U_w h + eps U_v c - ghat(w + X, v + eps U)
  std::vector<ScalarPoly> residual_slow(int k) const {
    std::vector<ScalarPoly> Y, V, h, c;
    substitutes(k, Y, V, h, c);
    const PolyShape sk = capped(k);
    std::vector<ScalarPoly> E;
    for (int l = 0; l < nf.m; ++l) {
      ScalarPoly Ul = cap(nf.U[l], k);
      ScalarPoly e = c[l] - cap(nf.ghat[l], k).compose(&Y, &V, sk);
      for (int a = 0; a < 2 * nf.n; ++a) e += Ul.derivative_y(a) * h[a];
      for (int p = 0; p < nf.m; ++p) e += (Ul.derivative_v(p) * c[p]).shift_eps(1);
      E.push_back(e.y_degree_slice(k));
    }
    return E;
  }

  // split the (k, j) slice of a residual into resonant / non-resonant parts;
  // `op` is 1..2n for the fast equation (i = op) and 0 for the slow one.
  void distribute(const ScalarPoly& Ek, int j, int op, ScalarPoly& Hout, ScalarPoly& Xout) {
    ScalarPoly slice = Ek.eps_slice(j).with_caps(nf.shape.max_y, nf.shape.max_eps,
                                                 nf.shape.max_v);
    const auto& ent = slice.entries();
    std::vector<int> y(2 * nf.n), vv(nf.m);
    std::size_t a = 0;
    while (a < ent.size()) {
      auto yk = slice.key_y_part(ent[a].first);
      ScalarPoly Rq(nf.shape);
      std::vector<ScalarPoly::Entry> group;
      std::size_t b = a;
      while (b < ent.size() && slice.key_y_part(ent[b].first) == yk) ++b;
      int e = 0;
      slice.decode(ent[a].first, y.data(), &e, vv.data());
      MultiIndex q(y);
      for (std::size_t t = a; t < b; ++t) {
        slice.decode(ent[t].first, y.data(), &e, vv.data());
        Rq.add_term(q, e, MultiIndex(vv), ent[t].second);
      }
      a = b;
      if (is_resonant(rs, q, op)) {
        Hout -= Rq;
      } else {
        std::vector<int> Iq = rs.apply_I(q);
        if (op >= 1) {
          if (op <= rs.n)
            Iq[op - 1] -= 1;
          else
            Iq[op - 1 - rs.n] += 1;
        }
        Xout -= Rq * recip(Iq);
      }
    }
  }
};

}  // namespace

NormalFormResult solve_normal_form(const TaylorModel& model, const ResonanceStructure& rs,
                                   int sample_budget) {
  model.validate();
  require(rs.n == model.n, "resonance_structure", "resonance structure n differs from the model");
  require(rs.N == model.N, "resonance_structure", "resonance structure N differs from the model");

  // sampled membership in A(N, nu)
  auto omega_fn = [&](const Vec& v) { return model.omega_at(v); };
  double margin = std::numeric_limits<double>::infinity();
  for (const Vec& v : parameter_samples(model.m, model.radii.Rstar_up, sample_budget)) {
    ResonanceCheck rc = resonance_member(omega_fn, rs, v);
    margin = std::min(margin, rc.margin);
    if (!rc.all)
      throw NumericError("resonance_violation",
                         "resonance margin " + std::to_string(rc.margin) + " <= nu at v = " +
                             vec_str(v) + " for i = " + std::to_string(rc.worst_i) +
                             ", q = " + rc.worst_q.str());
  }

  NormalFormResult nf;
  nf.n = model.n;
  nf.m = model.m;
  nf.N = model.N;
  nf.s = model.s;
  nf.shape = model.shape();
  nf.basis = BasisChange::standard(model.n);
  nf.resonance_margin = margin;
  const int d = 2 * nf.n;
  const PolyShape W = nf.shape;

  // model in w-coordinates
  std::vector<ScalarPoly> xsub(d, ScalarPoly(W));
  for (int k = 0; k < d; ++k)
    for (int j = 0; j < d; ++j)
      if (nf.basis.S(k, j) != Complex(0)) xsub[k] += ScalarPoly::y_var(W, j) * nf.basis.S(k, j);
  std::vector<ScalarPoly> fx(d, ScalarPoly(W));
  for (int k = 0; k < d; ++k) fx[k] = model.fast[k].compose(&xsub, nullptr, W);
  nf.fhat.assign(d, ScalarPoly(W));
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k)
      if (nf.basis.S_inv(i, k) != Complex(0)) nf.fhat[i] += fx[k] * nf.basis.S_inv(i, k);
  for (int l = 0; l < nf.m; ++l) nf.ghat.push_back(model.slow[l].compose(&xsub, nullptr, W));

  // diagonal linear part
  const double tol = 1e-12;
  nf.J.assign(d, ScalarPoly(W));
  for (int i = 0; i < d; ++i) {
    ScalarPoly lin = nf.fhat[i].y_degree_slice(1);
    for (const auto& t : lin.terms()) {
      int idx = std::find(t.y.exps().begin(), t.y.exps().end(), 1) - t.y.exps().begin();
      if (idx == i)
        nf.J[i].add_term(MultiIndex::zero(d), t.eps, t.v, t.c);
      else if (std::abs(t.c) > tol)
        throw ValidationError("block_form", "linear part is not diagonal in the basis forms");
    }
  }
  nf.H.assign(d, ScalarPoly(W));
  nf.X.assign(d, ScalarPoly(W));
  nf.U.assign(nf.m, ScalarPoly(W));
  nf.C.assign(nf.m, ScalarPoly(W));
  for (int l = 0; l < nf.m; ++l) nf.C[l] = nf.ghat[l].y_degree_slice(0);

  Solver sv(model, rs, nf);
  for (int k = 1; k <= nf.N; ++k) {
    if (k >= 2) {
      for (int j = 0; j <= nf.s; ++j) {
        auto E = sv.residual_fast(k);
        for (int i = 0; i < d; ++i) sv.distribute(E[i], j, i + 1, nf.H[i], nf.X[i]);
      }
    }
    for (int j = 0; j <= nf.s - 1; ++j) {
      auto E = sv.residual_slow(k);
      for (int l = 0; l < nf.m; ++l) sv.distribute(E[l], j, 0, nf.C[l], nf.U[l]);
    }
  }

  // conjugate symmetry of the resonant part
  double scale = 1.0, asym = 0.0;
  for (int i = 0; i < nf.n; ++i) {
    scale = std::max(scale, nf.H[i].max_abs());
    for (const auto& t : nf.H[i].terms()) {
      std::vector<int> qb(d);
      for (int a = 0; a < nf.n; ++a) {
        qb[a] = t.y[a + nf.n];
        qb[a + nf.n] = t.y[a];
      }
      asym = std::max(asym, std::abs(nf.H[i + nf.n].coeff(MultiIndex(qb), t.eps, t.v) -
                                     std::conj(t.c)));
    }
  }
  if (asym > 1e-10 * scale)
    throw NumericError("internal", "normal form lost conjugate symmetry (" +
                                       std::to_string(asym) + ")");
  return nf;
}

TransformedSystem transform_system(const NormalFormResult& nf) {
  const PolyShape W = nf.shape;
  const int d = 2 * nf.n;
  std::vector<ScalarPoly> Y(d, ScalarPoly(W)), V(nf.m, ScalarPoly(W));
  for (int i = 0; i < d; ++i) Y[i] = ScalarPoly::y_var(W, i) + nf.X[i];
  for (int l = 0; l < nf.m; ++l) V[l] = ScalarPoly::v_var(W, l) + nf.U[l].shift_eps(1);
  std::vector<ScalarPoly> Fs, Gs;
  for (int i = 0; i < d; ++i) Fs.push_back(nf.fhat[i].compose(&Y, &V, W));
  for (int l = 0; l < nf.m; ++l) Gs.push_back(nf.ghat[l].compose(&Y, &V, W));
  std::vector<std::vector<ScalarPoly>> Xw(d), Xv(d), Uw(nf.m), Uv(nf.m);
  for (int i = 0; i < d; ++i) {
    for (int a = 0; a < d; ++a) Xw[i].push_back(nf.X[i].derivative_y(a));
    for (int l = 0; l < nf.m; ++l) Xv[i].push_back(nf.X[i].derivative_v(l).shift_eps(1));
  }
  for (int l = 0; l < nf.m; ++l) {
    for (int a = 0; a < d; ++a) Uw[l].push_back(nf.U[l].derivative_y(a));
    for (int p = 0; p < nf.m; ++p) Uv[l].push_back(nf.U[l].derivative_v(p).shift_eps(1));
  }
  TransformedSystem ts{Fs, Gs};
  const int iters = nf.N + nf.s + 3;
  for (int it = 0; it < iters; ++it) {
    std::vector<ScalarPoly> hn(Fs), cn(Gs);
    for (int i = 0; i < d; ++i) {
      for (int a = 0; a < d; ++a) hn[i] -= Xw[i][a] * ts.hT[a];
      for (int l = 0; l < nf.m; ++l) hn[i] -= Xv[i][l] * ts.cT[l];
    }
    for (int l = 0; l < nf.m; ++l) {
      for (int a = 0; a < d; ++a) cn[l] -= Uw[l][a] * ts.hT[a];
      for (int p = 0; p < nf.m; ++p) cn[l] -= Uv[l][p] * ts.cT[p];
    }
    ts.hT = std::move(hn);
    ts.cT = std::move(cn);
  }
  return ts;
}

double NormalFormCheck::worst() const {
  return std::max({fast_nonresonant, fast_resonant, slow_nonresonant, slow_resonant});
}

NormalFormCheck check_normal_form(const NormalFormResult& nf, const TransformedSystem& ts) {
  NormalFormCheck out;
  ResonanceStructure rs(nf.n, nf.N, 1.0);
  const int d = 2 * nf.n;
  for (int i = 0; i < d; ++i) {
    ScalarPoly diff = ts.hT[i] - nf.H[i];
    ScalarPoly lin = nf.J[i] * ScalarPoly::y_var(nf.shape, i);
    diff -= lin;
    for (const auto& t : diff.terms()) {
      const int k = t.y.order();
      if (k < 2 || k > nf.N || t.eps > nf.s) continue;
      double a = std::abs(t.c);
      if (is_resonant(rs, t.y, i + 1))
        out.fast_resonant = std::max(out.fast_resonant, a);
      else
        out.fast_nonresonant = std::max(out.fast_nonresonant, a);
    }
    out.checked += static_cast<int>(ts.hT[i].size());
  }
  for (int l = 0; l < nf.m; ++l) {
    ScalarPoly diff = ts.cT[l] - nf.C[l];
    for (const auto& t : diff.terms()) {
      if (t.y.order() > nf.N || t.eps > nf.s - 1) continue;
      double a = std::abs(t.c);
      if (is_resonant(rs, t.y, 0))
        out.slow_resonant = std::max(out.slow_resonant, a);
      else
        out.slow_nonresonant = std::max(out.slow_nonresonant, a);
    }
    out.checked += static_cast<int>(ts.cT[l].size());
  }
  return out;
}

// -------------------------------------------------------------- remainders

TrigRemainder::TrigRemainder(int n, int m, std::vector<TrigTerm> terms)
    : n_(n), m_(m), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    require(static_cast<int>(t.r_pow.size()) == n && static_cast<int>(t.v_pow.size()) == m &&
                static_cast<int>(t.k.size()) == n,
            "remainder", "trig term dimensions do not match the model");
    const int lim = t.target == TrigTerm::Z ? m : n;
    require(t.comp >= 0 && t.comp < lim, "remainder", "trig term component out of range");
  }
}

void TrigRemainder::eval(const double* r, const double* v, const double* phi, double eps,
                         double* R, double* Phi, double* Z) const {
  (void)eps;
  for (int j = 0; j < n_; ++j) R[j] = Phi[j] = 0;
  for (int l = 0; l < m_; ++l) Z[l] = 0;
  for (const auto& t : terms_) {
    double arg = 0;
    for (int j = 0; j < n_; ++j) arg += t.k[j] * phi[j];
    double val = t.coef * (t.is_sin ? std::sin(arg) : std::cos(arg));
    for (int j = 0; j < n_; ++j)
      for (int a = 0; a < t.r_pow[j]; ++a) val *= r[j];
    for (int l = 0; l < m_; ++l)
      for (int a = 0; a < t.v_pow[l]; ++a) val *= v[l];
    if (t.sqrt_r) val *= std::sqrt(std::max(r[t.comp], 0.0));
    switch (t.target) {
      case TrigTerm::R: R[t.comp] += val; break;
      case TrigTerm::Phi: Phi[t.comp] += val; break;
      case TrigTerm::Z: Z[t.comp] += val; break;
    }
  }
}

NormalFormRemainder::NormalFormRemainder(std::shared_ptr<const TaylorModel> model,
                                         std::shared_ptr<const NormalFormResult> nf)
    : model_(std::move(model)), nf_(std::move(nf)) {
  const int d = 2 * nf_->n;
  for (int i = 0; i < d; ++i) {
    std::vector<ScalarPoly> row;
    for (int a = 0; a < d; ++a) row.push_back(nf_->X[i].derivative_y(a));
    for (int l = 0; l < nf_->m; ++l) row.push_back(nf_->X[i].derivative_v(l));
    dX_.push_back(row);
  }
  for (int l = 0; l < nf_->m; ++l) {
    std::vector<ScalarPoly> row;
    for (int a = 0; a < d; ++a) row.push_back(nf_->U[l].derivative_y(a));
    for (int p = 0; p < nf_->m; ++p) row.push_back(nf_->U[l].derivative_v(p));
    dU_.push_back(row);
  }
}

void NormalFormRemainder::eval(const double* r, const double* v, const double* phi, double eps,
                               double* R, double* Phi, double* Z) const {
  const NormalFormResult& nf = *nf_;
  const int n = nf.n, m = nf.m, d = 2 * n;
  std::vector<Complex> w(d), vc(m), xh(d), u(m);
  for (int j = 0; j < n; ++j) {
    w[j] = std::polar(std::sqrt(eps * std::max(r[j], 0.0)), phi[j]);
    w[j + n] = std::conj(w[j]);
  }
  for (int l = 0; l < m; ++l) vc[l] = v[l];
  const Complex ec(eps);
  for (int i = 0; i < d; ++i) xh[i] = w[i] + nf.X[i].eval(w.data(), ec, vc.data());
  for (int l = 0; l < m; ++l) u[l] = vc[l] + ec * nf.U[l].eval(w.data(), ec, vc.data());
  CMat M = CMat::Identity(d + m, d + m);
  CVec rhs(d + m);
  for (int i = 0; i < d; ++i) {
    for (int a = 0; a < d + m; ++a) M(i, a) += dX_[i][a].eval(w.data(), ec, vc.data());
    rhs(i) = nf.fhat[i].eval(xh.data(), ec, u.data());
  }
  for (int l = 0; l < m; ++l) {
    for (int a = 0; a < d + m; ++a) M(d + l, a) += ec * dU_[l][a].eval(w.data(), ec, vc.data());
    rhs(d + l) = ec * nf.ghat[l].eval(xh.data(), ec, u.data());
  }
  CVec sol = M.partialPivLu().solve(rhs);
  const double pw = std::pow(eps, 0.5 * (nf.N + 1));
  for (int j = 0; j < n; ++j) {
    Complex jet = nf.J[j].eval(w.data(), ec, vc.data()) * w[j] + nf.H[j].eval(w.data(), ec, vc.data());
    Complex dw = (sol(j) - jet) * std::polar(1.0, -phi[j]);
    R[j] = 2.0 * dw.real() / pw;
    Phi[j] = dw.imag() / pw;
  }
  for (int l = 0; l < m; ++l) {
    Complex jet = ec * nf.C[l].eval(w.data(), ec, vc.data());
    Z[l] = (sol(d + l) - jet).real() / (pw * eps);
  }
}

// ------------------------------------------------------------- PolarModel

Vec PolarModel::alpha_at(const Vec& v) const {
  Vec a(n);
  for (int j = 0; j < n; ++j) a(j) = alpha[j].eval_real(nullptr, 0.0, v.data());
  return a;
}
Vec PolarModel::omega_at(const Vec& v) const {
  Vec a(n);
  for (int j = 0; j < n; ++j) a(j) = omega[j].eval_real(nullptr, 0.0, v.data());
  return a;
}
Vec PolarModel::c_at(const Vec& v) const {
  Vec a(m);
  for (int l = 0; l < m; ++l) a(l) = c[l].eval_real(nullptr, 0.0, v.data());
  return a;
}
Mat PolarModel::A_at(const Vec& v) const {
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = A[i * n + j].eval_real(nullptr, 0.0, v.data());
  return a;
}
Vec PolarModel::B_at(const Vec& r, const Vec& v, double eps) const {
  Vec a(n);
  for (int j = 0; j < n; ++j) a(j) = B[j].eval_real(r.data(), eps, v.data());
  return a;
}
Vec PolarModel::W_at(const Vec& r, const Vec& v, double eps) const {
  Vec a(m);
  for (int l = 0; l < m; ++l) a(l) = W[l].eval_real(r.data(), eps, v.data());
  return a;
}
Vec PolarModel::Psi_at(const Vec& r, const Vec& v, double eps) const {
  Vec a(n);
  for (int j = 0; j < n; ++j) a(j) = Psi[j].eval_real(r.data(), eps, v.data());
  return a;
}

void PolarModel::remainders(const Vec& r, const Vec& v, const Vec& phi, double eps, Vec& R,
                            Vec& Phi, Vec& Z) const {
  R.setZero(n);
  Phi.setZero(n);
  Z.setZero(m);
  if (!remainder) return;
  Vec rp(n);
  for (int j = 0; j < n; ++j) rp(j) = r_scale[j] * r(j);
  remainder->eval(rp.data(), v.data(), phi.data(), eps, R.data(), Phi.data(), Z.data());
  for (int j = 0; j < n; ++j) {
    const double s = std::sqrt(r_scale[j]);
    R(j) /= s;
    Phi(j) /= s;
  }
}

Vec PolarModel::r_star() const {
  Vec v0 = Vec::Zero(m);
  Mat A0 = A_at(v0);
  Eigen::FullPivLU<Mat> lu(A0);
  if (!lu.isInvertible()) throw ValidationError("C7", "A(0) is singular; r* undefined");
  return lu.solve(alpha_at(v0));
}

PolarModel PolarModel::rescaled() const {
  Vec rs = r_star();
  for (int j = 0; j < n; ++j)
    if (!(rs(j) > 0))
      throw ValidationError("C7", "component " + std::to_string(j + 1) +
                                      " of r* = A(0)^{-1} alpha(0) is not positive");
  PolarModel out = *this;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.A[i * n + j] = A[i * n + j] * Complex(rs(j));
  const PolyShape S = r_shape();
  std::vector<ScalarPoly> sub;
  for (int j = 0; j < n; ++j) sub.push_back(ScalarPoly::y_var(S, j) * Complex(rs(j)));
  for (int j = 0; j < n; ++j) {
    out.B[j] = B[j].compose(&sub, nullptr, S);
    out.Psi[j] = Psi[j].compose(&sub, nullptr, S);
  }
  for (int l = 0; l < m; ++l) out.W[l] = W[l].compose(&sub, nullptr, S);
  for (int j = 0; j < n; ++j) out.r_scale[j] = r_scale[j] * rs(j);
  return out;
}

void PolarModel::validate() const {
  require(n >= 1 && m >= 1, "polar_model", "dimensions must be positive");
  radii.validate();
  require(eps0 > 0 && eps0 < 1, "polar_model", "eps0 must lie in (0,1)");
  require(rho > 0, "polar_model", "rho must be positive");
  require(static_cast<int>(r_scale.size()) == n, "polar_model", "r_scale needs n entries");
  for (double s : r_scale) require(s > 0, "polar_model", "r_scale entries must be positive");
  auto chk = [&](const std::vector<ScalarPoly>& ps, std::size_t cnt, const PolyShape& sh,
                 const char* name) {
    require(ps.size() == cnt, "polar_model", std::string(name) + ": wrong component count");
    for (const auto& p : ps)
      require(p.shape() == sh, "polar_model", std::string(name) + ": wrong polynomial shape");
  };
  chk(alpha, n, v_shape(), "alpha");
  chk(omega, n, v_shape(), "omega");
  chk(c, m, v_shape(), "c");
  chk(A, n * n, v_shape(), "A");
  chk(B, n, r_shape(), "B");
  chk(W, m, r_shape(), "W");
  chk(Psi, n, r_shape(), "Psi");
}

PolarModel to_polar(std::shared_ptr<const NormalFormResult> nfp,
                    std::shared_ptr<const TaylorModel> model, double eps0, double rho,
                    bool rescale) {
  const NormalFormResult& nf = *nfp;
  require(nf.s == (nf.N + 1) / 2, "to_polar", "polar reduction needs s = (N+1)/2");
  PolarModel pm;
  pm.n = nf.n;
  pm.m = nf.m;
  pm.N = nf.N;
  pm.s = nf.s;
  pm.dv = nf.shape.max_v;
  pm.eps0 = eps0;
  pm.rho = rho;
  pm.radii = model->radii;
  pm.r_scale.assign(pm.n, 1.0);
  const PolyShape vs = pm.v_shape(), rsh = pm.r_shape();
  const int n = pm.n, m = pm.m;
  pm.alpha.assign(n, ScalarPoly(vs));
  pm.omega.assign(n, ScalarPoly(vs));
  pm.c.assign(m, ScalarPoly(vs));
  pm.A.assign(n * n, ScalarPoly(vs));
  pm.B.assign(n, ScalarPoly(rsh));
  pm.W.assign(m, ScalarPoly(rsh));
  pm.Psi.assign(n, ScalarPoly(rsh));
  const MultiIndex r0 = MultiIndex::zero(n);
  const MultiIndex none = MultiIndex::zero(0);
  const double tol = 1e-12;

  for (int j = 0; j < n; ++j) {
    for (const auto& t : nf.J[j].terms()) {
      const double a = t.c.real(), b = t.c.imag();
      if (t.eps == 0) {
        if (std::abs(a) > tol)
          throw ValidationError("C3", "linear part has a nonzero real part at eps = 0");
        pm.omega[j].add_term(none, 0, t.v, b);
      } else {
        if (t.eps == 1)
          pm.alpha[j].add_term(none, 0, t.v, a);
        else
          pm.B[j].add_term(r0, t.eps - 2, t.v, a);
        pm.Psi[j].add_term(r0, t.eps - 1, t.v, b);
      }
    }
    for (const auto& t : nf.H[j].terms()) {
      std::vector<int> p(n);
      for (int k = 0; k < n; ++k) p[k] = t.y[k + n];
      MultiIndex pm_idx(p);
      const int P = pm_idx.order();
      const double a = t.c.real(), b = t.c.imag();
      if (P == 1 && t.eps == 0) {
        int col = std::find(p.begin(), p.end(), 1) - p.begin();
        pm.A[j * n + col].add_term(none, 0, t.v, -a);
      } else if (P == 1) {
        pm.B[j].add_term(pm_idx, t.eps - 1, t.v, a);
      } else {
        pm.B[j].add_term(pm_idx, P - 2 + t.eps, t.v, a);
      }
      pm.Psi[j].add_term(pm_idx, P - 1 + t.eps, t.v, b);
    }
  }
  for (int l = 0; l < m; ++l) {
    for (const auto& t : nf.C[l].terms()) {
      std::vector<int> p(n);
      for (int k = 0; k < n; ++k) p[k] = t.y[k];
      MultiIndex pm_idx(p);
      const int P = pm_idx.order();
      const double a = t.c.real();
      if (P == 0 && t.eps == 0)
        pm.c[l].add_term(none, 0, t.v, a);
      else if (P == 0)
        pm.W[l].add_term(r0, t.eps - 1, t.v, a);
      else
        pm.W[l].add_term(pm_idx, P - 1 + t.eps, t.v, a);
    }
  }
  pm.remainder = std::make_shared<NormalFormRemainder>(model, nfp);
  pm.validate();
  return rescale ? pm.rescaled() : pm;
}

// ------------------------------------------------------------ zone constants

double ZoneConstants::K_upper(int n) const {
  return std::sqrt(static_cast<double>(n)) * (alpha_up + delta) / A_star;
}

ZoneConstants verify_conditions(const PolarModel& pm, int sample_budget) {
  pm.validate();
  const Radii& R = pm.radii;
  const int m = pm.m;
  std::vector<Vec> pts;
  pts.push_back(Vec::Zero(m));
  for (auto& p : sobol_ball(m, R.Rstar_up, sample_budget)) pts.push_back(p);
  const int nsph = std::max(8, sample_budget / 16);
  for (double rad : {R.R0, R.Rstar, R.Rstar_up})
    for (auto& p : sobol_sphere(m, rad, nsph)) pts.push_back(p);

  ZoneConstants zc;
  zc.alpha0 = std::numeric_limits<double>::infinity();
  double max_alpha_s = -std::numeric_limits<double>::infinity();
  zc.A_star = std::numeric_limits<double>::infinity();
  zc.kappa = std::numeric_limits<double>::infinity();
  const double slack = 1e-12;
  for (const Vec& v : pts) {
    const double nv = v.norm();
    Vec a = pm.alpha_at(v);
    if (nv <= R.R0 + slack) zc.alpha0 = std::min(zc.alpha0, a.minCoeff());
    if (nv >= R.Rstar - slack) max_alpha_s = std::max(max_alpha_s, a.maxCoeff());
    zc.alpha_up = std::max(zc.alpha_up, a.norm());
    Mat Av = pm.A_at(v);
    Mat sym = 0.5 * (Av + Av.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
    zc.A_star = std::min(zc.A_star, es.eigenvalues().minCoeff());
    Eigen::JacobiSVD<Mat> svd(Av);
    zc.A_up = std::max(zc.A_up, svd.singularValues()(0));
    if (nv > 0) zc.kappa = std::min(zc.kappa, -pm.c_at(v).dot(v) / (nv * nv));
  }
  zc.alpha_star = -max_alpha_s;
  zc.samples = static_cast<int>(pts.size());
  if (!(zc.alpha0 > 0))
    throw ValidationError("C4", "alpha_0 = " + std::to_string(zc.alpha0) + " is not positive");
  if (!(zc.alpha_star > 0))
    throw ValidationError("C4",
                          "alpha_* = " + std::to_string(zc.alpha_star) + " is not positive");
  if (!(zc.A_star > 0))
    throw ValidationError("C4", "A_* = " + std::to_string(zc.A_star) + " is not positive");
  if (!(zc.kappa > 0))
    throw ValidationError("C6", "<c(v), v> < -kappa |v|^2 fails (kappa = " +
                                    std::to_string(zc.kappa) + ")");
  Vec rs = pm.r_star();
  for (int j = 0; j < pm.n; ++j)
    if (!(rs(j) > 0)) throw ValidationError("C7", "r* has a non-positive component");
  zc.delta = std::min(zc.alpha_star, zc.alpha0) / 4.0;
  const double need = std::max(zc.K_upper(pm.n), 1.0);
  if (!(pm.rho > need))
    throw ValidationError("rho", "rho = " + std::to_string(pm.rho) +
                                     " must exceed max{sqrt(n)(alpha^* + delta)/A_*, 1} = " +
                                     std::to_string(need));
  return zc;
}

PolarBounds polar_bounds(const PolarModel& pm, int sample_budget) {
  PolarBounds pb;
  const int n = pm.n, m = pm.m;
  const int dim = n + m + n + 1;
  Vec R, Phi, Z;
  auto pts = sobol_cube(dim, sample_budget, 1);
  for (const Vec& x : pts) {
    Vec r = pm.rho * x.head(n);
    Vec v = pm.radii.Rstar_up * (2.0 * x.segment(n, m).array() - 1.0).matrix();
    if (v.norm() > pm.radii.Rstar_up) v *= pm.radii.Rstar_up / v.norm();
    Vec phi = 2.0 * M_PI * x.segment(n + m, n);
    double eps = pm.eps0 * x(dim - 1);
    pm.remainders(r, v, phi, eps, R, Phi, Z);
    pb.C0 = std::max({pb.C0, pm.B_at(r, v, eps).norm(), R.norm(), pm.W_at(r, v, eps).norm(),
                      Z.norm()});
    Vec rsmall = 1e-6 * x.head(n);
    pm.remainders(rsmall, v, phi, eps, R, Phi, Z);
    double sr = rsmall.cwiseSqrt().norm();
    if (sr > 0) pb.sqrt_r_ratio = std::max(pb.sqrt_r_ratio, std::max(R.norm(), Phi.norm()) / sr);
  }
  return pb;
}

}  // namespace dynbif
