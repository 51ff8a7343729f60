#include <cmath>
#include <map>

#include "dynbif/normalform.hpp"

namespace dynbif {

namespace {

// jets in (eps, delta = v - v0), graded eps-first
struct Grading {
  int m, s;
  std::vector<MultiIndex> deltas;  // |a| <= s, by degree
  std::map<MultiIndex, int> pos;

  Grading(int m_, int s_) : m(m_), s(s_) {
    for (int k = 0; k <= s; ++k)
      for (auto& a : multi_indices_of_order(m, k)) {
        pos[a] = static_cast<int>(deltas.size());
        deltas.push_back(a);
      }
  }
  int size() const { return (s + 1) * static_cast<int>(deltas.size()); }
  int idx(int e, int a) const { return e * static_cast<int>(deltas.size()) + a; }
  int find(const MultiIndex& a) const {
    auto it = pos.find(a);
    return it == pos.end() ? -1 : it->second;
  }
};

template <class T>
T binom(int n, int k) {
  T r = 1;
  for (int i = 1; i <= k; ++i) r = r * T(n - k + i) / T(i);
  return r;
}

// Taylor coefficients of a real polynomial in (eps, v) about v0
template <class T>
std::vector<T> expand(const ScalarPoly& p, const Grading& g, const Vec& v0) {
  std::vector<T> out(g.size(), T(0));
  for (const auto& t : p.terms()) {
    if (t.eps > g.s) continue;
    // enumerate a <= b componentwise
    std::vector<int> a(g.m, 0);
    while (true) {
      MultiIndex ai(a);
      if (ai.order() <= g.s) {
        T c = T(t.c.real());
        for (int l = 0; l < g.m; ++l) {
          c *= binom<T>(t.v[l], a[l]);
          for (int k = 0; k < t.v[l] - a[l]; ++k) c *= T(v0(l));
        }
        out[g.idx(t.eps, g.find(ai))] += c;
      }
      int l = 0;
      while (l < g.m && a[l] == t.v[l]) a[l++] = 0;
      if (l == g.m) break;
      ++a[l];
    }
  }
  return out;
}

}  // namespace

template <class T>
T BlockDiagResult<T>::defect(T eps) const {
  const int d = static_cast<int>(T_eps.at(0).rows());
  M Ts = M::Zero(d, d), Bs = M::Zero(d, d), As = M::Zero(d, d), D = M::Zero(d, d);
  T pw = 1;
  for (int k = 0; k <= s; ++k) {
    Ts += pw * T_eps[k];
    Bs += pw * B_eps[k];
    D += eps * pw * dT_G[k];
    pw *= eps;
  }
  pw = 1;
  for (std::size_t k = 0; k < A_eps.size(); ++k) {
    As += pw * A_eps[k];
    pw *= eps;
  }
  D += Ts * Bs - As * Ts;
  return D.norm();
}

template <class T>
BlockDiagResult<T> eps_block_diagonalize(const std::vector<ScalarPoly>& A, int d,
                                         const std::vector<ScalarPoly>& G, int s, const Vec& v0) {
  using M = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using CM = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, Eigen::Dynamic>;
  require(d >= 1 && static_cast<int>(A.size()) == d * d, "dimension",
          "eps_block_diagonalize: A needs d*d entries");
  require(s >= 0 && s <= 15, "dimension", "eps_block_diagonalize: s out of range");
  const int m = static_cast<int>(v0.size());
  require(static_cast<int>(G.size()) == m, "dimension",
          "eps_block_diagonalize: G needs one component per parameter");
  for (const auto& p : A)
    require(p.shape().ny == 0 && p.shape().nv == m, "poly_shape",
            "eps_block_diagonalize: A entries must be polynomials in (eps, v)");
  for (const auto& p : G)
    require(p.shape().ny == 0 && p.shape().nv == m, "poly_shape",
            "eps_block_diagonalize: G entries must be polynomials in v");

  Grading gr(m, s);
  const int NG = gr.size();
  std::vector<M> Ag(NG, M::Zero(d, d));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      auto c = expand<T>(A[i * d + j], gr, v0);
      for (int g = 0; g < NG; ++g) Ag[g](i, j) = c[g];
    }
  std::vector<std::vector<T>> Gg;
  for (const auto& p : G) Gg.push_back(expand<T>(p, gr, v0));

  // real Jordan basis of A(v0, 0)
  Eigen::EigenSolver<M> es(Ag[0]);
  if (es.info() != Eigen::Success) throw NumericError("eigen", "eigensolver failed");
  CM V = es.eigenvectors();
  auto lam = es.eigenvalues();
  M T00(d, d);
  int col = 0;
  const T tiny = T(1e-12) * std::max<T>(T(1), Ag[0].norm());
  for (int k = 0; k < d && col < d; ++k) {
    if (lam(k).imag() < -tiny) continue;
    Eigen::Matrix<std::complex<T>, Eigen::Dynamic, 1> u = V.col(k);
    int arg = 0;
    for (int i = 1; i < d; ++i)
      if (std::abs(u(i)) > std::abs(u(arg))) arg = i;
    u /= u(arg);
    if (lam(k).imag() > tiny) {
      require(col + 1 < d, "eigen", "unpaired complex eigenvalue");
      T00.col(col++) = u.real();
      T00.col(col++) = -u.imag();
    } else {
      T00.col(col++) = u.real();
    }
  }
  require(col == d, "eigen", "could not assemble a real eigenbasis");
  M T00inv = T00.inverse();
  std::vector<M> Ah(NG);
  for (int g = 0; g < NG; ++g) Ah[g] = T00inv * Ag[g] * T00;

  std::vector<M> Bg(NG, M::Zero(d, d)), Yg(NG, M::Zero(d, d));
  const M& B00 = Ah[0];
  Bg[0] = B00;
  const int nd = static_cast<int>(gr.deltas.size());
  BlockDiagResult<T> res;
  res.v0 = v0;
  res.s = s;
  for (int e = 0; e <= s; ++e)
    for (int ai = 0; ai < nd; ++ai) {
      if (e == 0 && ai == 0) continue;
      const MultiIndex& a = gr.deltas[ai];
      M P = Ah[gr.idx(e, ai)];
      for (int e1 = 0; e1 <= e; ++e1)
        for (int a1 = 0; a1 < nd; ++a1) {
          if (e1 == 0 && a1 == 0) continue;
          const MultiIndex& b = gr.deltas[a1];
          std::vector<int> rest(m);
          bool ok = true;
          for (int l = 0; l < m; ++l) {
            rest[l] = a[l] - b[l];
            ok = ok && rest[l] >= 0;
          }
          if (!ok) continue;
          const int e2 = e - e1, a2 = gr.find(MultiIndex(rest));
          if (e2 == 0 && a2 == 0) continue;
          const int g1 = gr.idx(e1, a1), g2 = gr.idx(e2, a2);
          P += Ah[g1] * Yg[g2] - Yg[g2] * Bg[g1];
        }
      // eps * (dY/ddelta) G
      if (e >= 1)
        for (int l = 0; l < m; ++l)
          for (int e1 = 0; e1 <= e - 1; ++e1)
            for (int a1 = 0; a1 < nd; ++a1) {
              std::vector<int> rest(m);
              bool ok = true;
              for (int k = 0; k < m; ++k) {
                rest[k] = a[k] - gr.deltas[a1][k];
                ok = ok && rest[k] >= 0;
              }
              if (!ok) continue;
              const int a2 = gr.find(MultiIndex(rest));
              const T gcoef = Gg[l][gr.idx(e - 1 - e1, a2)];
              if (gcoef == T(0)) continue;
              std::vector<int> up = gr.deltas[a1].exps();
              up[l] += 1;
              const int au = gr.find(MultiIndex(up));
              if (au < 0) continue;
              P -= T(up[l]) * gcoef * Yg[gr.idx(e1, au)];
            }
      AdSplit<T> sp = ad_solve<T>(B00, P);
      const int g = gr.idx(e, ai);
      Bg[g] = sp.Y0;
      Yg[g] = -sp.X;
    }

  const M I = M::Identity(d, d);
  for (int k = 0; k <= s; ++k) {
    res.T_eps.push_back(T00 * ((k == 0 ? I : M::Zero(d, d)) + Yg[gr.idx(k, 0)]));
    res.B_eps.push_back(Bg[gr.idx(k, 0)]);
    res.A_eps.push_back(Ag[gr.idx(k, 0)]);
    M dtg = M::Zero(d, d);
    for (int l = 0; l < m; ++l) {
      const int al = gr.find(MultiIndex::unit(m, l));
      if (al < 0) continue;
      for (int e1 = 0; e1 <= k; ++e1) {
        const T gc = Gg[l][gr.idx(k - e1, 0)];
        if (gc != T(0)) dtg += gc * (T00 * Yg[gr.idx(e1, al)]);
      }
    }
    res.dT_G.push_back(dtg);
    double cm = static_cast<double>((res.B_eps[k] * B00 - B00 * res.B_eps[k]).norm());
    res.commutator = std::max(res.commutator, cm);
  }
  return res;
}

template struct BlockDiagResult<double>;
template struct BlockDiagResult<long double>;
template BlockDiagResult<double> eps_block_diagonalize<double>(const std::vector<ScalarPoly>&,
                                                               int,
                                                               const std::vector<ScalarPoly>&,
                                                               int, const Vec&);
template BlockDiagResult<long double> eps_block_diagonalize<long double>(
    const std::vector<ScalarPoly>&, int, const std::vector<ScalarPoly>&, int, const Vec&);

}  // namespace dynbif
