#include <doctest.h>

#include <cmath>
#include <set>

#include "dynbif/polyalg.hpp"
#include "dynbif/sampling.hpp"

using namespace dynbif;

namespace {

MultiIndex mi(std::vector<int> e) { return MultiIndex(std::move(e)); }

// brute-force min |<omega, I q>| and |<omega, I(q - e_i)>| over 2 <= |q| <= N, nonzero cases
double brute_margin(const Vec& om, int N) {
  const int n = static_cast<int>(om.size());
  double best = INFINITY;
  std::vector<int> q(2 * n, 0);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == 2 * n) {
      int ord = 0;
      for (int x : q) ord += x;
      if (ord < 2) return;
      for (int i = -1; i < n; ++i) {
        std::vector<int> a(n);
        for (int j = 0; j < n; ++j) a[j] = q[j] - q[j + n] - (j == i ? 1 : 0);
        bool zero = true;
        double s = 0;
        for (int j = 0; j < n; ++j) {
          zero &= a[j] == 0;
          s += om(j) * a[j];
        }
        if (!zero) best = std::min(best, std::abs(s));
      }
      return;
    }
    for (int x = 0; x <= left; ++x) {
      q[pos] = x;
      rec(pos + 1, left - x);
    }
    q[pos] = 0;
  };
  rec(0, N);
  return best;
}

}  // namespace

TEST_CASE("multi-index order is the entry sum and enumeration is complete") {
  auto q = MultiIndex::parse("2.0.1.3");
  CHECK(q.order() == 6);
  CHECK(q.str() == "2.0.1.3");
  CHECK_THROWS_AS(MultiIndex({1, -1}), ValidationError);
  // number of multi-indices of length L and order k is C(k + L - 1, L - 1)
  CHECK(multi_indices_of_order(4, 3).size() == 20);
  std::set<MultiIndex> seen;
  for (const auto& m : multi_indices_of_order(3, 4)) {
    CHECK(m.order() == 4);
    seen.insert(m);
  }
  CHECK(seen.size() == 15);
}

TEST_CASE("basis_form_eval") {
  auto S = BasisChange::standard(1);
  Vec y(2);
  y << 0.7, -0.4;
  CHECK(std::abs(basis_form_eval(S, MultiIndex::zero(2), y) - Complex(1)) < 1e-15);
  Vec e1(2);
  e1 << 1, 0;
  const CVec w = S.S_inv * e1.cast<Complex>();
  CHECK(std::abs(basis_form_eval(S, mi({1, 0}), e1) - w(0)) < 1e-15);

  CounterRng rng(3, 0);
  for (int t = 0; t < 20; ++t) {
    Vec x(2);
    x << rng.normal(), rng.normal();
    const CVec z = S.S_inv * x.cast<Complex>();
    const Complex brute = z(0) * z(0) * z(1);
    CHECK(std::abs(basis_form_eval(S, mi({2, 1}), x) - brute) <= 1e-12 * std::max(1.0, std::abs(brute)));
  }
}

TEST_CASE("basis change invariants") {
  for (int n = 1; n <= 3; ++n) {
    auto b = BasisChange::standard(n);
    CHECK((b.S * b.S_inv - CMat::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff() <= 1e-12);
    for (int j = 0; j < n; ++j)
      CHECK((b.S.col(j + n) - b.S.col(j).conjugate()).cwiseAbs().maxCoeff() == 0.0);
    CHECK_NOTHROW(b.check());
  }
  CMat bad = CMat::Identity(2, 2);
  CHECK_THROWS(BasisChange::from_matrix(bad));
}

TEST_CASE("lie_eigenvalue") {
  ResonanceStructure rs(2, 5, 0.05);
  Vec om(2);
  om << 1, std::sqrt(2.0);
  // multi-indices are ordered (z_1, z_2, zbar_1, zbar_2)
  CHECK(std::abs(lie_eigenvalue(om, rs, mi({1, 1, 0, 0}), 0) - Complex(0, 1 + std::sqrt(2.0))) < 1e-15);
  CHECK(std::abs(lie_eigenvalue(om, rs, mi({1, 0, 0, 1}), 0) - Complex(0, 1 - std::sqrt(2.0))) < 1e-15);
  for (int i = 1; i <= 2; ++i) {
    std::vector<int> e(4, 0);
    e[i - 1] = 1;
    CHECK(lie_eigenvalue(om, rs, mi(e), i) == Complex(0));
  }
  // conjugate equations: q = e_{i+n} gives <omega, I(e_{i+n} - e_i)> = -2 omega_i
  CHECK(std::abs(lie_eigenvalue(om, rs, mi({0, 0, 1, 0}), 1) - Complex(0, -2)) < 1e-15);
}

TEST_CASE("resonance membership against enumeration") {
  auto constant = [](Vec om) { return [om](const Vec&) { return om; }; };
  Vec v = Vec::Zero(1);
  Vec om(2);
  om << 1, std::sqrt(2.0);
  ResonanceStructure rs(2, 5, 0.05);
  auto rc = resonance_member(constant(om), rs, v);
  CHECK(rc.all);
  CHECK(rc.margin == doctest::Approx(brute_margin(om, 5)).epsilon(1e-12));
  CHECK(rc.margin > 0.05);

  Vec om2(2);
  om2 << 1, 2;
  CHECK_FALSE(resonance_member(constant(om2), ResonanceStructure(2, 3, 0.05), v).all);

  ResonanceStructure tight(2, 5, rc.margin * 1.01);
  CHECK_FALSE(resonance_member(constant(om), tight, v).all);
  CHECK_THROWS_AS(ResonanceStructure(2, 2, 0.05), ValidationError);
  CHECK_THROWS_AS(ResonanceStructure(2, 5, 0.0), ValidationError);
}

TEST_CASE("ad_solve") {
  Mat Z(2, 2);
  Z << 0, -1, 1, 0;
  auto id = ad_solve<double>(Z, Mat::Identity(2, 2));
  CHECK((id.Y0 - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(id.X.cwiseAbs().maxCoeff() <= 1e-14);

  Mat Y(2, 2);
  Y << 0, 1, 0, 0;
  auto sp = ad_solve<double>(Z, Y);
  CHECK((Z * sp.X - sp.X * Z - (Y - sp.Y0)).cwiseAbs().maxCoeff() <= 1e-10);
  Eigen::EigenSolver<Mat> es(Z);
  const CMat S = es.eigenvectors(), Si = S.inverse();
  const CMat a = Si * Y.cast<Complex>() * S, b = Si * sp.Y0.cast<Complex>() * S;
  CHECK((a.diagonal() - b.diagonal()).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((Z * sp.Y0 - sp.Y0 * Z).cwiseAbs().maxCoeff() <= 1e-10);

  CounterRng rng(5, 0);
  Mat Z4(4, 4), Wm(4, 4);
  Z4 << 0.1, -1, 0, 0, 1, 0.1, 0, 0, 0, 0, 0, -2, 0, 0, 2, 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) Wm(i, j) = rng.normal();
  auto im = ad_solve<double>(Z4, Mat(Z4 * Wm - Wm * Z4));
  CHECK(im.Y0.cwiseAbs().maxCoeff() <= 1e-10);

  Mat deg = Mat::Identity(2, 2);
  CHECK_THROWS_AS(ad_solve<double>(deg, Y), NumericError);
}

TEST_CASE("polynomial arithmetic") {
  const PolyShape sh{2, 1, 3, 2, 2};
  auto y1 = ScalarPoly::y_var(sh, 0), y2 = ScalarPoly::y_var(sh, 1);
  ScalarPoly zero(sh);
  CHECK((y1 * zero).is_zero());
  CHECK((y1 - y1).is_zero());

  const PolyShape cap1{2, 1, 1, 2, 2};
  auto z1 = ScalarPoly::y_var(cap1, 0);
  CHECK((z1 * z1).is_zero());

  auto p = y1 * y1 * y2;
  auto dp = p.derivative_y(0);
  CHECK(dp == y1 * y2 * Complex(2));
  CHECK(dp.size() == 1);
  CHECK(dp.coeff(mi({1, 1}), 0, mi({0})) == Complex(2));

  // zero coefficients are never stored
  ScalarPoly q(sh);
  q.add_term(mi({1, 0}), 0, mi({0}), 1.0);
  q.add_term(mi({1, 0}), 0, mi({0}), -1.0);
  CHECK(q.is_zero());

  // terms beyond the caps are dropped
  q.add_term(mi({2, 2}), 0, mi({0}), 1.0);
  q.add_term(mi({0, 0}), 3, mi({0}), 1.0);
  CHECK(q.is_zero());

  // composition agrees with pointwise evaluation
  auto v = ScalarPoly::v_var(sh, 0);
  auto f = y1 * y2 + v * y1 * Complex(0.5) + ScalarPoly::constant(sh, 2.0).shift_eps(1);
  std::vector<ScalarPoly> sub{y1 + y2, y1 - y2 * Complex(0.3)};
  auto g = f.compose(&sub, nullptr, sh);
  CounterRng rng(9, 0);
  for (int t = 0; t < 10; ++t) {
    double Y[2] = {0.3 * rng.normal(), 0.3 * rng.normal()}, V[1] = {rng.normal()}, e = 0.01;
    double S[2] = {Y[0] + Y[1], Y[0] - 0.3 * Y[1]};
    CHECK(g.eval_real(Y, e, V) == doctest::Approx(f.eval_real(S, e, V)).epsilon(1e-12));
  }
  CompiledPoly cp(f);
  double Y[2] = {0.2, -0.1}, V[1] = {0.4};
  CHECK(cp(Y, 0.02, V) == doctest::Approx(f.eval_real(Y, 0.02, V)).epsilon(1e-14));
}

TEST_CASE("series reciprocal") {
  const PolyShape sh{0, 1, 0, 3, 4};
  ScalarPoly p = ScalarPoly::constant(sh, 2.0) + ScalarPoly::v_var(sh, 0) * Complex(0.5) +
                 ScalarPoly::constant(sh, 1.0).shift_eps(1);
  auto r = series_reciprocal(p);
  auto one = (p * r).chopped(1e-14);
  CHECK(one == ScalarPoly::constant(sh, 1.0));
  CHECK_THROWS(series_reciprocal(ScalarPoly::v_var(sh, 0)));
}
