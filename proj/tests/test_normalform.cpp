#include <doctest.h>

#include <cmath>

#include "dynbif/demo.hpp"
#include "dynbif/sampling.hpp"

using namespace dynbif;

namespace {

MultiIndex mi(std::vector<int> e) { return MultiIndex(std::move(e)); }

// one oscillator w' = (i + eps a) w + extra, slow v' = -eps v
TaylorModel one_oscillator(double a, const std::vector<std::pair<MultiIndex, Complex>>& extra) {
  const PolyShape W{2, 1, 5, 3, 4};
  const PolyShape O{0, 1, 0, 0, 4};
  ScalarPoly w(W), g(W);
  w.add_term(mi({1, 0}), 0, mi({0}), Complex(0, 1));
  if (a != 0) w.add_term(mi({1, 0}), 1, mi({0}), a);
  for (const auto& [q, c] : extra) w.add_term(q, 0, mi({0}), c);
  g.add_term(mi({0, 0}), 0, mi({1}), -1.0);
  return taylor_from_w_form(1, 1, 5, 3, 4, Radii{}, {w}, {g}, {ScalarPoly::constant(O, 1.0)});
}

template <class T>
double defect_slope(const std::vector<ScalarPoly>& A, int d, const std::vector<ScalarPoly>& G,
                    int s, const std::vector<double>& eps) {
  const auto r = eps_block_diagonalize<T>(A, d, G, s, Vec::Zero(1));
  std::vector<double> x, y;
  for (double e : eps) {
    x.push_back(std::log(e));
    y.push_back(std::log(static_cast<double>(r.defect(static_cast<T>(e)))));
  }
  return linear_fit(x, y).slope;
}

}  // namespace

TEST_CASE("block diagonalization: nothing to correct") {
  const PolyShape sh{0, 1, 0, 3, 2};
  const MultiIndex none = MultiIndex::zero(0);
  Mat A0(2, 2);
  A0 << 0.2, -1, 1, 0.2;
  std::vector<ScalarPoly> A(4, ScalarPoly(sh));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) A[i * 2 + j].add_term(none, 0, mi({0}), A0(i, j));
  std::vector<ScalarPoly> G{ScalarPoly(sh)};
  const auto r = eps_block_diagonalize<double>(A, 2, G, 3, Vec::Zero(1));
  CHECK((r.B_eps[0] - A0).cwiseAbs().maxCoeff() <= 1e-13);
  for (int k = 1; k <= 3; ++k) {
    CHECK(r.T_eps[k].cwiseAbs().maxCoeff() <= 1e-13);
    CHECK(r.B_eps[k].cwiseAbs().maxCoeff() <= 1e-13);
  }
  CHECK(r.defect(1e-2) <= 1e-13);
}

TEST_CASE("block diagonalization: rotation plus diagonal perturbation") {
  const PolyShape sh{0, 1, 0, 3, 2};
  const MultiIndex none = MultiIndex::zero(0);
  std::vector<ScalarPoly> A(4, ScalarPoly(sh));
  A[1].add_term(none, 0, mi({0}), -1.0);
  A[2].add_term(none, 0, mi({0}), 1.0);
  A[0].add_term(none, 1, mi({0}), 1.0);
  A[3].add_term(none, 1, mi({0}), -1.0);
  std::vector<ScalarPoly> G{ScalarPoly(sh)};
  const int s = 2;
  const auto r = eps_block_diagonalize<long double>(A, 2, G, s, Vec::Zero(1));
  // diag(1, -1) is in im ad_J0, so its projection onto ker ad_J0 vanishes
  Eigen::Matrix<long double, 2, 2> J0;
  J0 << 0, -1, 1, 0;
  CHECK(static_cast<double>(r.B_eps[1].cwiseAbs().maxCoeff()) <= 1e-12);
  CHECK(static_cast<double>((r.B_eps[0] - J0).cwiseAbs().maxCoeff()) <= 1e-12);
  CHECK(defect_slope<long double>(A, 2, G, s, {1e-2, 1e-3}) == doctest::Approx(s + 1).epsilon(0.1));
}

TEST_CASE("block diagonalization: random 4x4, s = 2") {
  const auto sys = demo_blockdiag_system(2, 11);
  const double slope = defect_slope<long double>(sys.A, sys.d, sys.G, 2, {1e-2, 1e-3, 1e-4});
  CHECK(slope >= 2.8);
  CHECK(slope <= 3.2);
  const auto r = eps_block_diagonalize<long double>(sys.A, sys.d, sys.G, 2, sys.v0);
  CHECK(r.commutator <= 1e-10);
}

TEST_CASE("normal form of a purely linear model is empty") {
  const auto tm = one_oscillator(0.5, {});
  const auto nf = solve_normal_form(tm, ResonanceStructure(1, 5, 0.05));
  for (const auto& p : nf.H) CHECK(p.chopped(1e-14).is_zero());
  for (const auto& p : nf.X) CHECK(p.chopped(1e-14).is_zero());
  for (const auto& p : nf.U) CHECK(p.chopped(1e-14).is_zero());
  for (const auto& p : nf.C) CHECK(p.y_degree_slice(0).chopped(1e-14).size() <= 1);
}

TEST_CASE("normal form keeps a resonant cubic") {
  const Complex h(-1, -1);
  const auto tm = one_oscillator(0.5, {{mi({2, 1}), h}});
  const auto nf = solve_normal_form(tm, ResonanceStructure(1, 5, 0.05));
  CHECK(std::abs(nf.H[0].coeff(mi({2, 1}), 0, mi({0})) - h) <= 1e-12);
  CHECK(std::abs(nf.H[1].coeff(mi({1, 2}), 0, mi({0})) - std::conj(h)) <= 1e-12);
  CHECK(nf.X[0].y_degree_slice(3).chopped(1e-12).is_zero());
  const auto ts = transform_system(nf);
  CHECK(check_normal_form(nf, ts).worst() <= 1e-10);
}

TEST_CASE("normal form removes a non-resonant quadratic") {
  const Complex f(0.3, -0.2);
  const auto tm = one_oscillator(0.5, {{mi({0, 2}), f}});
  const ResonanceStructure rs(1, 5, 0.05);
  const auto nf = solve_normal_form(tm, rs);
  CHECK(nf.H[0].y_degree_slice(2).chopped(1e-13).is_zero());
  // homological equation at eps = 0: <omega, I(q - e_1)> X_q = fhat_q
  const Complex lam = lie_eigenvalue(Vec::Constant(1, 1.0), rs, mi({0, 2}), 1);
  const Complex fq = nf.fhat[0].coeff(mi({0, 2}), 0, mi({0}));
  CHECK(std::abs(fq - f) <= 1e-13);
  const Complex xq = nf.X[0].coeff(mi({0, 2}), 0, mi({0}));
  CHECK(std::abs(std::abs(xq) - std::abs(f / lam)) <= 1e-12);
  CHECK((std::abs(xq - f / lam) <= 1e-12 || std::abs(xq + f / lam) <= 1e-12));
  CHECK(check_normal_form(nf, transform_system(nf)).worst() <= 1e-10);
}

TEST_CASE("demo normal form residual") {
  const auto tm = demo_taylor_model();
  CHECK_NOTHROW(tm.validate());
  const auto nf = solve_normal_form(tm, ResonanceStructure(2, 5, 0.05));
  const auto nc = check_normal_form(nf, transform_system(nf));
  CHECK(nc.checked > 0);
  CHECK(nc.worst() <= 1e-10);
  // resonant structure of H: only q with <omega, I(q - e_i)> = 0 for rationally independent omega
  const ResonanceStructure rs(2, 5, 0.05);
  const Vec om = tm.omega_at(Vec::Zero(1));
  for (int i = 0; i < 4; ++i)
    for (const auto& t : nf.H[i].terms())
      CHECK(std::abs(lie_eigenvalue(om, rs, t.y, i + 1)) <= 1e-12);
}

TEST_CASE("Stuart-Landau reduction") {
  auto tm = std::make_shared<const TaylorModel>(one_oscillator(0.5, {{mi({2, 1}), Complex(-1, -1)}}));
  auto nf = std::make_shared<const NormalFormResult>(
      solve_normal_form(*tm, ResonanceStructure(1, 5, 0.05)));
  const auto raw = to_polar(nf, tm, 0.05, 4.0, false);
  const Vec v0 = Vec::Zero(1);
  CHECK(raw.alpha_at(v0)(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(raw.A_at(v0)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(raw.r_star()(0) == doctest::Approx(0.5).epsilon(1e-12));
  const auto scaled = to_polar(nf, tm);
  CHECK(scaled.r_star()(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("two-oscillator r*") {
  const auto raw = demo_polar_model_raw();
  const Vec v0 = Vec::Zero(1);
  Mat A(2, 2);
  A << 1, 0.3, 0.3, 1;
  CHECK((raw.A_at(v0) - A).cwiseAbs().maxCoeff() == 0.0);
  CHECK(raw.r_star()(0) == doctest::Approx(0.5 / 1.3).epsilon(1e-14));
  CHECK(raw.r_star()(1) == doctest::Approx(0.5 / 1.3).epsilon(1e-14));
  const auto pm = demo_polar_model();
  CHECK((pm.r_star() - Vec::Ones(2)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("demo normal form pipeline reproduces the demo polar model") {
  auto tm = std::make_shared<const TaylorModel>(demo_taylor_model());
  auto nf = std::make_shared<const NormalFormResult>(
      solve_normal_form(*tm, ResonanceStructure(2, 5, 0.05)));
  const auto raw = to_polar(nf, tm, 0.05, 4.0, false);
  const auto ref = demo_polar_model_raw();
  CounterRng rng(2, 0);
  for (int t = 0; t < 20; ++t) {
    Vec v = Vec::Constant(1, rng.uniform(-1, 1));
    CHECK((raw.alpha_at(v) - ref.alpha_at(v)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((raw.A_at(v) - ref.A_at(v)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((raw.omega_at(v) - ref.omega_at(v)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((raw.c_at(v) - ref.c_at(v)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("zone constants of the raw demo") {
  const auto zc = verify_conditions(demo_polar_model_raw());
  CHECK(zc.alpha0 == doctest::Approx(0.25).epsilon(1e-3));
  CHECK(zc.alpha_star == doctest::Approx(0.14).epsilon(1e-3));
  CHECK(zc.A_star == doctest::Approx(0.7).epsilon(1e-3));
  CHECK(zc.A_up == doctest::Approx(1.3).epsilon(1e-3));
  CHECK(zc.kappa > 0);
  CHECK(zc.kappa <= 1.0 + 1e-12);
}

TEST_CASE("condition violations") {
  auto alpha0 = [] {
    auto tm = std::make_shared<const TaylorModel>(one_oscillator(0.0, {{mi({2, 1}), Complex(-1, -1)}}));
    auto nf = std::make_shared<const NormalFormResult>(
        solve_normal_form(*tm, ResonanceStructure(1, 5, 0.05)));
    return verify_conditions(to_polar(nf, tm, 0.05, 4.0, false));
  };
  CHECK_THROWS_AS(alpha0(), ValidationError);

  auto pm = demo_polar_model_raw();
  ScalarPoly c(pm.v_shape());
  c.add_term(MultiIndex::zero(0), 0, mi({1}), 1.0);
  pm.c = {c};
  try {
    verify_conditions(pm);
    FAIL("expected C6 violation");
  } catch (const ValidationError& e) {
    CHECK(e.code() == "C6");
  }

  auto pa = demo_polar_model_raw();
  pa.A[1] = ScalarPoly::constant(pa.v_shape(), 2.0);
  pa.A[2] = ScalarPoly::constant(pa.v_shape(), 2.0);
  try {
    verify_conditions(pa);
    FAIL("expected C4 violation");
  } catch (const ValidationError& e) {
    CHECK(e.code() == "C4");
  }
}

TEST_CASE("remainders are O(sqrt r) and bounded") {
  const auto pm = demo_polar_model();
  const auto pb = polar_bounds(pm);
  CHECK(std::isfinite(pb.C0));
  CHECK(pb.C0 > 0);
  CHECK(std::isfinite(pb.sqrt_r_ratio));
}
