#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "dynbif/demo.hpp"
#include "dynbif/dynamics.hpp"
#include "dynbif/sampling.hpp"

using namespace dynbif;

namespace {

Vec vec(std::initializer_list<double> x) {
  Vec v(static_cast<int>(x.size()));
  int i = 0;
  for (double a : x) v(i++) = a;
  return v;
}

const PolarModel& demo() {
  static const PolarModel pm = demo_polar_model();
  return pm;
}

const ZoneConstants& demo_zc() {
  static const ZoneConstants zc = verify_conditions(demo());
  return zc;
}

SimOptions first_approx() {
  SimOptions so;
  so.full = false;
  return so;
}

}  // namespace

TEST_CASE("integrator: zero field and scalar exponential") {
  OdeOptions opt;
  auto zero = [](double, const Vec&, Vec& dy) { dy.setZero(); };
  auto r0 = integrate(zero, vec({1.0, -2.0}), 0, 10, opt);
  for (const auto& y : r0.y) CHECK((y - vec({1.0, -2.0})).norm() == 0.0);

  const double eps = 0.01;
  auto decay = [eps](double, const Vec& y, Vec& dy) { dy = -eps * y; };
  opt.rtol = 1e-10;
  opt.atol = 1e-14;
  auto r1 = integrate(decay, vec({1.0}), 0, 3 / eps, opt);
  double worst = 0;
  for (std::size_t i = 0; i < r1.t.size(); ++i)
    worst = std::max(worst, std::abs(r1.y[i](0) - std::exp(-eps * r1.t[i])) / std::exp(-eps * r1.t[i]));
  CHECK(worst <= 1e-8);
}

TEST_CASE("integrator: harmonic oscillator energy and event location") {
  auto osc = [](double, const Vec& y, Vec& dy) {
    dy(0) = y(1);
    dy(1) = -y(0);
  };
  OdeOptions opt;
  opt.rtol = 1e-11;
  opt.atol = 1e-13;
  OdeEvent ev{"cross", [](double, const Vec& y) { return y(0); }, -1, false};
  auto r = integrate(osc, vec({1.0, 0.0}), 0, 10, opt, {ev});
  CHECK(std::abs(r.y_end(0) - std::cos(10.0)) <= 1e-8);
  REQUIRE(r.events.size() == 2);
  CHECK(r.events[0].t == doctest::Approx(std::numbers::pi / 2).epsilon(1e-10));
  CHECK(r.events[1].t == doctest::Approx(5 * std::numbers::pi / 2).epsilon(1e-10));
}

TEST_CASE("classify_zone with the demo radii") {
  const Radii& R = demo().radii;
  CHECK(classify_zone(vec({0.3}), R) == Zone::Du);
  CHECK(classify_zone(vec({0.65}), R) == Zone::Dstar);
  CHECK(classify_zone(vec({-0.9}), R) == Zone::Ds);
  CHECK(classify_zone(vec({0.5}), R) == Zone::Dstar);
  CHECK(classify_zone(vec({0.8}), R) == Zone::Ds);
}

TEST_CASE("trajectory invariants and export") {
  const double eps = 0.01;
  auto tr = simulate(demo(), eps, vec({0.05, 2.0}), vec({0.9}), vec({0.1, 6.2}), 5 / eps, {}, &demo_zc());
  REQUIRE(tr.size() > 10);
  for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr.t[i] > tr.t[i - 1]);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    CHECK(tr.r[i].minCoeff() >= 0);
    CHECK(tr.phi[i].minCoeff() >= 0);
    CHECK(tr.phi[i].maxCoeff() < 2 * std::numbers::pi);
  }
  std::ostringstream os, ev;
  write_trajectory_csv(os, tr);
  CHECK(os.str().rfind("t,r1,r2,v1,phi1,phi2,zone\n", 0) == 0);
  write_event_log(ev, tr);
  std::istringstream lines(ev.str());
  std::string line;
  while (std::getline(lines, line)) CHECK(line.rfind("event,", 0) == 0);
}

TEST_CASE("first approximation settles at the frozen equilibrium") {
  const double eps = 0.01;
  auto tr = simulate(demo(), eps, vec({0.2, 0.2}), vec({0.95}), vec({0, 0}), 20 / eps, first_approx());
  const Vec r = tr.r.back();
  const Vec v = tr.v.back();
  // equilibrium of alpha(v) - A(v) r = 0 at the terminal v
  const Vec target = demo().A_at(v).lu().solve(demo().alpha_at(v));
  CHECK((r - target).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("first approximation at t = 5/eps is within 1e-6 of (1, 1)" * doctest::may_fail()) {
  const double eps = 0.01;
  auto tr = simulate(demo(), eps, vec({0.2, 0.2}), vec({0.95}), vec({0, 0}), 5 / eps, first_approx());
  CHECK((tr.r.back() - Vec::Ones(2)).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("decay certificate") {
  const double eps = 0.01;
  auto fa = simulate(demo(), eps, vec({0.1, 0.1}), vec({0.95}), vec({0, 0}), 20 / eps, first_approx(), &demo_zc());
  auto d1 = decay_certificate(fa, demo_zc(), demo().radii, true);
  CHECK(d1.checked > 0);
  CHECK(d1.violations == 0);
  auto full = simulate(demo(), eps, vec({0.1, 0.1}), vec({0.95}), vec({0, 0}), 20 / eps, {}, &demo_zc());
  auto d2 = decay_certificate(full, demo_zc(), demo().radii, false);
  CHECK(d2.checked > 0);
  CHECK(d2.violations == 0);
  auto du = simulate(demo(), eps, vec({0.1, 0.1}), vec({0.2}), vec({0, 0}), 1 / eps, {}, &demo_zc());
  CHECK_THROWS_AS(decay_certificate(du, demo_zc(), demo().radii, false), ValidationError);
}

TEST_CASE("capture") {
  const double eps = 0.01;
  auto tr = simulate(demo(), eps, vec({0.3, 1.5}), vec({0.95}), vec({1, 2}), 20 / eps, {}, &demo_zc());
  auto cr = capture_detector(tr, demo_zc(), demo().radii);
  CHECK(cr.captured);
  CHECK(cr.invariance_ok);
  CHECK(cr.exits == 0);
  auto t0 = simulate(demo(), eps, vec({0.3, 1.5}), vec({0.95}), vec({1, 2}), 0, {}, &demo_zc());
  CHECK_FALSE(capture_detector(t0, demo_zc(), demo().radii).captured);
}

TEST_CASE("first approximation captures from random starts") {
  const double eps = 0.01;
  int captured = 0;
  const int count = 100;
  parallel_for(count, 1, [&](int i) {
    CounterRng rng(17, static_cast<std::uint64_t>(i));
    Vec r = sample_simplex(rng, 2, demo().rho);
    r = r.cwiseMax(1e-6);
    Vec v = sample_ball(rng, 1, demo().radii.Rstar_up);
    auto tr = simulate(demo(), eps, r, v, vec({0, 0}), 20 / eps, first_approx(), &demo_zc());
    captured += capture_detector(tr, demo_zc(), demo().radii).captured;
  });
  CHECK(captured == count);
}

TEST_CASE("Lyapunov function") {
  CHECK(V0(vec({1, 1})) == 0.0);
  CHECK(V0(vec({2, 1})) == doctest::Approx(1 - std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(V0(vec({0, 1})), ValidationError);
  const double eps = 0.01;
  const auto pb = polar_bounds(demo());
  auto tr = simulate(demo(), eps, vec({0.3, 1.5}), vec({0.95}), vec({1, 2}), 20 / eps, {}, &demo_zc());
  auto cr = capture_detector(tr, demo_zc(), demo().radii);
  REQUIRE(cr.captured);
  Trajectory tail = tr;
  std::size_t k = 0;
  while (tr.t[k] < cr.t_K) ++k;
  tail.t.erase(tail.t.begin(), tail.t.begin() + k);
  tail.r.erase(tail.r.begin(), tail.r.begin() + k);
  tail.v.erase(tail.v.begin(), tail.v.begin() + k);
  tail.phi.erase(tail.phi.begin(), tail.phi.begin() + k);
  tail.zone.erase(tail.zone.begin(), tail.zone.begin() + k);
  auto lr = lyapunov_monitor(tail, demo(), demo_zc(), eps, 1.0, pb.C0, 1e-9, std::sqrt(eps));
  CHECK(lr.checked > 0);
  CHECK(lr.violations == 0);
  CHECK(lr.mu > 0);
  CHECK(lr.lambda > lr.q * lr.q / (2 * demo_zc().A_star * demo_zc().kappa));
}

TEST_CASE("Hessian identity") {
  CHECK(hessian_identity_lhs(demo(), Vec::Zero(2)) == 0.0);
  CHECK(hessian_identity_rhs(demo(), Vec::Zero(2)) == 0.0);
  const Vec e1 = vec({1, 0});
  const double expected = -(demo().A_at(Vec::Zero(1)) * e1).dot(e1);
  CHECK(hessian_identity_lhs(demo(), e1) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(hessian_identity_rhs(demo(), e1) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(hessian_identity_check(demo(), 1000, 1).max_scaled <= 1e-12);
}

TEST_CASE("Hessian identity at e1 equals -1" * doctest::may_fail()) {
  CHECK(hessian_identity_lhs(demo(), vec({1, 0})) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("hitting time") {
  const double eps = 0.01;
  const auto pb = polar_bounds(demo());
  const auto lc = lyapunov_constants(demo(), demo_zc());
  const auto cst = compute_Cstar(demo(), lc, pb.C0, eps);
  CHECK(cst.Cstar > 0);
  SimOptions quiet;
  quiet.remainder_scale = 0;
  // without remainders and B, (r*, 0) is an equilibrium of the first approximation
  quiet.full = false;
  auto at = simulate(demo(), eps, Vec::Ones(2), Vec::Zero(1), vec({0, 0}), 1 / eps, quiet);
  auto h0 = hitting_time(at, Vec::Ones(2), cst.Cstar, eps);
  REQUIRE(h0.has_value());
  CHECK(*h0 == 0.0);

  Vec r0 = vec({0.3, 1.5});
  CHECK(V0(r0) <= std::abs(std::log(eps)));
  auto tr = simulate(demo(), eps, r0, vec({0.95}), vec({1, 2}), 20 / eps, {}, &demo_zc());
  auto h = hitting_time(tr, Vec::Ones(2), cst.Cstar, eps);
  CHECK(h.has_value());

  auto empty = simulate(demo(), eps, r0, vec({0.95}), vec({1, 2}), 0, {}, &demo_zc());
  CHECK_FALSE(hitting_time(empty, Vec::Ones(2), cst.Cstar, eps).has_value());
}

TEST_CASE("sign structure of d|r|/dt") {
  auto rep = abs_r_derivative_check(demo(), demo_zc(), 0.01, 2000, 3);
  CHECK(rep.upper_checked > 0);
  CHECK(rep.lower_checked > 0);
  CHECK(rep.upper_violations == 0);
  CHECK(rep.lower_violations == 0);
}

TEST_CASE("parallel ensembles are independent of the job count") {
  const double eps = 0.02;
  auto run = [&](int jobs) {
    std::vector<double> end(6);
    parallel_for(6, jobs, [&](int i) {
      CounterRng rng(4, static_cast<std::uint64_t>(i));
      Vec r = sample_simplex(rng, 2, 3.0).cwiseMax(1e-3);
      auto tr = simulate(demo(), eps, r, vec({0.9}), vec({0, 0}), 2 / eps, {}, &demo_zc());
      end[i] = tr.r.back().sum();
    });
    return end;
  };
  CHECK(run(1) == run(3));
}
