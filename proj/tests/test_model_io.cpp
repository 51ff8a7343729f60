#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "dynbif/demo.hpp"
#include "dynbif/suite.hpp"

using namespace dynbif;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir() {
  static const fs::path p = [] {
    fs::path d = fs::temp_directory_path() / "dynbif_test_model_io";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

template <class F>
std::string error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("polynomial JSON round trip") {
  const auto tm = demo_taylor_model();
  for (const auto& p : tm.fast) CHECK(poly_from_json(poly_to_json(p), p.shape()) == p);
  json bad = poly_to_json(tm.fast[0]);
  bad[0]["c"] = "x";
  CHECK_THROWS_AS(poly_from_json(bad, tm.fast[0].shape()), ValidationError);
}

TEST_CASE("Taylor model round trip through text") {
  const auto tm = demo_taylor_model();
  const std::string text = taylor_to_json(tm).dump();
  CHECK(taylor_from_json(json::parse(text)) == tm);
}

TEST_CASE("polar model round trips") {
  const auto pm = demo_polar_model();
  CHECK(polar_equal(polar_from_json(json::parse(polar_to_json(pm).dump())), pm));

  auto tm = std::make_shared<const TaylorModel>(demo_taylor_model());
  auto nf = std::make_shared<const NormalFormResult>(
      solve_normal_form(*tm, ResonanceStructure(2, 5, 0.05)));
  const auto np = to_polar(nf, tm);
  const json j = polar_to_json(np, 0.05);
  CHECK(j.at("remainder").at("kind") == "normal_form");
  const auto back = polar_from_json(json::parse(j.dump()));
  CHECK(polar_equal(back, np));
  // remainders evaluate identically after reload
  Vec r(2), v(1), phi(2), R1(2), P1(2), Z1(1), R2(2), P2(2), Z2(1);
  r << 0.7, 1.2;
  v << 0.3;
  phi << 0.4, 5.0;
  np.remainders(r, v, phi, 0.01, R1, P1, Z1);
  back.remainders(r, v, phi, 0.01, R2, P2, Z2);
  CHECK((R1 - R2).norm() == 0.0);
  CHECK((P1 - P2).norm() == 0.0);
  CHECK((Z1 - Z2).norm() == 0.0);
}

TEST_CASE("torus round trip is bit-faithful") {
  const auto cs = combined_system(demo_polar_model(), 0.02);
  TorusOptions opt;
  opt.grid_res = 8;
  const auto tg = solve_invariant_torus(cs, opt);
  const auto back = torus_from_json(json::parse(torus_to_json(tg).dump()));
  CHECK(back.res == tg.res);
  CHECK(back.eps == tg.eps);
  CHECK(back.L == tg.L);
  CHECK(back.rho == tg.rho);
  CHECK(back.residual == tg.residual);
  REQUIRE(back.nodes() == tg.nodes());
  for (int k = 0; k < tg.nodes(); ++k) CHECK((back.xi[k] - tg.xi[k]).norm() == 0.0);
}

TEST_CASE("schema enforcement") {
  json j = scenario_to_json(ScenarioConfig{});
  CHECK(scenario_from_json(j).eps == ScenarioConfig{}.eps);
  j["surprise"] = 1;
  CHECK(error_code([&] { scenario_from_json(j); }) == "schema");
  json w = scenario_to_json(ScenarioConfig{});
  w["schema"] = "dynbif.scenario/99";
  CHECK(error_code([&] { scenario_from_json(w); }) == "schema");
  json p = polar_to_json(demo_polar_model());
  p["extra"] = true;
  CHECK(error_code([&] { polar_from_json(p); }) == "schema");
}

TEST_CASE("scenario validation") {
  ScenarioConfig c;
  CHECK_NOTHROW(c.validate(0.05));
  c.k = 3;  // N - 2
  CHECK(error_code([&] { c.validate(0.05); }) == "k_range");
  c.k = 0;
  CHECK(error_code([&] { c.validate(0.05); }) == "k_range");
  c.k = 1;
  c.eps = {0.01, 0.05};
  CHECK(error_code([&] { c.validate(0.05); }) == "eps");
  c.eps = {0.0};
  CHECK(error_code([&] { c.validate(0.05); }) == "eps");
}

TEST_CASE("file errors") {
  try {
    read_json_file((tmpdir() / "missing.json").string());
    FAIL("expected an I/O error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IO);
  }
  const auto bad = (tmpdir() / "bad.json").string();
  write_text_file(bad, "{ not json");
  CHECK(error_code([&] { read_json_file(bad); }) == "parse");
  CHECK_THROWS_AS(load_model((tmpdir() / "nope.json").string()), IOError);
  write_text_file(bad, "{\"schema\": \"other\"}");
  CHECK(error_code([&] { load_model(bad); }) == "schema");
}

TEST_CASE("model files load through the pipeline") {
  const auto tf = (tmpdir() / "taylor.json").string();
  write_text_file(tf, taylor_to_json(demo_taylor_model()).dump(1));
  const auto lm = load_model(tf);
  REQUIRE(lm.nf);
  CHECK((lm.polar.r_star() - Vec::Ones(2)).norm() <= 1e-12);
  const auto pf = (tmpdir() / "polar.json").string();
  write_text_file(pf, polar_to_json(demo_polar_model()).dump(1));
  const auto lp = load_model(pf);
  CHECK_FALSE(lp.nf);
  CHECK(polar_equal(lp.polar, demo_polar_model()));
}

TEST_CASE("checks") {
  CHECK(make_check("a", 1e-11, "<=", 1e-10).passed);
  CHECK_FALSE(make_check("a", 2e-10, "<=", 1e-10).passed);
  CHECK(make_check("b", 0.5, "in", 0.4, 0.6).passed);
  CHECK_FALSE(make_check("b", std::nan(""), "in", 0.4, 0.6).passed);
  CHECK_FALSE(make_check("c", std::nan(""), "<=", 1.0).passed);
  CHECK_THROWS_AS(make_check("d", 1, "<", 2), ValidationError);
  std::ostringstream os;
  print_check(os, make_check("e", 0, "==", 0));
  CHECK(os.str().rfind("PASS", 0) == 0);
}
