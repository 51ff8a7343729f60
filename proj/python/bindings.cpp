#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "dynbif/demo.hpp"
#include "dynbif/suite.hpp"

namespace py = pybind11;
using namespace dynbif;

namespace {

py::dict check_dict(const Check& c) {
  py::dict d;
  d["name"] = c.name;
  d["value"] = c.value;
  d["relation"] = c.relation;
  d["lo"] = c.lo;
  d["hi"] = c.hi;
  d["passed"] = c.passed;
  d["detail"] = c.detail;
  return d;
}

py::list checks_list(const std::vector<Check>& cs) {
  py::list out;
  for (const auto& c : cs) out.append(check_dict(c));
  return out;
}

Mat stack(const std::vector<Vec>& rows, int cols) {
  Mat m(static_cast<int>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<int>(i)) = rows[i].transpose();
  return m;
}

ScenarioConfig config_from(const std::string& text) {
  return text.empty() ? ScenarioConfig{} : scenario_from_json(json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_dynbif, m) {
  m.doc() = "normal forms, invariant tori and basins near a dynamic bifurcation";

  static py::exception<Error> base(m, "Error");
  static py::exception<ValidationError> verr(m, "ValidationError", base.ptr());
  static py::exception<NumericError> nerr(m, "NumericError", base.ptr());
  static py::exception<IOError> ioerr(m, "IOError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      py::set_error(verr, (e.code() + ": " + e.what()).c_str());
    } catch (const NumericError& e) {
      py::set_error(nerr, (e.code() + ": " + e.what()).c_str());
    } catch (const IOError& e) {
      py::set_error(ioerr, e.what());
    } catch (const json::exception& e) {
      py::set_error(verr, (std::string("json: ") + e.what()).c_str());
    }
  });

  py::class_<Radii>(m, "Radii")
      .def_readonly("R0", &Radii::R0)
      .def_readonly("Rstar", &Radii::Rstar)
      .def_readonly("Rstar_up", &Radii::Rstar_up);

  py::class_<PolarModel>(m, "PolarModel")
      .def_readonly("n", &PolarModel::n)
      .def_readonly("m", &PolarModel::m)
      .def_readonly("N", &PolarModel::N)
      .def_readonly("s", &PolarModel::s)
      .def_readonly("eps0", &PolarModel::eps0)
      .def_readonly("rho", &PolarModel::rho)
      .def_readonly("radii", &PolarModel::radii)
      .def("r_star", &PolarModel::r_star)
      .def("alpha", &PolarModel::alpha_at, py::arg("v"))
      .def("A", &PolarModel::A_at, py::arg("v"))
      .def("omega", &PolarModel::omega_at, py::arg("v"))
      .def("to_json", [](const PolarModel& pm, double nu) { return polar_to_json(pm, nu).dump(1); },
           py::arg("nu") = 0.05)
      .def_static("from_json", [](const std::string& s) { return polar_from_json(json::parse(s)); })
      .def("__eq__", [](const PolarModel& a, const PolarModel& b) { return polar_equal(a, b); });

  py::class_<ZoneConstants>(m, "ZoneConstants")
      .def_readonly("alpha0", &ZoneConstants::alpha0)
      .def_readonly("alpha_star", &ZoneConstants::alpha_star)
      .def_readonly("alpha_up", &ZoneConstants::alpha_up)
      .def_readonly("A_star", &ZoneConstants::A_star)
      .def_readonly("A_up", &ZoneConstants::A_up)
      .def_readonly("kappa", &ZoneConstants::kappa)
      .def_readonly("delta", &ZoneConstants::delta);

  py::class_<LoadedModel>(m, "LoadedModel")
      .def_readonly("polar", &LoadedModel::polar)
      .def_property_readonly("has_normal_form", [](const LoadedModel& lm) { return bool(lm.nf); });

  m.def("demo_polar_model", &demo_polar_model);
  m.def("demo_polar_model_raw", &demo_polar_model_raw);
  m.def("load_model", &load_model, py::arg("source") = "demo", py::arg("nu") = 0.05);
  m.def("verify_conditions", &verify_conditions, py::arg("model"), py::arg("sample_budget") = 2048);
  m.def("V0", &V0, py::arg("r"));
  m.def("normal_form_checks", [](const LoadedModel& lm) { return checks_list(check_normal_form(lm)); });
  m.def("hessian_identity_max_scaled",
        [](const PolarModel& pm, int trials, std::uint64_t seed) {
          return hessian_identity_check(pm, trials, seed).max_scaled;
        },
        py::arg("model"), py::arg("trials") = 1000, py::arg("seed") = 0);

  m.def("simulate",
        [](const PolarModel& pm, double eps, const Vec& r0, const Vec& v0, const Vec& phi0,
           double t_end, bool full, double rtol, double atol) {
          SimOptions so;
          so.full = full;
          so.rtol = rtol;
          so.atol = atol;
          const auto zc = verify_conditions(pm);
          const auto tr = simulate(pm, eps, r0, v0, phi0, t_end, so, &zc);
          std::vector<int> zone;
          for (auto z : tr.zone) zone.push_back(static_cast<int>(z));
          py::list events;
          for (const auto& e : tr.events) events.append(py::make_tuple(e.name, e.t));
          py::dict d;
          d["t"] = Vec(Eigen::Map<const Vec>(tr.t.data(), static_cast<int>(tr.t.size())));
          d["r"] = stack(tr.r, tr.n);
          d["v"] = stack(tr.v, tr.m);
          d["phi"] = stack(tr.phi, tr.n);
          d["zone"] = zone;
          d["events"] = events;
          d["invariance_warnings"] = tr.invariance_warnings;
          return d;
        },
        py::arg("model"), py::arg("eps"), py::arg("r0"), py::arg("v0"), py::arg("phi0"),
        py::arg("t_end"), py::arg("full") = true, py::arg("rtol") = 1e-9, py::arg("atol") = 1e-11);

  py::class_<TorusGrid>(m, "TorusGrid")
      .def_readonly("res", &TorusGrid::res)
      .def_readonly("eps", &TorusGrid::eps)
      .def_readonly("L", &TorusGrid::L)
      .def_readonly("rho", &TorusGrid::rho)
      .def_readonly("residual", &TorusGrid::residual)
      .def_readonly("iterations", &TorusGrid::iterations)
      .def_readonly("y_base", &TorusGrid::y_base)
      .def_readonly("y_ref", &TorusGrid::y_ref)
      .def_property_readonly("xi", [](const TorusGrid& tg) { return stack(tg.xi, tg.dim); })
      .def("point", &TorusGrid::point, py::arg("phi"))
      .def("sup_distance", &TorusGrid::sup_distance, py::arg("ref"))
      .def("to_json", [](const TorusGrid& tg) { return torus_to_json(tg).dump(1); });

  m.def("solve_torus",
        [](const PolarModel& pm, double eps, int grid_res, int probes, std::uint64_t seed) {
          const auto cs = combined_system(pm, eps);
          TorusOptions to;
          to.grid_res = grid_res;
          auto tg = solve_invariant_torus(cs, to);
          const auto dis = dissipativity_constants(cs, 512, 0.5, seed);
          const double probe = invariance_residual(tg, cs, probes, seed);
          py::dict d;
          d["torus"] = tg;
          d["probe_residual"] = probe;
          d["gamma"] = dis.gamma;
          d["sigma"] = dis.sigma;
          return d;
        },
        py::arg("model"), py::arg("eps"), py::arg("grid_res") = 32, py::arg("probes") = 16,
        py::arg("seed") = 0);

  m.def("sublevel_complement_measure",
        [](double eps, double k, double rho, int n, long samples, std::uint64_t seed, int jobs) {
          const auto e = sublevel_complement_measure(eps, k, rho, n, samples, seed, jobs);
          return py::make_tuple(e.fraction, e.stderr_);
        },
        py::arg("eps"), py::arg("k") = 1.0, py::arg("rho") = 3.0, py::arg("n") = 2,
        py::arg("samples") = 100000, py::arg("seed") = 0, py::arg("jobs") = 1);
  m.def("q_set_inclusion",
        [](double eps, double k, double c, double rho, int n, long samples, std::uint64_t seed) {
          const auto r = q_set_inclusion(eps, k, c, rho, n, samples, seed);
          return py::make_tuple(r.checked, r.violations);
        },
        py::arg("eps"), py::arg("k") = 1.0, py::arg("c") = 1.5, py::arg("rho") = 3.0,
        py::arg("n") = 2, py::arg("samples") = 100000, py::arg("seed") = 0);

  m.def("default_config", [] { return scenario_to_json(ScenarioConfig{}).dump(1); });
  m.def("verify",
        [](const std::string& config_json, const std::string& out) {
          ScenarioConfig cfg = config_from(config_json);
          if (!out.empty()) cfg.out = out;
          const auto lm = load_model(cfg.model, cfg.nu);
          std::ostringstream log;
          const auto cs = run_verify(cfg, lm, log);
          return checks_list(cs);
        },
        py::arg("config_json") = "", py::arg("out") = "", py::call_guard<py::gil_scoped_release>());
}
