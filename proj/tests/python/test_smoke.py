import json

import numpy as np
import pytest

import dynbif


def test_demo_model_and_zone_constants():
    pm = dynbif.demo_polar_model()
    assert (pm.n, pm.m, pm.N, pm.s) == (2, 1, 5, 3)
    assert np.allclose(pm.r_star(), [1.0, 1.0], atol=1e-14)
    raw = dynbif.verify_conditions(dynbif.demo_polar_model_raw())
    assert raw.alpha0 == pytest.approx(0.25, rel=1e-3)
    assert raw.A_up == pytest.approx(1.3, rel=1e-3)


def test_polar_model_json_round_trip():
    pm = dynbif.demo_polar_model()
    back = dynbif.PolarModel.from_json(pm.to_json())
    assert back == pm


def test_normal_form_checks_pass():
    lm = dynbif.load_model("demo")
    assert lm.has_normal_form
    checks = dynbif.normal_form_checks(lm)
    assert checks and all(c["passed"] for c in checks)


def test_lyapunov_function():
    assert dynbif.V0(np.array([1.0, 1.0])) == 0.0
    assert dynbif.V0(np.array([2.0, 1.0])) == pytest.approx(1 - np.log(2.0), rel=1e-15)
    with pytest.raises(dynbif.ValidationError):
        dynbif.V0(np.array([0.0, 1.0]))


def test_simulate_returns_arrays():
    pm = dynbif.demo_polar_model()
    tr = dynbif.simulate(pm, 0.02, np.array([0.3, 1.5]), np.array([0.9]), np.zeros(2), 200.0)
    t = tr["t"]
    assert np.all(np.diff(t) > 0)
    assert tr["r"].shape == (t.size, 2)
    assert tr["v"].shape == (t.size, 1)
    assert np.all(tr["r"] >= 0)
    assert np.all((tr["phi"] >= 0) & (tr["phi"] < 2 * np.pi))


def test_torus_solve():
    pm = dynbif.demo_polar_model()
    res = dynbif.solve_torus(pm, 0.01, grid_res=16, probes=4)
    tg = res["torus"]
    assert tg.residual < 1e-8
    assert res["probe_residual"] <= 1e-6
    assert res["gamma"] > 0
    assert tg.xi.shape == (16 * 16, 3)
    assert json.loads(tg.to_json())["schema"] == "dynbif.torus/1"


def test_measure_and_gate():
    f, se = dynbif.sublevel_complement_measure(1e-2, samples=200000)
    assert 0 < f < 0.05 and se > 0
    with pytest.raises(dynbif.ValidationError):
        dynbif.q_set_inclusion(0.1, samples=100)


def test_errors_map_to_python():
    with pytest.raises(dynbif.IOError):
        dynbif.load_model("/nonexistent/model.json")
    cfg = json.loads(dynbif.default_config())
    cfg["k"] = 3
    with pytest.raises(dynbif.ValidationError, match="k_range"):
        dynbif.verify(json.dumps(cfg))
