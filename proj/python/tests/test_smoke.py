import numpy as np
import pytest

import soco


def scalar_spec(beta, T):
    return soco.ProblemSpec(np.array([[1.0]]), beta, T)


def test_window_solution_and_dual():
    spec = scalar_spec(10.0, 2)
    res = soco.solve_opt(spec, np.array([[1.0, 1.0]]))
    assert abs(res.objective - 1.0) < 1e-10
    assert np.allclose(res.actions, 0.0, atol=1e-9)
    assert abs(soco.opt_dual_cost(spec, np.array([[1.0, 1.0]]), res.duals) - 1.0) < 1e-8


def test_static_example():
    x, cost, closed = soco.static_optimum(scalar_spec(0.5, 4), np.array([[1.0, 0.0, 1.0, 0.0]]))
    assert closed
    assert abs(x[0] - 0.375) < 1e-14
    assert abs(cost - 0.71875) < 1e-12


def test_policies_on_a_realization():
    f = soco.ImpulseResponse.scalar([1.0, 0.5])
    noise = soco.NoiseSpec(np.array([[1.0]]))
    spec = scalar_spec(1.0, 30)
    r = soco.realize(f, noise, np.full((1, 30), 2.0), 7)
    opt = soco.run_opt(spec, r).cost["total"]
    afhc = soco.run_afhc(spec, r, f, 3)
    assert afhc.name == "AFHC"
    assert afhc.cost["total"] >= opt - 1e-9
    g1, g2 = soco.loss_split(spec, r, f, 3)
    assert afhc.cost["total"] - opt <= g1 + g2 + 1e-6


def test_bounds():
    spec = scalar_spec(1.0, 240)
    rep = soco.bound_report(spec, soco.ImpulseResponse.white(1), soco.NoiseSpec(np.array([[1.0]])), 4)
    assert abs(rep["V"] - 1.3) < 1e-12
    assert abs(rep["alpha2"] - 0.5) < 1e-15


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        soco.ProblemSpec(np.array([[1.0, 1.0]]), 1.0, 3)
    with pytest.raises(ValueError):
        soco.ImpulseResponse.scalar([0.5])


def test_experiment_is_reproducible():
    config = {
        "spec": {"K": 1, "beta": 1, "T": 20},
        "impulse": {"kind": "iid"},
        "noise": {"family": "gaussian", "R_e": 1},
        "y_hat": {"kind": "constant", "value": 1},
        "algorithms": [{"name": "AFHC", "w": 2}],
        "samples": 8,
        "seed": 3,
    }
    csv1, summary = soco.run_config(config, threads=1)
    csv4, _ = soco.run_config(config, threads=4)
    assert csv1 == csv4
    assert summary["completed"] == 8
    with pytest.raises(ValueError):
        soco.run_config({**config, "samples": 0})
