import math

import numpy as np
import pytest

import ermlab


def test_projection_and_support():
    body = ermlab.ConvexBody("l1_ball", d=4)
    y = ermlab.project(body, np.array([3.0, -1.0, 0.5, 0.0]))
    assert np.abs(y).sum() == pytest.approx(1.0)
    assert ermlab.support(body, np.array([0.2, -0.7, 0.1, 0.0])) == pytest.approx(0.7)
    value, argmax = ermlab.support_intersection(ermlab.ConvexBody("l2_ball", d=3), 0.5, np.array([3.0, 4.0, 0.0]))
    assert value == pytest.approx(2.5)
    assert np.linalg.norm(argmax) == pytest.approx(0.5)


def test_bad_arguments_raise():
    with pytest.raises(ermlab.UnsupportedError):
        ermlab.ConvexBody("simplex", d=3)
    with pytest.raises(ermlab.ConfigError):
        ermlab.run_experiment({"bogus": 1})
    with pytest.raises(NotImplementedError):
        ermlab.project(ermlab.ConvexBody("maxnorm", p=2, q=2), np.zeros(4))


def test_width_matches_chi_mean():
    est = ermlab.gaussian_width_mc(ermlab.ConvexBody("l2_ball", d=2), 3.0, trials=4000, seed=3)
    assert abs(est.mean - 2.0 * math.sqrt(math.pi / 2.0)) <= 3.0 * est.std_error


def test_fixed_point_l2():
    body = ermlab.ConvexBody("l2_ball", d=16)
    res = ermlab.solve_fixed_point(body, "s_star", N=10000, eta=1.0, trials=400, seed=1)
    assert res.converged
    # H(r) = r E|g| for r <= 2, so s* = E|g| / sqrt(N).
    assert res.value == pytest.approx(math.sqrt(15.5) / 100.0, rel=0.05)


def test_erm_realizable():
    t = np.zeros(8)
    t[2] = 0.5
    X, Y = ermlab.sample_dataset(8, 40, 0.0, t_star=t, seed=4)
    sol = ermlab.erm(ermlab.ConvexBody("l1_ball", d=8), X, Y)
    assert sol["converged"]
    assert ermlab.excess_risk(sol["t_hat"], t) <= 1e-10


def test_presets_and_experiment():
    assert len(ermlab.preset_names()) == 7
    cfg = ermlab.preset_config("b1_rates")
    assert cfg["body.d"] == "64"
    out = ermlab.run_experiment({"grid.N": "32,64", "trials": 3, "body.d": 16}, preset="b1_rates")
    assert out["exit_code"] == 0
    assert out["csv"].splitlines()[0].startswith("config_id,cell,trial,seed,N")
    assert len(out["csv"].splitlines()) == 7
    assert out["summary"]["config_id"] == "b1_rates"
    fit = ermlab.fit_rate(out["csv"])
    assert fit["points"] == 2


def test_thread_count_does_not_change_output():
    config = {"body.d": 16, "grid.N": "24", "trials": 4}
    ermlab.set_num_threads(1)
    a = ermlab.run_experiment(config)["csv"]
    ermlab.set_num_threads(3)
    b = ermlab.run_experiment(config)["csv"]
    ermlab.set_num_threads(1)
    assert a == b


def test_shift_bound():
    assert ermlab.gaussian_shift_bound(0.3, 0.0) == pytest.approx(0.3)
    assert ermlab.gaussian_shift_bound(0.5, 1.959963984540054) == pytest.approx(0.025, rel=1e-6)
