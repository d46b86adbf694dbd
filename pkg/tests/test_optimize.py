import json
import math

import numpy as np
import pytest

from _sponges import MCMULLEN_M1, m1, moran, random_baranski_carpet, random_constant_ratio_sponge, square
from sponge_dim import OptimizerConfig, dynamical_dimension, hausdorff_lb, verify_bounds
from sponge_dim.gap import GapParams, build_gap_ifs
from sponge_dim.measure import delta_p
from sponge_dim.optimize import maximize_on_simplex, perturb
from sponge_dim.ifs import validate, classify

FAST = OptimizerConfig(starts=6, seed=1)


def test_maximize_concave_function_on_simplex():
    target = np.array([0.1, 0.6, 0.3])
    runs = maximize_on_simplex(lambda p: -np.sum((p - target) ** 2), 3, [np.full((1, 3), 1 / 3)],
                               OptimizerConfig(starts=1))
    assert np.allclose(runs[0].x, target, atol=1e-5)


def test_maximize_reaches_boundary():
    runs = maximize_on_simplex(lambda p: p[0], 3, [np.full((1, 3), 1 / 3)], OptimizerConfig(starts=1))
    assert np.allclose(runs[0].x, [1, 0, 0], atol=1e-8)


def test_square_dynd_is_two():
    rep = dynamical_dimension(square(), FAST)
    assert abs(rep.value - 2.0) < 1e-9
    assert np.allclose(rep.argmax["p"], 0.25, atol=1e-3)


def test_m1_dynd_is_mcmullen():
    rep = dynamical_dimension(m1(), OptimizerConfig())
    assert abs(rep.value - MCMULLEN_M1) < 1e-6
    assert rep.value > delta_p(m1()) + 1e-3
    assert rep.flags["good_measure"]


def test_moran_dynd():
    assert abs(dynamical_dimension(moran(), FAST).value - math.log(3) / math.log(4)) < 1e-9


def test_determinism():
    a = dynamical_dimension(m1(), OptimizerConfig(starts=5, seed=42)).to_json()
    b = dynamical_dimension(m1(), OptimizerConfig(starts=5, seed=42)).to_json()
    assert a == b
    json.loads(a)


def test_thread_count_does_not_change_result():
    a = dynamical_dimension(m1(), OptimizerConfig(starts=5, seed=3, workers=1)).to_json()
    b = dynamical_dimension(m1(), OptimizerConfig(starts=5, seed=3, workers=4)).to_json()
    assert a == b


def test_hausdorff_lb_at_least_dynd():
    rng = np.random.default_rng(4)
    for _ in range(4):
        f = random_baranski_carpet(rng)
        d = dynamical_dimension(f, FAST)
        h = hausdorff_lb(f, "knots", FAST, dynd=d, budget=100)
        assert h.value >= d.value - 1e-8


def test_m1_hausdorff_lb_equals_dynd():
    d = dynamical_dimension(m1(), FAST)
    h = hausdorff_lb(m1(), "knots", FAST, dynd=d)
    assert abs(h.value - d.value) <= 1e-4
    assert h.flags["certified_lower_bound"]


def test_constant_ratio_sponge_equality():
    rng = np.random.default_rng(5)
    f = random_constant_ratio_sponge(rng)
    d = dynamical_dimension(f, FAST)
    h = hausdorff_lb(f, "knots", FAST, dynd=d, budget=100)
    assert abs(h.value - d.value) <= 1e-4


def test_constant_family_and_bad_family():
    d = dynamical_dimension(m1(), FAST)
    assert hausdorff_lb(m1(), "constant", FAST, dynd=d).value == d.value
    with pytest.raises(ValueError):
        hausdorff_lb(m1(), "spiral", FAST, dynd=d)
    with pytest.raises(ValueError):
        hausdorff_lb(m1(), "circular", FAST, dynd=d)


def test_circular_family_beats_dynd_on_gap_sponge():
    params = GapParams(k=1e5)
    ifs = build_gap_ifs(params)
    h = hausdorff_lb(ifs, "circular", OptimizerConfig(starts=4), gammas=[params.gamma])
    assert h.value > h.residuals["dynamical_dimension"]
    assert h.argmax["cycle"]["form"] == "circular"
    assert h.flags["certified_lower_bound"]


def test_verify_bounds_m1():
    rep = verify_bounds(m1(), FAST, budget=100)
    assert rep["bound_holds"]
    assert rep["monotone"]
    assert rep["deltas"][2] < rep["deltas"][0]


def test_verify_bounds_gap_sponge():
    ifs = build_gap_ifs(GapParams(k=1e4))
    rep = verify_bounds(ifs, OptimizerConfig(starts=4), family="circular")
    assert rep["bound_holds"] and rep["hausdorff_lb"] <= 2 * rep["dynamical_dimension"]


def test_perturbation_stays_valid():
    rng = np.random.default_rng(6)
    for _ in range(10):
        f = random_baranski_carpet(rng)
        for eta in (1e-2, 1e-4):
            g = perturb(f, eta, seed=1)
            assert validate(g).ok
            assert classify(g).is_baranski
