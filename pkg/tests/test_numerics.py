import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sponge_dim.numerics import (
    TS_FRACTIONS,
    TS_WEIGHTS,
    entropy_of,
    golden_section_min,
    increasing_root,
    newton_bracketed,
    project_simplex,
)


def ts(f):
    return float(np.sum(TS_WEIGHTS * f(TS_FRACTIONS)))


def test_tanh_sinh_weights_sum_to_one():
    assert abs(TS_WEIGHTS.sum() - 1.0) < 1e-14
    assert np.all((TS_FRACTIONS >= 0) & (TS_FRACTIONS <= 1))


@pytest.mark.parametrize("k", [0, 1, 3, 7])
def test_tanh_sinh_polynomials(k):
    assert abs(ts(lambda x: x**k) - 1.0 / (k + 1)) < 1e-14


def test_tanh_sinh_endpoint_log_singularity():
    # -x log x vanishes with infinite slope at 0, as the entropy integrands do
    assert abs(ts(lambda x: -x * np.log(np.where(x > 0, x, 1.0))) - 0.25) < 1e-14
    assert abs(ts(lambda x: np.sqrt(x)) - 2.0 / 3.0) < 1e-13


def test_entropy_of_zero_convention():
    assert entropy_of([1.0, 0.0]) == 0.0
    assert abs(entropy_of([0.5, 0.5]) - math.log(2)) < 1e-15


@settings(max_examples=200, deadline=None)
@given(arrays(float, st.integers(1, 8), elements=st.floats(-5, 5)))
def test_project_simplex_is_feasible_and_idempotent(x):
    p = project_simplex(x)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) < 1e-12
    assert np.allclose(project_simplex(p), p, atol=1e-12)


def test_project_simplex_known_values():
    assert np.allclose(project_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])
    assert np.allclose(project_simplex([2.0, 0.0]), [1.0, 0.0])
    assert np.allclose(project_simplex([1.0, 1.0]), [0.5, 0.5])


def test_increasing_root_vectorized():
    x = increasing_root(lambda v: v**3, np.array([8.0, 27.0]), [0.0, 0.0], [10.0, 10.0])
    assert np.allclose(x, [2.0, 3.0], rtol=1e-14)


def test_newton_bracketed_matches_closed_form():
    t = np.linspace(-3, 3, 7)
    x = newton_bracketed(lambda v: (np.sinh(v) - t, np.cosh(v)), t - 5, t + 5)
    assert np.allclose(x, np.arcsinh(t), atol=1e-14)


def test_golden_section_vectorized():
    c = np.array([0.3, 1.7])
    x, f = golden_section_min(lambda v: (v - c) ** 2 + 1.0, [0.0, 1.0], [1.0, 2.0], 1e-10)
    assert np.allclose(x, c, atol=1e-9)
    assert np.allclose(f, 1.0, atol=1e-15)
