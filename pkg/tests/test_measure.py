import math

import numpy as np
import pytest

from _sponges import m1, moran, random_sponge, square
from sponge_dim import BaseMap, DiagonalIFS, cond_entropy, delta_p, delta_p_integral, entropy, lyapunov
from sponge_dim.ifs import BlockIFS
from sponge_dim.measure import as_prob, block_from_rates, delta_p_sorted, floor_exp_log

LOG2, LOG3 = math.log(2), math.log(3)
# rows of M1 carry masses 2/3 and 1/3 under the uniform measure
H_Y = LOG3 - (2.0 / 3.0) * LOG2
DELTA_M1 = H_Y / LOG2 + (2.0 / 3.0) * LOG2 / LOG3


def test_frozen_oracle_values():
    assert abs(H_Y - 0.636514168) < 1e-9
    assert abs(DELTA_M1 - 1.33891567) < 1e-8


def test_lyapunov_examples():
    assert np.allclose(lyapunov(square(), np.full(4, 0.25)), [LOG2, LOG2])
    f = DiagonalIFS([[BaseMap(0.25, 0.0), BaseMap(0.5, 0.5)]], [(0,), (1,)])
    assert abs(lyapunov(f, [1.0, 0.0], 0) - math.log(4)) < 1e-15
    assert np.allclose(lyapunov(m1(), np.full(3, 1 / 3)), [LOG3, LOG2])


def test_entropy_examples():
    u = np.full(3, 1 / 3)
    assert abs(entropy(m1(), u, [0]) - LOG3) < 1e-15
    assert entropy(m1(), u, []) == 0.0
    assert abs(entropy(m1(), u, [1]) - H_Y) < 1e-15


def test_cond_entropy_examples():
    f, u = m1(), np.full(3, 1 / 3)
    assert abs(cond_entropy(f, u, [0, 1], [1]) - (LOG3 - H_Y)) < 1e-15
    assert abs(cond_entropy(f, u, [0, 1], []) - entropy(f, u, [0, 1])) < 1e-15
    assert cond_entropy(f, u, [1], [1]) == 0.0
    with pytest.raises(ValueError):
        cond_entropy(f, u, [1], [0])


def test_delta_p_examples():
    assert abs(delta_p(square()) - 2.0) < 1e-15
    assert abs(delta_p(moran()) - math.log(3) / math.log(4)) < 1e-15
    assert abs(delta_p(m1()) - DELTA_M1) < 1e-15
    assert abs(delta_p_integral(m1(), np.full(3, 1 / 3)) - DELTA_M1) < 1e-15


def test_as_prob_rejects_bad_vectors():
    with pytest.raises(ValueError):
        as_prob(m1(), [0.5, 0.5])
    with pytest.raises(ValueError):
        as_prob(m1(), [0.5, 0.6, -0.1])
    with pytest.raises(ValueError):
        as_prob(m1(), [0.5, 0.5, 0.1])


def random_pairs(seed, n):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        f = random_sponge(rng, int(rng.integers(1, 5)), max_maps=3)
        p = rng.dirichlet(np.full(f.size, 0.7))
        if rng.random() < 0.2 and f.size > 1:
            p[rng.integers(f.size)] = 0.0
            p /= p.sum()
        yield f, p


def test_order_free_and_sorted_forms_agree():
    for f, p in random_pairs(1, 100):
        assert abs(delta_p_integral(f, p) - delta_p_sorted(f, p)) <= 1e-12


def test_sorted_form_invariant_under_coordinate_permutation():
    for f, p in random_pairs(2, 30):
        perm = np.random.default_rng(0).permutation(f.d)
        g = DiagonalIFS([f.bases[i] for i in perm], [tuple(a[i] for i in perm) for a in f.E])
        assert abs(delta_p_sorted(f, p) - delta_p_sorted(g, p)) <= 1e-12


def test_delta_bounds_and_entropy_monotone():
    for f, p in random_pairs(3, 60):
        v = delta_p_sorted(f, p)
        assert -1e-15 <= v <= f.d + 1e-12
        h = f.subset_entropies(p)
        for a in range(1 << f.d):
            for b in range(1 << f.d):
                if a & b == a:
                    assert h[a] <= h[b] + 1e-12


def test_near_linearity_of_entropy():
    rng = np.random.default_rng(4)
    for f, _ in random_pairs(4, 30):
        J = int(rng.integers(2, 5))
        q = rng.dirichlet(np.ones(J))
        P = rng.dirichlet(np.ones(f.size), size=J)
        mix = q @ P
        hP = f.subset_entropies(P)
        hm = f.subset_entropies(mix)
        for big in range(1 << f.d):
            for small in range(1 << f.d):
                if small & big != small:
                    continue
                avg = q @ (hP[:, big] - hP[:, small])
                val = hm[big] - hm[small]
                assert avg - 1e-12 <= val <= avg + math.log(J) + 1e-12


def test_reduced_block_formula():
    b = BlockIFS(np.log([[2.0, 3.0], [1.0, 4.0]]), np.log([[9.0, 8.0], [5.0, 11.0]]))
    q = np.array([0.3, 0.7])
    H = -(q * np.log(q)).sum()
    h = b.subset_entropies(q)
    assert h[0] == 0.0
    assert abs(h[1] - (H + q @ np.log([2.0, 3.0]))) < 1e-15
    assert abs(h[3] - (H + q @ np.log([2.0, 3.0]) + q @ np.log([1.0, 4.0]))) < 1e-15
    assert np.allclose(lyapunov(b, q), [q @ np.log([9.0, 8.0]), q @ np.log([5.0, 11.0])])


def test_floor_exp_log():
    assert floor_exp_log(0.0) == 0.0
    assert abs(floor_exp_log(math.log(7.5)) - math.log(7)) < 1e-15
    assert floor_exp_log(40.0) == 40.0
    assert abs(floor_exp_log(29.9) - 29.9) < 1e-12
    with pytest.raises(ValueError):
        floor_exp_log(-1.0)
    b = block_from_rates(np.array([[1.0]]), np.array([[2.0]]), 3.0)
    assert b.logN[0, 0] == math.log(20) and b.X[0, 0] == 6.0
