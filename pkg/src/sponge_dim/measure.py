"""Lyapunov exponents, coordinate entropies and the Bernoulli dimension formula."""

from __future__ import annotations

import math

import numpy as np

from .ifs import BlockIFS, mask_of

__all__ = [
    "as_prob",
    "block_from_rates",
    "cond_entropy",
    "delta_p",
    "delta_p_integral",
    "delta_p_sorted",
    "entropy",
    "floor_exp_log",
    "lyapunov",
    "sorted_chain",
]


def as_prob(ifs, p=None) -> np.ndarray:
    """Validated probability vector for ``ifs`` (uniform if ``p`` is None)."""
    if p is None:
        return np.full(ifs.size, 1.0 / ifs.size)
    p = np.asarray(p, dtype=float)
    if p.shape != (ifs.size,):
        raise ValueError(f"expected {ifs.size} weights, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("weights must be finite and nonnegative")
    if abs(p.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights sum to {p.sum():.17g}, not 1")
    return p


def lyapunov(ifs, p, i=None):
    """``chi_i(p) = -sum_a p(a) log|phi'_{a,i}|``; all coordinates when ``i`` is None.

    ``p`` may be any nonnegative mass vector (the formula is linear).
    """
    chi = np.asarray(p, dtype=float) @ ifs.log_contractions
    return chi if i is None else chi[..., i]


def entropy(ifs, p, I) -> float:
    """``h_I(p) = -sum_a p(a) log p([a]_I)``."""
    return float(ifs.subset_entropies(np.asarray(p, dtype=float))[mask_of(I)])


def cond_entropy(ifs, p, I_big, I_small) -> float:
    """``h(I' | I; p) = h_{I'}(p) - h_I(p)`` for ``I`` contained in ``I'``."""
    big, small = mask_of(I_big), mask_of(I_small)
    if small & ~big:
        raise ValueError("conditioning set is not contained in the target set")
    h = ifs.subset_entropies(np.asarray(p, dtype=float))
    return float(h[big] - h[small])


def sorted_chain(values, descending=False):
    """Stable coordinate order and the cumulative bitmasks ``I_{<=k}`` along it."""
    values = np.asarray(values, dtype=float)
    key = -values if descending else values
    order = np.argsort(key, axis=-1, kind="stable")
    masks = np.cumsum(np.left_shift(1, order), axis=-1)
    return order, masks


def delta_p_sorted(ifs, p):
    """``sum_i h(I_{<=i} | I_{<=i-1}; p) / chi_i(p)`` with chi sorted ascending.

    Vectorized over leading axes of ``p``.
    """
    p = np.asarray(p, dtype=float)
    chi = lyapunov(ifs, p)
    if np.any(chi <= 0):
        raise ValueError("a Lyapunov exponent vanishes")
    h = ifs.subset_entropies(p)
    order, masks = sorted_chain(chi)
    if p.ndim == 1:
        gain = np.diff(h[masks], prepend=0.0)
        return float((gain / chi[order]).sum())
    prev = np.concatenate([np.zeros_like(masks[..., :1]), masks[..., :-1]], axis=-1)
    gain = np.take_along_axis(h, masks, -1) - np.take_along_axis(h, prev, -1)
    return (gain / np.take_along_axis(chi, order, -1)).sum(axis=-1)


def delta_p_integral(ifs, p) -> float:
    """``int_0^inf h({i : b <= 1/chi_i(p)}; p) db`` as a piecewise-constant integral.

    Independent of any ordering of the coordinates: the integrand is
    evaluated on each interval between consecutive distinct breakpoints.
    """
    p = np.asarray(p, dtype=float)
    chi = lyapunov(ifs, p)
    if np.any(chi <= 0):
        raise ValueError("a Lyapunov exponent vanishes")
    h = ifs.subset_entropies(p)
    cut = 1.0 / chi
    total, left = 0.0, 0.0
    for right in np.unique(cut):
        active = mask_of(np.nonzero(cut >= right)[0])
        total += h[active] * (right - left)
        left = right
    return float(total)


def delta_p(ifs, p=None) -> float:
    """Hausdorff dimension formula for the Bernoulli measure of ``p``."""
    p = as_prob(ifs, p)
    return float(delta_p_sorted(ifs, p))


def floor_exp_log(x: float) -> float:
    """``log(floor(exp(x)))`` for ``x >= 0``; equals ``x`` to within ``e**-30`` past 30."""
    if x < 0:
        raise ValueError("need x >= 0 so that the count is at least 1")
    if x > 30.0:
        return float(x)
    return math.log(math.floor(math.exp(x)))


def block_from_rates(H, X, k: float) -> BlockIFS:
    """Block sponge with ``N = floor(exp(k H))`` and ``r = exp(-k X)``."""
    H = np.asarray(H, dtype=float)
    X = np.asarray(X, dtype=float)
    logN = np.vectorize(floor_exp_log)(k * H)
    return BlockIFS(logN, k * X, meta={"k": float(k)})
