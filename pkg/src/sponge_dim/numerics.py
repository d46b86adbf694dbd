"""Small numerical kernels shared by the dimension routines.

Quadrature here is a fixed tanh-sinh rule: every integrand we meet is a sum of
``-m log m`` terms where the masses ``m`` are smooth along a panel and may
vanish only at panel endpoints, which is exactly the case the double
exponential rule handles well.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import entr

__all__ = [
    "TS_FRACTIONS",
    "TS_WEIGHTS",
    "entropy_of",
    "golden_section_min",
    "increasing_root",
    "newton_bracketed",
    "project_simplex",
]


def _tanh_sinh(step: float = 1.0 / 12.0, umax: float = 3.4):
    k = np.arange(-int(umax / step), int(umax / step) + 1)
    u = k * step
    s = 0.5 * math.pi * np.sinh(u)
    # fraction along [0, 1]; written via exp to keep precision at both ends
    frac = 1.0 / (1.0 + np.exp(-2.0 * s))
    w = 0.5 * step * 0.5 * math.pi * np.cosh(u) / np.cosh(s) ** 2
    keep = w > 1e-300
    return frac[keep], w[keep]


# nodes on [0, 1] and weights summing to 1
TS_FRACTIONS, TS_WEIGHTS = _tanh_sinh()


def entropy_of(w, axis=-1):
    """Shannon entropy ``-sum w log w`` with ``0 log 0 = 0``."""
    return entr(np.asarray(w, dtype=float)).sum(axis=axis)


def project_simplex(x):
    """Euclidean projection of ``x`` (last axis) onto the probability simplex."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if x.ndim == 1:
        # single point: the optimizer's hot path
        u = np.sort(x)[::-1]
        css = np.cumsum(u) - 1.0
        rho = np.flatnonzero(u * np.arange(1, n + 1) > css)[-1]
        out = np.maximum(x - css[rho] / (rho + 1.0), 0.0)
        return out / out.sum()
    u = -np.sort(-x, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    idx = np.arange(1, n + 1)
    cond = u - css / idx > 0
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    out = np.maximum(x - theta, 0.0)
    return out / out.sum(axis=-1, keepdims=True)


def increasing_root(f, target, lo, hi, iters=200, rtol=1e-15, atol=1e-300):
    """Vectorized bisection for ``f(x) = target`` with ``f`` increasing.

    ``lo`` and ``hi`` must bracket the root elementwise. Returns the midpoint
    of the final bracket.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    target = np.broadcast_to(np.asarray(target, dtype=float), lo.shape)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = f(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= rtol * np.maximum(np.abs(lo), np.abs(hi)) + atol):
            break
    return 0.5 * (lo + hi)


def newton_bracketed(fdf, lo, hi, iters=60, atol=1e-15, x0=None):
    """Vectorized safeguarded Newton for an increasing ``f`` with ``f(lo) < 0 < f(hi)``.

    ``fdf(x)`` returns ``(f(x), f'(x))``. Steps leaving the current bracket
    fall back to bisection. ``x0`` (default: bracket midpoints) starts the iteration.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    x = 0.5 * (lo + hi) if x0 is None else np.clip(np.asarray(x0, dtype=float), lo, hi)
    for _ in range(iters):
        f, df = fdf(x)
        lo = np.where(f < 0, x, lo)
        hi = np.where(f > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / df
        nxt = x - step
        bad = ~np.isfinite(nxt) | (nxt <= lo) | (nxt >= hi)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        done = np.all((np.abs(nxt - x) <= atol * np.maximum(1.0, np.abs(x))) | (f == 0))
        x = np.where(f == 0, x, nxt)
        if done:
            break
    return x


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_min(f, a, b, tol):
    """Vectorized golden-section search.

    ``f`` maps an array of abscissae to values; ``a`` and ``b`` are arrays of
    bracket ends, refined in lockstep until every bracket is shorter than
    ``tol`` (array or scalar). Returns ``(x, f(x))`` at the best point seen
    in each bracket.
    """
    a = np.array(a, dtype=float, copy=True)
    b = np.array(b, dtype=float, copy=True)
    tol = np.broadcast_to(np.asarray(tol, dtype=float), a.shape)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while np.any(b - a > tol):
        left = fc < fd
        # left: keep [a, d]; otherwise keep [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - _INV_PHI * (b - a)
        new_d = a + _INV_PHI * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        fc_old, fd_old = fc, fd
        # one fresh evaluation per bracket; evaluate both slots and pick
        probe = np.where(left, c_next, d_next)
        fp = f(probe)
        fc = np.where(left, fp, fd_old)
        fd = np.where(left, fc_old, fp)
        c, d = c_next, d_next
    x = np.where(fc < fd, c, d)
    return x, np.minimum(fc, fd)
