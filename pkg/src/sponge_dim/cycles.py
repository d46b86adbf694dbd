"""Exponentially periodic cycles and the dimension of their pseudo-Bernoulli measures.

A cycle ``r`` maps ``b > 0`` to a weight vector with ``r(lam * b) = r(b)``.
Everything here works in the log variable ``t = log b``: one period is
``t in [0, L)`` with ``L = log lam``, cut into panels on which the cycle is
smooth. Integrals ``int_0^x f(r_b) db`` are reduced to one period through

    F(lam * x) = lam * F(x),    F(1) = (int_1^lam f(r_b) db) / (lam - 1),

so no quadrature ever runs over infinitely many periods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from .ifs import BlockIFS
from .measure import as_prob, delta_p, sorted_chain
from .numerics import TS_FRACTIONS, TS_WEIGHTS, golden_section_min, newton_bracketed

__all__ = [
    "CircularCycle",
    "ConstantCycle",
    "Cycle",
    "CycleCalculus",
    "DeltaR",
    "DeltaRB",
    "KnotCycle",
    "ScaleSolution",
    "accumulate",
    "delta_r",
    "delta_rB",
    "delta_rB_forms",
    "is_nondegenerate",
    "solve_scale",
]


def _expm1_ratio(w):
    """``int_0^w (s/w) e^s ds = ((w - 1) expm1(w) + w) / w`` without cancellation."""
    w = np.asarray(w, dtype=float)
    small = w < 1e-3
    ws = np.where(small, w, 0.0)
    series = ws * (0.5 + ws * (1.0 / 3.0 + ws * (0.125 + ws / 30.0)))
    wl = np.where(small, 1.0, w)
    direct = ((wl - 1.0) * np.expm1(wl) + wl) / wl
    return np.where(small, series, direct)


class Cycle:
    """Base class. Subclasses set ``lam`` and implement the hooks below."""

    kind = "abstract"

    @cached_property
    def L(self) -> float:
        return math.log(self.lam)

    @property
    def panel_edges(self) -> np.ndarray:
        raise NotImplementedError

    def panel_values(self, m, frac):
        """Weights at ``t = edges[m] + frac * width[m]`` (broadcasting)."""
        raise NotImplementedError

    def accumulate(self, x):
        """``R_x = int_0^x r_b db`` for an array of ``x > 0``; shape ``x.shape + (size,)``."""
        raise NotImplementedError

    def _reduce(self, x):
        """Split ``log x = j L + tau`` with ``tau`` in ``[0, L)``."""
        lx = np.log(np.asarray(x, dtype=float))
        j = np.floor(lx / self.L)
        tau = lx - j * self.L
        over = tau >= self.L
        j = np.where(over, j + 1, j)
        tau = np.clip(np.where(over, tau - self.L, tau), 0.0, self.L)
        return j, tau

    def _locate(self, tau):
        edges = self.panel_edges
        m = np.clip(np.searchsorted(edges, tau, side="right") - 1, 0, len(edges) - 2)
        return m, tau - edges[m]

    def values_at(self, b):
        b = np.asarray(b, dtype=float)
        _, tau = self._reduce(b)
        m, off = self._locate(tau)
        width = np.diff(self.panel_edges)[m]
        return self.panel_values(m, off / width)


@dataclass(frozen=True, eq=False)
class ConstantCycle(Cycle):
    p: np.ndarray
    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))

    @property
    def lam(self) -> float:
        return 1.0

    def values_at(self, b):
        return np.broadcast_to(self.p, np.shape(b) + self.p.shape).copy()

    def accumulate(self, x):
        return np.asarray(x, dtype=float)[..., None] * self.p

    def to_dict(self):
        return {"lambda": 1.0, "form": "constant", "p": self.p.tolist()}


@dataclass(frozen=True, eq=False)
class KnotCycle(Cycle):
    """Piecewise linear in ``log b`` through ``knots[m]`` at ``b = lam**(m/n)``."""

    lam: float
    knots: np.ndarray
    kind = "knots"

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.knots, dtype=float))
        object.__setattr__(self, "knots", k)
        if not self.lam > 1.0:
            raise ValueError("knot cycles need lambda > 1")
        if k.shape[0] < 2:
            raise ValueError("knot cycles need at least 2 knots")
        if np.any(k < 0) or np.any(np.abs(k.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("every knot must be a probability vector")

    @property
    def n(self) -> int:
        return self.knots.shape[0]

    @cached_property
    def panel_edges(self):
        return np.linspace(0.0, self.L, self.n + 1)

    def panel_values(self, m, frac):
        m = np.asarray(m)
        frac = np.asarray(frac, dtype=float)[..., None]
        a = self.knots[m % self.n]
        b = self.knots[(m + 1) % self.n]
        return a + (b - a) * frac

    @cached_property
    def _tables(self):
        w = self.L / self.n
        edges = self.panel_edges
        K = self.knots
        Kn = np.roll(K, -1, axis=0)
        full = np.exp(edges[:-1])[:, None] * (K * math.expm1(w) + (Kn - K) * float(_expm1_ratio(w)))
        cum = np.vstack([np.zeros(K.shape[1]), np.cumsum(full, axis=0)])
        return edges, K, Kn, w, cum

    def _accum_period(self, tau):
        edges, K, Kn, w, cum = self._tables
        m, off = self._locate(tau)
        part = np.exp(edges[m])[..., None] * (
            K[m] * np.expm1(off)[..., None]
            + (Kn[m] - K[m]) * ((off / w) * _expm1_ratio(off))[..., None]
        )
        return cum[m] + part, cum[-1]

    def accumulate(self, x):
        j, tau = self._reduce(x)
        part, period = self._accum_period(tau)
        return self.lam ** j[..., None] * (period / (self.lam - 1.0) + part)

    def to_dict(self):
        return {"lambda": self.lam, "form": "knots", "knots": self.knots.tolist()}


@dataclass(frozen=True, eq=False)
class CircularCycle(Cycle):
    """``s_b = z(log(b) / gamma)`` on the inscribed circle of the 3-simplex.

    Weights are reduced block coordinates, so the cycle is meant for a
    :class:`BlockIFS` with ``J = 3``.
    """

    gamma: float
    kind = "circular"
    phases = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)
    # angle panels of pi/12 put the zeros of z (pi/3, pi, 5pi/3) on edges
    n_panels = 24

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @cached_property
    def lam(self) -> float:
        return math.exp(2.0 * math.pi * self.gamma)

    @cached_property
    def panel_edges(self):
        return self.gamma * np.linspace(0.0, 2.0 * math.pi, self.n_panels + 1)

    @staticmethod
    def z(t):
        t = np.asarray(t, dtype=float)[..., None]
        ph = np.array(CircularCycle.phases)
        return (2.0 / 3.0) * np.cos(0.5 * (t + ph)) ** 2

    @staticmethod
    def Z(t):
        t = np.asarray(t, dtype=float)[..., None]
        return np.sin(t + np.array(CircularCycle.phases)) / 3.0

    def panel_values(self, m, frac):
        width = 2.0 * math.pi / self.n_panels
        angle = (np.asarray(m) + np.asarray(frac, dtype=float)) * width
        return self.z(angle)

    def accumulate(self, x):
        x = np.asarray(x, dtype=float)
        g = self.gamma
        T = np.log(x) / g
        arg = T[..., None] + np.array(self.phases)
        osc = g * (g * np.cos(arg) + np.sin(arg)) / (1.0 + g * g)
        return (x[..., None] / 3.0) * (1.0 + osc)

    def to_dict(self):
        return {"lambda": self.lam, "form": "circular", "gamma": self.gamma}


@dataclass(frozen=True)
class ScaleSolution:
    B: float
    Bi: np.ndarray
    residual: float


@dataclass(frozen=True)
class DeltaRB:
    B: float
    Bi: np.ndarray
    telescoped: float
    segments: float
    upper_bound: float


@dataclass
class DeltaR:
    value: float
    argmin: float
    minima: list = field(default_factory=list)
    grid_residual: float = 0.0
    degenerate: bool = False


class CycleCalculus:
    """Cached integral tables for one (IFS, cycle) pair."""

    def __init__(self, ifs, cycle: Cycle):
        self.ifs = ifs
        self.cycle = cycle
        self.X = ifs.log_contractions
        if isinstance(cycle, ConstantCycle):
            self._h_const = ifs.subset_entropies(cycle.p)
            return
        edges = cycle.panel_edges
        widths = np.diff(edges)
        m = np.arange(len(widths))
        W = cycle.panel_values(m[:, None], TS_FRACTIONS[None, :])
        t = edges[:-1, None] + widths[:, None] * TS_FRACTIONS[None, :]
        h = ifs.subset_entropies(W)
        G = np.einsum("p,k,pk,pkm->pm", widths, TS_WEIGHTS, np.exp(t), h)
        self._cum = np.vstack([np.zeros(G.shape[1]), np.cumsum(G, axis=0)])
        self._widths = widths

    def R(self, x):
        return self.cycle.accumulate(x)

    def chi_R(self, x):
        return self.R(x) @ self.X

    def F(self, x):
        """``int_0^x h_I(r_b) db`` for every coordinate set; shape ``x.shape + (2**d,)``."""
        x = np.asarray(x, dtype=float)
        if isinstance(self.cycle, ConstantCycle):
            return x[..., None] * self._h_const
        cyc = self.cycle
        j, tau = cyc._reduce(x)
        m, off = cyc._locate(tau)
        frac = (off / self._widths[m])[..., None] * TS_FRACTIONS
        W = cyc.panel_values(m[..., None], frac)
        t = cyc.panel_edges[m][..., None] + off[..., None] * TS_FRACTIONS
        h = self.ifs.subset_entropies(W)
        part = off[..., None] * np.einsum("k,...k,...km->...m", TS_WEIGHTS, np.exp(t), h)
        base = self._cum[-1] / (cyc.lam - 1.0)
        return cyc.lam ** j[..., None] * (base + self._cum[m] + part)

    def solve_scale(self, B):
        """``B_i`` with ``chi_i(R_{B_i}) = B`` for every coordinate; shape ``B.shape + (d,)``."""
        B = np.asarray(B, dtype=float)
        if isinstance(self.cycle, ConstantCycle):
            return B[..., None] / (self.cycle.p @ self.X)
        # mean weight over a period gives R_x ~ x * mean, a close first guess
        lam = self.cycle.lam
        mean = (self.cycle.accumulate(np.array(lam)) - self.cycle.accumulate(np.array(1.0))) / (lam - 1.0)
        guess = np.log(B[..., None] / (mean @ self.X))
        XT = self.X.T  # d x size
        logB = np.log(B)[..., None]

        def fdf(y):
            x = np.exp(y)
            chi = (self.cycle.accumulate(x) * XT).sum(-1)
            rate = (self.cycle.values_at(x) * XT).sum(-1)
            return np.log(chi) - logB, x * rate / chi

        lo = logB - np.log(self.X.max(axis=0)) - 1e-9
        hi = logB - np.log(self.X.min(axis=0)) + 1e-9
        return np.exp(newton_bracketed(fdf, lo, hi, x0=guess))

    def delta_rB(self, B):
        """Telescoped form ``(1/B) sum_i int_0^{B_i} h(I_<=i | I_<=i-1; r_b) db``."""
        B = np.asarray(B, dtype=float)
        Bi = self.solve_scale(B)
        order, masks = sorted_chain(Bi, descending=True)
        prev = np.concatenate([np.zeros_like(masks[..., :1]), masks[..., :-1]], axis=-1)
        Fv = self.F(np.take_along_axis(Bi, order, -1))  # (..., d, 2**d), sorted
        top = np.take_along_axis(Fv, masks[..., None], -1)[..., 0]
        low = np.take_along_axis(Fv, prev[..., None], -1)[..., 0]
        return (top - low).sum(axis=-1) / B

    def F_quad(self, x, mask: int) -> float:
        """Same integral as :meth:`F` for one set, by adaptive quadrature in ``b``."""
        cyc = self.cycle
        if isinstance(cyc, ConstantCycle):
            return float(x * self._h_const[mask])
        if mask == 0:
            return 0.0

        def h(b):
            return float(self.ifs.subset_entropies(cyc.values_at(b))[mask])

        def over(lo_t, hi_t):
            pts = [e for e in cyc.panel_edges if lo_t < e < hi_t]
            val, _ = integrate.quad(
                h, math.exp(lo_t), math.exp(hi_t), points=[math.exp(p) for p in pts] or None,
                epsabs=1e-14, epsrel=1e-11, limit=200,
            )
            return val

        j, tau = cyc._reduce(np.array(x))
        period = over(0.0, cyc.L)
        return float(cyc.lam ** float(j) * (period / (cyc.lam - 1.0) + over(0.0, float(tau))))


def accumulate(ifs, r: Cycle, B):
    """``R_B = int_0^B r_b db``."""
    return r.accumulate(np.asarray(B, dtype=float))


def solve_scale(ifs, r: Cycle, B: float) -> ScaleSolution:
    calc = CycleCalculus(ifs, r)
    Bi = calc.solve_scale(np.array(B, dtype=float))
    resid = float(np.max(np.abs(np.diagonal(calc.chi_R(Bi)) - B)) / B)
    return ScaleSolution(float(B), Bi, resid)


def delta_rB(ifs, r: Cycle, B, calc: CycleCalculus | None = None):
    calc = calc or CycleCalculus(ifs, r)
    out = calc.delta_rB(np.asarray(B, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def delta_rB_forms(ifs, r: Cycle, B: float, calc: CycleCalculus | None = None) -> DeltaRB:
    """Both evaluation routes for ``delta(r, B)`` plus the averaged upper bound.

    ``segments`` integrates ``h({i : b <= B_i}; r_b)`` piece by piece between
    consecutive ``B_i`` with adaptive quadrature in ``b``; ``telescoped`` is
    the conditional-entropy sum from the cached tables.
    """
    calc = calc or CycleCalculus(ifs, r)
    Bi = calc.solve_scale(np.array(B, dtype=float))
    order, masks = sorted_chain(Bi, descending=True)
    d = len(Bi)
    seg = 0.0
    for k in range(d):
        hi = Bi[order[k]]
        lo = Bi[order[k + 1]] if k + 1 < d else 0.0
        if hi > lo:
            F_hi = calc.F_quad(hi, int(masks[k]))
            F_lo = calc.F_quad(lo, int(masks[k])) if lo > 0 else 0.0
            seg += F_hi - F_lo
    seg /= B
    tele = float(calc.delta_rB(np.array(B, dtype=float)))
    ub = 0.0
    prev = 0
    for k in range(d):
        c = order[k]
        Rhat = calc.R(np.array(Bi[c])) / Bi[c]
        h = calc.ifs.subset_entropies(Rhat)
        ub += (h[masks[k]] - h[prev]) / (Rhat @ calc.X)[c]
        prev = int(masks[k])
    return DeltaRB(float(B), Bi, tele, float(seg), float(ub))


def delta_r(ifs, r: Cycle, grid: int = 256, rtol: float = 1e-8, calc: CycleCalculus | None = None) -> DeltaR:
    """``inf_{B in [1, lam]} delta(r, B)`` by a log-uniform grid and golden-section refinement."""
    if isinstance(r, ConstantCycle):
        v = delta_p(ifs, as_prob(ifs, r.p))
        return DeltaR(v, 1.0, [1.0], 0.0, False)
    calc = calc or CycleCalculus(ifs, r)
    L = r.L
    y = np.linspace(0.0, L, grid, endpoint=False)
    vals = calc.delta_rB(np.exp(y))
    left, right = np.roll(vals, 1), np.roll(vals, -1)
    resid = float(np.max(np.abs(left - 2 * vals + right)))
    cand = np.nonzero((vals <= left) & (vals <= right))[0]
    cand = cand[np.argsort(vals[cand], kind="stable")][:3]
    step = L / grid
    xs, fs = golden_section_min(
        lambda yy: calc.delta_rB(np.exp(yy)), y[cand] - step, y[cand] + step, rtol
    )
    best = float(min(fs.min(), vals.min()))
    if fs.min() <= vals.min():
        arg = float(xs[np.argmin(fs)])
    else:
        arg = float(y[np.argmin(vals)])
    arg = float(np.exp(np.mod(arg, L)))
    minima = sorted(
        float(np.exp(np.mod(x, L))) for x, f in zip(xs, fs) if f - best <= 1e-8
    )
    return DeltaR(best, arg, minima, resid, not is_nondegenerate(ifs, r))


def is_nondegenerate(ifs, r: Cycle) -> bool:
    if isinstance(r, (ConstantCycle, CircularCycle)):
        return True  # cosine zeros are isolated
    if isinstance(r, KnotCycle):
        K = r.knots
        used = np.any(K > 0, axis=0)
        zero = K <= 0
        flat = zero & np.roll(zero, -1, axis=0)
        return not np.any(flat[:, used])
    raise TypeError(f"unknown cycle type {type(r).__name__}")
