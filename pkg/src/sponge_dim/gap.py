"""A three-dimensional sponge family whose Hausdorff dimension exceeds its dynamical dimension.

The sponge has three blocks, one per column ``j`` of two 3x3 matrices ``H``
(entropy rates) and ``X`` (contraction rates). Block ``j`` holds
``floor(exp(k H[i, j]))`` maps of ratio ``exp(-k X[i, j])`` in coordinate ``i``.
Measures uniform on blocks are vectors ``q`` in the 2-simplex and, as
``k -> oo``,

    DynD -> delta_0 = max_q sum_i H_i.q / X_i.q

while the circular cycle ``s_b = z(log(b)/gamma)`` gives a dimension
``delta_gamma`` that is larger by roughly ``gamma eps**2 sqrt(3)/4``.

Coordinates ``i`` are 1-based in formulas (row ``i`` carries ``2**i``) and
0-based in arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cycles import CircularCycle, CycleCalculus, delta_r
from .ifs import BlockIFS
from .measure import block_from_rates
from .numerics import golden_section_min, newton_bracketed
from .optimize import DimensionReport, OptimizerConfig, _fmt, dynamical_dimension, maximize_on_simplex

__all__ = [
    "GapMatrices",
    "GapParams",
    "N_CROSS",
    "RHO",
    "U",
    "V",
    "beta",
    "build_gap_ifs",
    "build_matrices",
    "delta0",
    "delta_gamma",
    "dim_difference",
    "eps_max",
    "gap_report",
    "quadratic_form_check",
    "solve_t0",
    "z",
    "Z",
    "Zprime",
]

RHO = 2.0 * math.pi
U = np.full(3, 1.0 / 3.0)
V = -math.sqrt(3.0) * U
# N q = v x q, so that Z' = N Z
N_CROSS = np.array([[0.0, -V[2], V[1]], [V[2], 0.0, -V[0]], [-V[1], V[0], 0.0]])
POW = 2.0 ** np.arange(1, 4)

K_DEFAULT = np.array([[1.0, 0.0, -1.0], [-1.0, 1.0, 0.0], [0.0, -1.0, 1.0]])
Y_DEFAULT = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0], [-1.0, 0.0, 1.0]])


def z(t):
    """Point on the inscribed circle of the simplex, period ``2 pi``."""
    return CircularCycle.z(t)


def Z(t):
    """Zero-mean antiderivative of ``z - u``."""
    return CircularCycle.Z(t)


def Zprime(t):
    return z(t) - U


@dataclass(frozen=True, eq=False)
class GapParams:
    epsilon: float = 0.05
    ell: int = 8
    k: float = 1e4
    Ktilde: np.ndarray = field(default_factory=lambda: K_DEFAULT.copy())
    Ytilde: np.ndarray = field(default_factory=lambda: Y_DEFAULT.copy())

    def __post_init__(self):
        Kt = np.asarray(self.Ktilde, dtype=float)
        Yt = np.asarray(self.Ytilde, dtype=float)
        object.__setattr__(self, "Ktilde", Kt)
        object.__setattr__(self, "Ytilde", Yt)
        if Kt.shape != (3, 3) or Yt.shape != (3, 3):
            raise ValueError("Ktilde and Ytilde must be 3x3")
        if int(self.ell) != self.ell or self.ell < 1:
            raise ValueError("ell must be a positive integer")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        if not self.k > 0:
            raise ValueError("k must be positive")
        if np.max(np.abs(Kt @ U)) > 1e-14 or np.max(np.abs(Yt @ U)) > 1e-14:
            raise ValueError("rows of Ktilde and Ytilde must sum to zero")
        if np.max(np.abs(Kt.sum(axis=0))) > 1e-14:
            raise ValueError("rows of Ktilde must add up to the zero vector")

    @property
    def gamma(self) -> float:
        return math.log(2.0) / (self.ell * RHO)

    @property
    def lam(self) -> float:
        return 2.0 ** (1.0 / self.ell)

    @property
    def K(self) -> np.ndarray:
        return self.epsilon * self.Ktilde

    @property
    def Y(self) -> np.ndarray:
        return 1.0 + self.epsilon * self.Ytilde

    def prediction(self) -> float:
        """Leading-order size of the limiting gap."""
        return self.gamma * self.epsilon ** 2 * math.sqrt(3.0) / 4.0


@dataclass(frozen=True, eq=False)
class GapMatrices:
    H: np.ndarray
    X: np.ndarray

    @property
    def K(self) -> np.ndarray:
        return (self.H - 0.5 * self.X) / POW[:, None]

    @property
    def Y(self) -> np.ndarray:
        return self.X / POW[:, None]


def _violations(H, X):
    out = []
    for i in range(3):
        for j in range(3):
            if not 0 < H[i, j]:
                out.append(f"H[{i + 1}][{j + 1}] = {H[i, j]:.6g} is not positive")
            if not H[i, j] < X[i, j]:
                out.append(f"H[{i + 1}][{j + 1}] = {H[i, j]:.6g} >= X[{i + 1}][{j + 1}] = {X[i, j]:.6g}")
            if i < 2 and not X[i, j] < X[i + 1, j]:
                out.append(f"X[{i + 1}][{j + 1}] = {X[i, j]:.6g} >= X[{i + 2}][{j + 1}] = {X[i + 1, j]:.6g}")
    return out


def build_matrices(params: GapParams) -> GapMatrices:
    """``X_i = 2**i Y_i`` and ``H_i = 2**i K_i + X_i / 2``."""
    X = POW[:, None] * params.Y
    H = POW[:, None] * params.K + 0.5 * X
    bad = _violations(H, X)
    if bad:
        raise ValueError(f"epsilon too large: {bad[0]}")
    return GapMatrices(H, X)


def _plane_points(n: int, seed: int):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    q = rng.standard_normal((n, 3))
    q -= q.mean(axis=1, keepdims=True)
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def quadratic_form_check(params: GapParams, points: int = 100, seed: int = 0) -> dict:
    """Traces and proportionality constants of the two quadratic forms on the zero-sum plane.

    ``Q1(q) = sum_i (Kt_i.q)(Yt_i.q)`` and ``Q2(q) = sum_i (Kt_i.Nq)(Yt_i.q)``;
    on the plane both are multiples of ``|q|**2``.
    """
    Kt, Yt = params.Ktilde, params.Ytilde
    q = _plane_points(points, seed)
    Q1 = np.einsum("ni,ni->n", q @ Kt.T, q @ Yt.T)
    Q2 = np.einsum("ni,ni->n", (q @ N_CROSS.T) @ Kt.T, q @ Yt.T)
    c1, c2 = float(Q1.mean()), float(Q2.mean())
    return {
        "trace_KY": float(np.sum(Kt * Yt)),
        "trace_KNY": float(np.sum((Kt @ N_CROSS) * Yt)),
        "c1": c1,
        "c2": c2,
        "c1_residual": float(np.max(np.abs(Q1 - c1))),
        "c2_residual": float(np.max(np.abs(Q2 - c2))),
        "signs_ok": bool(c1 > 0 and c2 < 0),
    }


def solve_t0(params: GapParams, t, i: int):
    """Root ``s`` of ``t = s + Y_i.Z(s)`` for coordinate ``i`` in 1..3 (vectorized in ``t``)."""
    if i not in (1, 2, 3):
        raise ValueError("coordinate index runs from 1 to 3")
    t = np.asarray(t, dtype=float)
    Yi = params.Y[i - 1]
    # |Y_i.Z| <= |Y_i - mean| * |Z| brackets the root
    slack = np.linalg.norm(Yi - Yi.mean()) * math.sqrt(1.0 / 6.0) + 1e-12

    def fdf(s):
        return s + Z(s) @ Yi - t, 1.0 + Zprime(s) @ Yi

    s = newton_bracketed(fdf, t - slack, t + slack, atol=1e-16)
    return s if s.ndim else float(s)


def beta(params: GapParams, t):
    """``sum_i K_i . Z(t_{i,0})``."""
    t = np.asarray(t, dtype=float)
    out = sum(Z(solve_t0(params, t, i)) @ params.K[i - 1] for i in (1, 2, 3))
    return out if np.ndim(out) else float(out)


def dim_difference(mats: GapMatrices, q):
    """``sum_i H_i.q / X_i.q`` for a batch of ``q``."""
    q = np.asarray(q, dtype=float)
    return ((q @ mats.H.T) / (q @ mats.X.T)).sum(axis=-1)


def delta0(params: GapParams, samples: int = 10_000, cfg: OptimizerConfig | None = None):
    """``max_q sum_i H_i.q / X_i.q`` by random sampling plus simplex descent.

    Returns ``(value, argmax)``.
    """
    cfg = cfg or OptimizerConfig(starts=4)
    mats = build_matrices(params)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 11]))
    Q = rng.dirichlet(np.ones(3), size=samples)
    vals = dim_difference(mats, Q)
    starts = [np.full((1, 3), 1.0 / 3.0)] + [Q[i][None] for i in np.argsort(-vals)[: cfg.starts - 1]]
    runs = maximize_on_simplex(lambda q: dim_difference(mats, q), 3, starts, cfg)
    if runs[0].value >= vals.max():
        return runs[0].value, runs[0].x
    return float(vals.max()), Q[np.argmax(vals)]


def delta_gamma(params: GapParams, grid: int = 256):
    """Limit ``k -> oo`` of the circular cycle dimension.

    ``inf_B sum_i H_i.S_{B_i} / B`` where ``S`` is the accumulated circular
    cycle and ``X_i.S_{B_i} = B``. Returns ``(value, argmin B)``.
    """
    mats = build_matrices(params)
    cyc = CircularCycle(params.gamma)
    L = cyc.L

    def value(y):
        B = np.exp(y)
        tot = np.zeros_like(B)
        for i in range(3):
            Xi = mats.X[i]

            def fdf(v, Xi=Xi):
                x = np.exp(v)
                return np.log(cyc.accumulate(x) @ Xi / B), x * (cyc.values_at(x) @ Xi) / (cyc.accumulate(x) @ Xi)

            Bi = np.exp(newton_bracketed(fdf, y - np.log(Xi.max()) - 1e-9, y - np.log(Xi.min()) + 1e-9))
            tot = tot + cyc.accumulate(Bi) @ mats.H[i]
        return tot / B

    y = np.linspace(0.0, L, grid, endpoint=False)
    vals = value(y)
    left, right = np.roll(vals, 1), np.roll(vals, -1)
    cand = np.nonzero((vals <= left) & (vals <= right))[0]
    cand = cand[np.argsort(vals[cand], kind="stable")][:3]
    step = L / grid
    xs, fs = golden_section_min(value, y[cand] - step, y[cand] + step, 1e-8)
    j = int(np.argmin(fs))
    return float(fs[j]), float(np.exp(np.mod(xs[j], L)))


def build_gap_ifs(params: GapParams) -> BlockIFS:
    mats = build_matrices(params)
    b = block_from_rates(mats.H, mats.X, params.k)
    slack = b.logN - b.X + math.log(3.0)
    if np.any(slack >= 0):
        i, j = np.unravel_index(np.argmax(slack), slack.shape)
        raise ValueError(
            f"k too small: N[{i + 1}][{j + 1}] * r[{i + 1}][{j + 1}] = "
            f"{math.exp(b.logN[i, j] - b.X[i, j]):.6g} is not below 1/3"
        )
    return BlockIFS(b.logN, b.X, {"k": params.k, "epsilon": params.epsilon, "ell": params.ell})


def eps_max(grid=None, samples: int = 10_000, seed: int = 0) -> float:
    """Largest grid value of epsilon for which the construction's inequalities hold."""
    if grid is None:
        grid = np.geomspace(1e-3, 1.0, 61)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
    Q = rng.dirichlet(np.ones(3), size=samples)
    best = 0.0
    for eps in grid:
        try:
            mats = build_matrices(GapParams(epsilon=float(eps)))
        except ValueError:
            continue
        if np.all(dim_difference(mats, Q) <= 1.5 + 1e-12):
            best = max(best, float(eps))
    return best


def gap_report(params: GapParams, cfg: OptimizerConfig | None = None, grid: int = 256) -> dict:
    """Every quantity of the construction with its residual, as a JSON-ready dict."""
    cfg = cfg or OptimizerConfig()
    mats = build_matrices(params)
    ifs = build_gap_ifs(params)
    dyn: DimensionReport = dynamical_dimension(ifs, cfg)
    cyc = CircularCycle(params.gamma)
    dr = delta_r(ifs, cyc, grid=grid, calc=CycleCalculus(ifs, cyc))
    d0, q0 = delta0(params)
    dg, Bg = delta_gamma(params, grid)
    ts = np.linspace(0.0, RHO, 1024, endpoint=False)
    bvals = beta(params, ts)
    qf = quadratic_form_check(params)
    k = params.k
    gap_k = dr.value - dyn.value
    return _fmt({
        "params": {"epsilon": params.epsilon, "ell": params.ell, "k": k, "gamma": params.gamma,
                   "lambda": params.lam},
        "H": mats.H, "X": mats.X,
        "identities": {
            "Hu_minus_2^(i-1)": float(np.max(np.abs(mats.H @ U - POW / 2))),
            "Xu_minus_2^i": float(np.max(np.abs(mats.X @ U - POW))),
            **qf,
        },
        "beta": {"min": float(bvals.min()), "max": float(bvals.max()),
                 "positive": bool(bvals.min() > 0)},
        "delta0": d0,
        "delta0_argmax": q0,
        "delta_gamma": dg,
        "delta_gamma_argmin_B": Bg,
        "gap_limit": dg - d0,
        "prediction": params.prediction(),
        "dynamical_dimension": dyn.value,
        "dynamical_dimension_argmax": dyn.argmax["p"],
        "delta_r": dr.value,
        "delta_r_argmin_B": dr.argmin,
        "delta_r_grid_residual": dr.grid_residual,
        "gap_finite_k": gap_k,
        "gap": gap_k,
        "gap_positive": bool(gap_k > 0),
        "note": None if gap_k > 0 else "non-positive gap at this k: the parameters do not certify HD > DynD",
    })
