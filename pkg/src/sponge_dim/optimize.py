"""Variational dimensions: sup over Bernoulli measures and over cycles.

Maximization over a probability simplex is done with Nelder-Mead in
coordinates of the sum-zero plane; every trial point is projected back onto
the simplex before evaluation, so the search never leaves the feasible set.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize

from .cycles import CircularCycle, ConstantCycle, CycleCalculus, KnotCycle, delta_r, is_nondegenerate
from .ifs import BaseMap, BlockIFS, DiagonalIFS, is_good_measure
from .measure import delta_p_sorted
from .numerics import project_simplex
from .serialize import _plain as _fmt
from .serialize import dumps

__all__ = [
    "DimensionReport",
    "OptimizerConfig",
    "dynamical_dimension",
    "hausdorff_lb",
    "maximize_on_simplex",
    "perturb",
    "verify_bounds",
]


@dataclass(frozen=True)
class OptimizerConfig:
    starts: int = 16
    max_iters: int = 4000
    tol: float = 1e-10
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError("need at least one start")

    def n_workers(self) -> int:
        cap = os.environ.get("SPONGE_DIM_THREADS")
        n = self.workers or (int(cap) if cap else 1)
        if cap:
            n = min(n, int(cap))
        return max(1, n)


@dataclass
class DimensionReport:
    quantity: str
    value: float
    argmax: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _fmt(asdict(self))

    def to_json(self) -> str:
        return dumps(self.to_dict())


@dataclass
class _Run:
    x: np.ndarray
    value: float
    spread: float
    evals: int


def maximize_on_simplex(f, n: int, starts, cfg: OptimizerConfig, blocks: int = 1, restarts: int = 6):
    """Maximize ``f`` over a product of ``blocks`` simplices of dimension ``n - 1``.

    ``f`` takes an array of shape ``(blocks, n)`` (squeezed when ``blocks == 1``).
    ``starts`` is a sequence of feasible starting points. Returns the list of
    runs sorted best first.
    """
    if n == 1:
        x = np.ones((blocks, 1))
        v = float(f(x[0] if blocks == 1 else x))
        return [_Run(x.ravel(), v, 0.0, 1)]
    basis = null_space(np.ones((1, n)))  # n x (n-1), orthonormal
    dim = blocks * (n - 1)

    def unpack(z, origin):
        x = origin + (z.reshape(blocks, n - 1) @ basis.T)
        return project_simplex(x)

    def run(x0):
        origin = np.atleast_2d(x0).reshape(blocks, n)
        evals = 0

        def obj(z):
            nonlocal evals
            evals += 1
            p = unpack(z, origin)
            return -float(f(p[0] if blocks == 1 else p))

        z = np.zeros(dim)
        step = 0.5 / n
        best = obj(z)
        spread = 0.0
        for _ in range(restarts):
            simplex = np.vstack([z, z + step * np.eye(dim)])
            res = minimize(
                obj, z, method="Nelder-Mead",
                options={"initial_simplex": simplex, "xatol": 1e-7, "fatol": cfg.tol,
                         "maxfev": cfg.max_iters, "adaptive": dim > 4},
            )
            spread = float(np.ptp(res.final_simplex[1]))
            improved = best - res.fun
            if res.fun <= best:
                z, best = res.x, res.fun
            # restart from the best vertex until a fresh simplex gains nothing
            if improved <= cfg.tol:
                break
            step = max(step * 0.1, 1e-6)
        return _Run(unpack(z, origin).ravel(), -best, spread, evals)

    workers = cfg.n_workers()
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(workers) as ex:
            runs = list(ex.map(run, starts))
    else:
        runs = [run(s) for s in starts]
    order = sorted(range(len(runs)), key=lambda i: (-runs[i].value, i))
    return [runs[i] for i in order]


def _starts(n: int, cfg: OptimizerConfig, blocks: int = 1, seed_offset: int = 0):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, seed_offset]))
    out = [np.full((blocks, n), 1.0 / n)]
    for _ in range(cfg.starts - 1):
        out.append(rng.dirichlet(np.ones(n), size=blocks))
    return out


def dynamical_dimension(ifs, cfg: OptimizerConfig | None = None) -> DimensionReport:
    """``sup_p delta(p)`` over Bernoulli (block: block-uniform) measures."""
    cfg = cfg or OptimizerConfig()
    n = ifs.size
    runs = maximize_on_simplex(lambda p: delta_p_sorted(ifs, p), n, _starts(n, cfg), cfg)
    best = runs[0]
    good = bool(is_good_measure(ifs, best.x)) if isinstance(ifs, DiagonalIFS) else True
    agree = sum(1 for r in runs if best.value - r.value <= 1e-8)
    return DimensionReport(
        quantity="dynamical_dimension",
        value=best.value,
        argmax={"p": best.x.tolist()},
        residuals={
            "simplex_spread": best.spread,
            "evaluations": sum(r.evals for r in runs),
            "starts": len(runs),
            "starts_within_1e-8": agree,
            "start_values": [r.value for r in runs],
        },
        flags={"good_measure": good, "upper_bound_only": not good},
    )


def _cycle_is_good(ifs, r, grid: int = 64) -> bool:
    if not isinstance(ifs, DiagonalIFS) or isinstance(r, ConstantCycle):
        return isinstance(ifs, BlockIFS) or is_good_measure(ifs, r.p)
    B = np.exp(np.linspace(0.0, r.L, grid, endpoint=False))
    R = r.accumulate(B) / B[:, None]
    return all(is_good_measure(ifs, row) for row in R)


def hausdorff_lb(ifs, family: str = "knots", cfg: OptimizerConfig | None = None, *,
                 n_knots: int = 2, lambdas=(2.0, 4.0), gammas=None, budget: int = 300,
                 search_grid: int = 32, dynd: DimensionReport | None = None) -> DimensionReport:
    """Lower bound ``sup delta(r)`` over a cycle family, constants included.

    Parameters
    ----------
    family : {"constant", "knots", "circular"}
        ``knots`` searches piecewise-linear cycles with ``n_knots`` knots for
        every period in ``lambdas``; ``circular`` scans ``gammas`` (block IFS
        with three blocks only).
    budget : int
        Objective evaluations per knot search. Searches use a coarse
        ``search_grid``-point infimum; the winner is re-evaluated exactly.
    """
    cfg = cfg or OptimizerConfig()
    base = dynd or dynamical_dimension(ifs, cfg)
    p_star = np.asarray(base.argmax["p"])
    best_val, best_cycle = base.value, ConstantCycle(p_star)
    tried = []
    if family == "knots":
        for lam in lambdas:
            def obj(K, lam=lam):
                K = np.atleast_2d(K)
                try:
                    calc = CycleCalculus(ifs, KnotCycle(lam, K))
                except ValueError:
                    return -np.inf
                y = np.linspace(0.0, math.log(lam), search_grid, endpoint=False)
                return float(calc.delta_rB(np.exp(y)).min())

            sub = OptimizerConfig(starts=1, max_iters=budget, tol=cfg.tol, seed=cfg.seed)
            start = np.tile(p_star, (n_knots, 1))
            runs = maximize_on_simplex(obj, ifs.size, [start], sub, blocks=n_knots, restarts=2)
            K = runs[0].x.reshape(n_knots, ifs.size)
            r = KnotCycle(lam, K)
            v = delta_r(ifs, r).value
            tried.append({"lambda": lam, "value": v})
            if v > best_val:
                best_val, best_cycle = v, r
    elif family == "circular":
        if not (isinstance(ifs, BlockIFS) and ifs.J == 3):
            raise ValueError("the circular family needs a block IFS with three blocks")
        if gammas is None:
            gammas = [math.log(2.0) / (2.0 * math.pi * ell) for ell in (1, 2, 4, 8, 16)]
        for g in gammas:
            v = delta_r(ifs, CircularCycle(g)).value
            tried.append({"gamma": g, "value": v})
            if v > best_val:
                best_val, best_cycle = v, CircularCycle(g)
    elif family != "constant":
        raise ValueError(f"unknown cycle family {family!r}")
    nondeg = is_nondegenerate(ifs, best_cycle)
    good = _cycle_is_good(ifs, best_cycle)
    return DimensionReport(
        quantity="hausdorff_lower_bound",
        value=best_val,
        argmax={"cycle": best_cycle.to_dict()},
        residuals={"family_values": tried, "dynamical_dimension": base.value},
        flags={
            "nondegenerate": nondeg,
            "good": good,
            "certified_lower_bound": bool(nondeg and good),
            "family": family,
        },
    )


def perturb(ifs, eta: float, seed: int = 0):
    """Shrink every map by a relative amount in ``[0, eta]`` and slide it inside its old image.

    Images only shrink, so validity and separation are preserved.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    if isinstance(ifs, BlockIFS):
        s = rng.uniform(0.0, 1.0, ifs.X.shape)
        return BlockIFS(ifs.logN, ifs.X - np.log1p(-eta * s), dict(ifs.meta))
    bases = []
    for coord in ifs.bases:
        new = []
        for m in coord:
            s, u = rng.uniform(0.0, 1.0), rng.uniform(-1.0, 1.0)
            r = m.ratio * (1.0 - eta * s)
            slack = m.ratio - r
            new.append(BaseMap(r, m.offset + 0.5 * slack * (1.0 + u), m.orientation))
        bases.append(new)
    return ifs.with_bases(bases)


def verify_bounds(ifs, cfg: OptimizerConfig | None = None, family: str = "knots",
                  etas=(1e-2, 1e-3, 1e-4), **lb_kwargs) -> dict:
    """Check ``HD_lb <= max(1, d-1) DynD`` and probe continuity of DynD under perturbation."""
    cfg = cfg or OptimizerConfig()
    dyn = dynamical_dimension(ifs, cfg)
    lb = hausdorff_lb(ifs, family, cfg, dynd=dyn, **lb_kwargs)
    bound = max(1, ifs.d - 1) * dyn.value
    deltas = [abs(dynamical_dimension(perturb(ifs, eta, cfg.seed), cfg).value - dyn.value) for eta in etas]
    return _fmt({
        "dynamical_dimension": dyn.value,
        "hausdorff_lb": lb.value,
        "bound": bound,
        "bound_holds": bool(lb.value <= bound + 1e-6),
        "etas": list(etas),
        "deltas": deltas,
        "monotone": bool(all(a > b for a, b in zip(deltas, deltas[1:]))),
    })
