"""Independent checks on the dimension formulas.

Closed forms cover self-similar sponges and Bedford-McMullen carpets. The
Monte Carlo estimator samples symbolic sequences and measures the mass of the
approximate square around each one: the cylinder in which coordinate ``i``
is pinned down until its accumulated contraction reaches ``B``.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .cycles import ConstantCycle, Cycle
from .ifs import BlockIFS, DiagonalIFS, _is_grid, _osc
from .measure import as_prob, sorted_chain

__all__ = [
    "EmpiricalConfig",
    "EmpiricalResult",
    "empirical_pointwise_dim",
    "mcmullen_dim",
    "moran_dim",
]


def moran_dim(ifs) -> float | None:
    """``log #E / log(1/r)`` when every map has the same ratio ``r``; None otherwise.

    Separation is checked with the open set condition per coordinate, which
    is what the value needs (touching cells are allowed).
    """
    if not isinstance(ifs, DiagonalIFS) or ifs.size == 0:
        return None
    r = ifs.ratios
    if np.ptp(r) > 1e-15 or not all(_osc(b, False) for b in ifs.bases):
        return None
    if len(set(ifs.E)) != ifs.size:
        return None
    return math.log(ifs.size) / -math.log(r[0, 0])


def mcmullen_dim(carpet) -> float | None:
    """Bedford-McMullen dimension ``log_m sum_rows t_j**(log_n m)``; None if not a grid carpet.

    ``m`` is the number of rows (the less contracted coordinate), ``n`` the
    number of columns and ``t_j`` the number of chosen cells in row ``j``.
    """
    if not isinstance(carpet, DiagonalIFS) or carpet.d != 2 or carpet.size == 0:
        return None
    sizes = [_is_grid(b) for b in carpet.bases]
    if None in sizes:
        return None
    row = int(np.argmin(sizes))  # fewer maps means weaker contraction
    m, n = sizes[row], sizes[1 - row]
    # grid maps are identified by offset, not by list position
    rank = [
        {a: int(round(f.offset * s)) for a, f in enumerate(b)}
        for b, s in zip(carpet.bases, sizes)
    ]
    cells = {(rank[0][a[0]], rank[1][a[1]]) for a in carpet.E}
    t = Counter(c[row] for c in cells)
    if m == n:
        return math.log(len(cells)) / math.log(m)
    s = sum(tj ** (math.log(m) / math.log(n)) for tj in t.values())
    return math.log(s) / math.log(m)


@dataclass(frozen=True)
class EmpiricalConfig:
    samples: int = 10_000
    B: float = 20.0
    seed: int = 0
    chunk: int = 1024
    max_steps: int = 100_000
    # interpolate the crossing time inside the last step; False uses whole steps
    fractional: bool = True

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if not self.B > 0:
            raise ValueError("B must be positive")


@dataclass
class EmpiricalResult:
    estimate: float
    stderr: float
    samples: int
    B: float
    values: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "stderr": self.stderr, "samples": self.samples, "B": self.B}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["sample", "neg_log_mass_over_B"])
            for n, v in enumerate(self.values):
                w.writerow([n, "%.17g" % v])


def _log_cell_tables(ifs, W):
    """``log w_n([a]_I)`` for weight rows ``W`` (T x size); shape ``(T, 2**d, size)``."""
    T = W.shape[0]
    out = np.empty((T, 1 << ifs.d, ifs.size))
    with np.errstate(divide="ignore"):
        for mask in range(1 << ifs.d):
            if isinstance(ifs, BlockIFS):
                bits = ifs._mask_bits[:, mask]
                out[:, mask, :] = np.log(W) - bits @ ifs.logN
            else:
                out[:, mask, :] = np.log(ifs.cell_masses(W, mask))
    out[:, 0, :] = 0.0
    return out


def _sample_symbols(rng, cdf, S):
    """Inverse-CDF draws: ``cdf`` is (T, size); returns (S, T) symbol indices."""
    u = rng.random((S, cdf.shape[0]))
    idx = (u[..., None] >= cdf[None, :, :]).sum(axis=-1)
    return np.minimum(idx, cdf.shape[1] - 1)


def empirical_pointwise_dim(ifs, source, cfg: EmpiricalConfig | None = None) -> EmpiricalResult:
    """Monte Carlo estimate of the pointwise dimension at scale ``exp(-B)``.

    ``source`` is a weight vector (Bernoulli measure) or a :class:`Cycle`,
    sampled at integer times ``n = 1, 2, ...``.
    """
    cfg = cfg or EmpiricalConfig()
    if isinstance(source, Cycle) and not isinstance(source, ConstantCycle):
        cycle = source
    else:
        p = source.p if isinstance(source, ConstantCycle) else source
        cycle = ConstantCycle(as_prob(ifs, p))
    Xc = ifs.log_contractions  # size x d
    T = int(math.ceil(cfg.B / Xc.min())) + 1
    if T > cfg.max_steps:
        raise ValueError(f"B = {cfg.B} needs {T} steps (> {cfg.max_steps}); lower B")
    n = np.arange(1, T + 1, dtype=float)
    W = cycle.values_at(n)
    cdf = np.cumsum(W, axis=1)
    cdf /= cdf[:, -1:]
    logm = _log_cell_tables(ifs, W)
    d = ifs.d

    streams = np.random.SeedSequence(cfg.seed).spawn(-(-cfg.samples // cfg.chunk))
    values = []
    for c, ss in enumerate(streams):
        S = min(cfg.chunk, cfg.samples - c * cfg.chunk)
        rng = np.random.default_rng(ss)
        sym = _sample_symbols(rng, cdf, S)  # S x T
        x = Xc[sym]  # S x T x d
        cum = np.cumsum(x, axis=1)
        prev = cum - x
        if cfg.fractional:
            # part of step n (1-based) before the crossing of B, in [0, 1]
            share = np.clip((cfg.B - prev) / x, 0.0, 1.0)
        else:
            share = (prev < cfg.B).astype(float)
        order, masks = sorted_chain(share, descending=True)  # S x T x d
        lengths = np.take_along_axis(share, order, -1)
        lengths = lengths - np.concatenate([lengths[..., 1:], np.zeros_like(lengths[..., :1])], -1)
        lm = logm[np.arange(T)[None, :, None], masks, sym[..., None]]  # S x T x d
        neg = -(lengths * lm).sum(axis=(1, 2))
        values.append(neg / cfg.B)
    vals = np.concatenate(values)
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else float("inf")
    return EmpiricalResult(float(vals.mean()), se, len(vals), float(cfg.B), vals)
