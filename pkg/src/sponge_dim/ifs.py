"""Diagonal IFS models, cylinder geometry and separation predicates.

Two concrete models share one numerical interface used by the rest of the
package:

``DiagonalIFS``
    an explicit IFS: per-coordinate base maps plus the selected index set E.
    Measures are weight vectors over E.
``BlockIFS``
    a disjoint union of J product blocks, each block holding ``N[i][j]``
    similarities of ratio ``r[i][j]`` in coordinate i. Only measures that are
    uniform inside every block are represented, as weight vectors over J.

Both expose ``size`` (length of a weight vector), ``d``, ``log_contractions``
(a ``size x d`` array of ``-log|phi'|``) and ``subset_entropies`` (entropies
of all ``2**d`` coordinate sets for a batch of weight vectors). Coordinate
sets are passed around as bitmasks; :func:`mask_of` converts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.special import entr

__all__ = [
    "BaseMap",
    "BlockIFS",
    "Classification",
    "DiagonalIFS",
    "ValidationResult",
    "classify",
    "cylinder",
    "is_good_measure",
    "is_good_set",
    "mask_of",
    "members",
    "validate",
]

# Touching endpoints closer than this are treated as touching, not overlapping.
TOUCH_TOL = 1e-12


def mask_of(coords) -> int:
    """Bitmask of a collection of 0-based coordinate indices."""
    if isinstance(coords, (int, np.integer)):
        return int(coords)
    m = 0
    for i in coords:
        m |= 1 << int(i)
    return m


def members(mask: int, d: int) -> tuple[int, ...]:
    return tuple(i for i in range(d) if mask >> i & 1)


@dataclass(frozen=True)
class BaseMap:
    """Similarity ``x -> offset + orientation * ratio * x`` of [0, 1]."""

    ratio: float
    offset: float
    orientation: int = 1

    @property
    def image(self) -> tuple[float, float]:
        end = self.offset + self.orientation * self.ratio
        return (min(self.offset, end), max(self.offset, end))

    def __call__(self, x):
        return self.offset + self.orientation * self.ratio * x


def _round_out(lo: float, hi: float) -> tuple[float, float]:
    return math.nextafter(lo, -math.inf), math.nextafter(hi, math.inf)


def _open_overlap(a, b) -> bool:
    return min(a[1], b[1]) - max(a[0], b[0]) > TOUCH_TOL


def _closed_meet(a, b) -> bool:
    return min(a[1], b[1]) - max(a[0], b[0]) >= -TOUCH_TOL


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class Classification:
    is_sierpinski: bool
    coordinate_ordering: tuple[int, ...] | None
    is_baranski: bool
    is_strongly_baranski: bool


class DiagonalIFS:
    """Explicit diagonal IFS.

    Parameters
    ----------
    bases : sequence of sequences of BaseMap
        ``bases[i][a]`` is the map with index ``a`` in coordinate ``i``.
    E : sequence of int tuples
        Selected index tuples, one entry per coordinate.
    """

    def __init__(self, bases, E):
        self.bases = tuple(tuple(b) for b in bases)
        self.E = tuple(tuple(int(c) for c in a) for a in E)
        self.d = len(self.bases)

    def __repr__(self):
        sizes = [len(b) for b in self.bases]
        return f"DiagonalIFS(d={self.d}, bases={sizes}, #E={len(self.E)})"

    def __eq__(self, other):
        return (
            isinstance(other, DiagonalIFS)
            and self.bases == other.bases
            and self.E == other.E
        )

    def __hash__(self):
        return hash((self.bases, self.E))

    @property
    def size(self) -> int:
        return len(self.E)

    @cached_property
    def _E_array(self) -> np.ndarray:
        return np.array(self.E, dtype=int).reshape(len(self.E), self.d)

    @cached_property
    def ratios(self) -> np.ndarray:
        """``#E x d`` array of ``|phi'_{a,i}|``."""
        out = np.empty((self.size, self.d))
        for n, a in enumerate(self.E):
            for i, ai in enumerate(a):
                out[n, i] = self.bases[i][ai].ratio
        return out

    @cached_property
    def log_contractions(self) -> np.ndarray:
        r = self.ratios
        if np.any(r <= 0.0) or np.any(r >= 1.0):
            raise ValueError("base map ratio outside (0, 1); validate the IFS first")
        return -np.log(r)

    @cached_property
    def _groups(self):
        """Sparse indicator matrix for the cells ``[a]_I`` of every subset I.

        Returns ``(G, starts)``: columns ``starts[mask]:starts[mask+1]`` of G
        are the cells of the coordinate set ``mask``.
        """
        n = self.size
        cols, rows, starts = [], [], [0]
        offset = 0
        for mask in range(1 << self.d):
            idx = members(mask, self.d)
            if idx:
                _, inv = np.unique(self._E_array[:, idx], axis=0, return_inverse=True)
                inv = np.asarray(inv).ravel()
            else:
                inv = np.zeros(n, dtype=int)
            rows.append(np.arange(n))
            cols.append(inv + offset)
            offset += int(inv.max()) + 1 if n else 1
            starts.append(offset)
        G = sparse.csr_matrix(
            (np.ones(n * (1 << self.d)), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, offset),
        )
        return G, np.array(starts)

    def cell_masses(self, w, mask: int):
        """Masses ``p([a]_I)`` for every ``a`` in E (last axis of ``w``)."""
        w = np.asarray(w, dtype=float)
        G, starts = self._groups
        sub = G[:, starts[mask] : starts[mask + 1]]
        cell = np.asarray(sub.T @ w.reshape(-1, self.size).T)
        return np.asarray(sub @ cell).T.reshape(w.shape)

    @cached_property
    def _dense_groups(self):
        """Dense ``(G, S)`` with S summing cells into subsets, or None when large."""
        G, starts = self._groups
        if G.shape[0] * G.shape[1] > 1 << 20:
            return None
        S = np.zeros((G.shape[1], len(starts) - 1))
        for mask in range(len(starts) - 1):
            S[starts[mask] : starts[mask + 1], mask] = 1.0
        return G.toarray(), S

    def subset_entropies(self, w):
        """``h_I(w)`` for all ``2**d`` coordinate sets; shape ``w.shape[:-1] + (2**d,)``."""
        w = np.asarray(w, dtype=float)
        flat = w.reshape(-1, self.size)
        dense = self._dense_groups
        if dense is not None:
            Gd, S = dense
            h = entr(flat @ Gd) @ S
        else:
            G, starts = self._groups
            masses = np.asarray((G.T @ flat.T).T)
            h = np.add.reduceat(entr(masses), starts[:-1], axis=1)
        return h.reshape(w.shape[:-1] + (1 << self.d,))

    def with_bases(self, bases):
        return DiagonalIFS(bases, self.E)


@dataclass(frozen=True, eq=False)
class BlockIFS:
    """Block-product sponge stored through its counts and ratios.

    ``logN[i][j] = log N_{i,j}`` and ``X[i][j] = -log r_{i,j}``; block j sits
    in the open cube ``((j-1)/J, j/J)**d``.
    """

    logN: np.ndarray
    X: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "logN", np.array(self.logN, dtype=float))
        object.__setattr__(self, "X", np.array(self.X, dtype=float))

    def __eq__(self, other):
        return (
            isinstance(other, BlockIFS)
            and np.array_equal(self.logN, other.logN)
            and np.array_equal(self.X, other.X)
        )

    def __hash__(self):
        return hash((self.logN.tobytes(), self.X.tobytes()))

    @property
    def d(self) -> int:
        return self.logN.shape[0]

    @property
    def J(self) -> int:
        return self.logN.shape[1]

    @property
    def size(self) -> int:
        return self.J

    @property
    def log_contractions(self) -> np.ndarray:
        return self.X.T

    @cached_property
    def _mask_bits(self) -> np.ndarray:
        masks = np.arange(1 << self.d)
        return ((masks[None, :] >> np.arange(self.d)[:, None]) & 1).astype(float)

    def subset_entropies(self, q):
        # cells [a]_I never straddle blocks when I is nonempty, so the block
        # label is always revealed: h_I = H(q) + sum_j q_j sum_{i in I} log N_ij
        q = np.asarray(q, dtype=float)
        lin = q @ self.logN.T
        H = entr(q).sum(axis=-1)
        out = lin @ self._mask_bits
        out[..., 1:] += H[..., None]
        return out

    def cell_log_mass(self, q, blocks, mask: int):
        """``log p([a]_I)`` for symbols drawn from the given blocks."""
        if mask == 0:
            return np.zeros(np.shape(blocks))
        idx = list(members(mask, self.d))
        q = np.asarray(q, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(q[blocks]) - self.logN[idx][:, blocks].sum(axis=0)

    def counts(self) -> np.ndarray:
        return np.rint(np.exp(self.logN)).astype(int)

    def expand(self, max_symbols: int = 10_000) -> DiagonalIFS:
        """Explicit IFS with the maps of block j equally spaced in its interval."""
        N = self.counts()
        if not np.allclose(np.log(N), self.logN, atol=1e-9):
            raise ValueError("expansion needs integer counts")
        total = int(sum(np.prod(N[:, j]) for j in range(self.J)))
        if total > max_symbols:
            raise ValueError(f"expansion would have {total} symbols (> {max_symbols})")
        r = np.exp(-self.X)
        J = self.J
        bases, first = [], np.zeros((self.d, J), dtype=int)
        for i in range(self.d):
            maps = []
            for j in range(J):
                n, rij = N[i, j], r[i, j]
                gap = (1.0 / J - n * rij) / (n + 1)
                first[i, j] = len(maps)
                for m in range(n):
                    maps.append(BaseMap(rij, j / J + gap + m * (rij + gap), 1))
            bases.append(maps)
        E = []
        for j in range(J):
            ranges = [range(first[i, j], first[i, j] + N[i, j]) for i in range(self.d)]
            E.extend(itertools.product(*ranges))
        return DiagonalIFS(bases, E)

    def expanded_weights(self, q) -> np.ndarray:
        """Weight vector on the expanded alphabet representing ``M q``."""
        N = self.counts()
        return np.concatenate(
            [np.full(int(np.prod(N[:, j])), q[j] / np.prod(N[:, j])) for j in range(self.J)]
        )


def validate(ifs) -> ValidationResult:
    """Collect every invariant violation of an IFS without raising."""
    if isinstance(ifs, BlockIFS):
        return _validate_block(ifs)
    bad, warn = [], []
    if ifs.d < 1:
        bad.append("d must be at least 1")
    for i, base in enumerate(ifs.bases):
        if not base:
            bad.append(f"coordinate {i}: empty base IFS")
        for a, f in enumerate(base):
            where = f"bases[{i}][{a}]"
            if not (math.isfinite(f.ratio) and math.isfinite(f.offset)):
                bad.append(f"{where}: non-finite value")
                continue
            if not 0.0 < f.ratio < 1.0:
                bad.append(f"{where}: ratio not in (0,1)")
            if f.orientation not in (1, -1):
                bad.append(f"{where}: orientation must be +1 or -1")
            lo, hi = f.image
            if lo < -TOUCH_TOL or hi > 1.0 + TOUCH_TOL:
                bad.append(f"{where}: image [{lo:.17g}, {hi:.17g}] not inside [0,1]")
    if not ifs.E:
        bad.append("E empty")
    seen = set()
    for n, a in enumerate(ifs.E):
        if len(a) != ifs.d:
            bad.append(f"E[{n}]: expected {ifs.d} indices, got {len(a)}")
            continue
        for i, ai in enumerate(a):
            if not 0 <= ai < len(ifs.bases[i]):
                bad.append(f"E[{n}][{i}]: bad index {ai}")
        if a in seen:
            bad.append(f"E[{n}]: duplicate element {a}")
        seen.add(a)
    if not bad:
        for i in range(ifs.d):
            if len({ifs.bases[i][a[i]] for a in ifs.E}) == 1:
                warn.append(f"coordinate {i} is degenerate (one base map used by all of E)")
    return ValidationResult(tuple(bad), tuple(warn))


def _validate_block(b: BlockIFS) -> ValidationResult:
    bad = []
    if b.logN.ndim != 2 or b.logN.shape != b.X.shape:
        return ValidationResult(("logN and X must be d x J arrays of equal shape",))
    if b.d < 1 or b.J < 1:
        bad.append("need d >= 1 and J >= 1")
    if not (np.all(np.isfinite(b.logN)) and np.all(np.isfinite(b.X))):
        bad.append("non-finite entry in logN or X")
        return ValidationResult(tuple(bad))
    for i, j in zip(*np.nonzero(b.logN < 0)):
        bad.append(f"logN[{i}][{j}] < 0 (count below 1)")
    for i, j in zip(*np.nonzero(b.X <= 0)):
        bad.append(f"X[{i}][{j}]: ratio not in (0,1)")
    slack = b.logN - b.X + math.log(b.J)
    for i, j in zip(*np.nonzero(slack >= 0)):
        bad.append(f"(i={i}, j={j}): N*r = {math.exp(b.logN[i, j] - b.X[i, j]):.6g} not < 1/J")
    return ValidationResult(tuple(bad))


def _is_grid(base) -> int | None:
    m = len(base)
    if m < 2:
        return None
    want = {a: a / m for a in range(m)}
    got = sorted(base, key=lambda f: f.offset)
    for a, f in enumerate(got):
        if f.orientation != 1 or abs(f.ratio - 1.0 / m) > 1e-12 or abs(f.offset - want[a]) > 1e-12:
            return None
    return m


def _ordering(ifs: DiagonalIFS) -> tuple[int, ...] | None:
    r = ifs.ratios
    sigma = tuple(int(i) for i in np.argsort(-r[0], kind="stable"))
    ordered = r[:, sigma]
    if np.all(ordered[:, :-1] > ordered[:, 1:]):
        return sigma
    return None


def _osc(base, strong: bool) -> bool:
    imgs = [f.image for f in base]
    for a, b in itertools.combinations(imgs, 2):
        if (_closed_meet if strong else _open_overlap)(a, b):
            return False
    return True


def classify(ifs: DiagonalIFS) -> Classification:
    grids = [_is_grid(b) for b in ifs.bases]
    sierpinski = all(g is not None for g in grids) and len(set(grids)) == len(grids)
    return Classification(
        is_sierpinski=sierpinski,
        coordinate_ordering=_ordering(ifs),
        is_baranski=all(_osc(b, False) for b in ifs.bases),
        is_strongly_baranski=all(_osc(b, True) for b in ifs.bases),
    )


def is_good_set(ifs, I) -> bool:
    """Open set condition for the projection of the IFS onto the coordinates ``I``."""
    if isinstance(ifs, BlockIFS):
        return True  # blocks are strongly separated by construction
    idx = members(mask_of(I), ifs.d)
    if not idx:
        return True
    proj = sorted({tuple(a[i] for i in idx) for a in ifs.E})
    # per-coordinate overlap relation among the symbols actually used
    overlap = []
    for pos, i in enumerate(idx):
        used = sorted({t[pos] for t in proj})
        rel = {
            (a, b)
            for a, b in itertools.permutations(used, 2)
            if _open_overlap(ifs.bases[i][a].image, ifs.bases[i][b].image)
        }
        overlap.append(rel)
    if not any(overlap):
        return True  # distinct tuples differ somewhere, where images are disjoint
    arr = np.array(proj)
    n = len(arr)
    pair_ok = [
        np.array([[x == y or (x, y) in rel for y in range(arr[:, p].max() + 1)]
                  for x in range(arr[:, p].max() + 1)])
        for p, rel in enumerate(overlap)
    ]
    for s in range(0, n, 512):
        block = arr[s : s + 512]
        meet = np.ones((len(block), n), dtype=bool)
        for p, table in enumerate(pair_ok):
            meet &= table[block[:, p][:, None], arr[:, p][None, :]]
        meet[np.arange(len(block)), np.arange(s, s + len(block))] = False
        if meet.any():
            return False
    return True


def is_good_measure(ifs, p) -> bool:
    """Goodness of every threshold set ``{i : chi_i(p) <= x}``."""
    if isinstance(ifs, BlockIFS):
        return True
    chi = np.asarray(p, dtype=float) @ ifs.log_contractions
    for x in np.unique(chi):
        if not is_good_set(ifs, mask_of(np.nonzero(chi <= x)[0])):
            return False
    return True


def cylinder(ifs: DiagonalIFS, word) -> list[tuple[float, float]]:
    """Rectangle ``phi_{w_1} o ... o phi_{w_n}([0,1]^d)`` with outward rounding."""
    word = list(word)
    if not word:
        raise ValueError("word must be nonempty")
    out = []
    for i in range(ifs.d):
        lo, hi = 0.0, 1.0
        for a in reversed(word):
            f = ifs.bases[i][a[i]]
            x, y = f(lo), f(hi)
            lo, hi = _round_out(min(x, y), max(x, y))
        out.append((max(lo, 0.0), min(hi, 1.0)))
    return out
