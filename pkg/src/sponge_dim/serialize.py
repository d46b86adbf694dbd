"""Strict JSON documents for sponges and cycles, report emission and SVG figures.

Floats are written with 17 significant digits so every document parses back
to bit-identical values.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .cycles import CircularCycle, ConstantCycle, Cycle, KnotCycle
from .ifs import BaseMap, BlockIFS, DiagonalIFS

__all__ = [
    "SpecError",
    "dump_spec",
    "dumps",
    "load_spec",
    "parse_spec",
    "svg_curve",
    "svg_cylinders",
]


class SpecError(ValueError):
    """Malformed or out-of-range input document."""


def _plain(x):
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _emit(x, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            return json.dumps(str(x))  # reports only; documents reject these
        return "%.17g" % x
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    if isinstance(x, list):
        if not x:
            return "[]"
        if all(not isinstance(v, (list, dict)) for v in x):
            return "[" + ", ".join(_emit(v, indent, level) for v in x) + "]"
        inner = ",\n".join(pad + _emit(v, indent, level + 1) for v in x)
        return "[\n" + inner + "\n" + end + "]"
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = sorted(x.items())
        inner = ",\n".join(pad + json.dumps(k) + ": " + _emit(v, indent, level + 1) for k, v in items)
        return "{\n" + inner + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON with sorted keys and ``%.17g`` floats."""
    return _emit(_plain(obj), indent, 0) + "\n"


# ---------------------------------------------------------------- parsing


def _reject_constant(name):
    raise SpecError(f"non-finite number {name} is not allowed")


def _loads(text: str):
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SpecError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _keys(doc: dict, where: str, required, optional=()):
    if not isinstance(doc, dict):
        raise SpecError(f"{where}: expected an object")
    unknown = set(doc) - set(required) - set(optional)
    if unknown:
        raise SpecError(f"{where}: unknown key {sorted(unknown)[0]!r}")
    for k in required:
        if k not in doc:
            raise SpecError(f"{where}: missing key {k!r}")


def _real(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SpecError(f"{where}: expected a number")
    x = float(x)
    if not math.isfinite(x):
        raise SpecError(f"{where}: non-finite number")
    return x


def _int(x, where: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise SpecError(f"{where}: expected an integer")
    return x


def _matrix(x, where: str, shape=None):
    if not isinstance(x, list) or not x or not all(isinstance(r, list) for r in x):
        raise SpecError(f"{where}: expected a nonempty list of rows")
    rows = [[_real(v, f"{where}[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(x)]
    if len({len(r) for r in rows}) != 1:
        raise SpecError(f"{where}: rows have different lengths")
    out = np.array(rows)
    if shape is not None and out.shape != shape:
        raise SpecError(f"{where}: expected shape {shape}, got {out.shape}")
    return out


def _explicit(doc):
    _keys(doc, "sponge", ("kind", "d", "bases", "E"))
    d = _int(doc["d"], "d")
    if d < 1:
        raise SpecError("d: must be at least 1")
    bases = doc["bases"]
    if not isinstance(bases, list) or len(bases) != d:
        raise SpecError(f"bases: expected {d} coordinate lists")
    out = []
    for i, coord in enumerate(bases):
        if not isinstance(coord, list) or not coord:
            raise SpecError(f"bases[{i}]: expected a nonempty list of maps")
        maps = []
        for a, m in enumerate(coord):
            where = f"bases[{i}][{a}]"
            _keys(m, where, ("ratio", "offset"), ("orientation",))
            r = _real(m["ratio"], where + ".ratio")
            if not 0.0 < r < 1.0:
                raise SpecError(f"{where}.ratio: ratio not in (0,1)")
            o = _real(m["offset"], where + ".offset")
            s = _int(m.get("orientation", 1), where + ".orientation")
            if s not in (1, -1):
                raise SpecError(f"{where}.orientation: must be 1 or -1")
            maps.append(BaseMap(r, o, s))
        out.append(maps)
    E = doc["E"]
    if not isinstance(E, list):
        raise SpecError("E: expected a list of index tuples")
    tuples = []
    for n, a in enumerate(E):
        if not isinstance(a, list) or len(a) != d:
            raise SpecError(f"E[{n}]: expected {d} indices")
        t = tuple(_int(v, f"E[{n}][{i}]") for i, v in enumerate(a))
        for i, v in enumerate(t):
            if not 0 <= v < len(out[i]):
                raise SpecError(f"E[{n}][{i}]: index {v} out of range")
        tuples.append(t)
    return DiagonalIFS(out, tuples)


def _block(doc):
    _keys(doc, "sponge", ("kind", "d", "J", "logN", "X"), ("meta",))
    d, J = _int(doc["d"], "d"), _int(doc["J"], "J")
    if d < 1 or J < 1:
        raise SpecError("d and J must be positive")
    logN = _matrix(doc["logN"], "logN", (d, J))
    X = _matrix(doc["X"], "X", (d, J))
    if np.any(logN < 0):
        raise SpecError("logN: counts must be at least 1 (logN >= 0)")
    if np.any(X <= 0):
        raise SpecError("X: ratio not in (0,1) (X must be positive)")
    meta = doc.get("meta", {})
    if not isinstance(meta, dict):
        raise SpecError("meta: expected an object")
    return BlockIFS(logN, X, meta)


def _cycle(doc):
    _keys(doc, "cycle", ("lambda", "form"), ("p", "knots", "gamma"))
    lam = _real(doc["lambda"], "lambda")
    form = doc["form"]
    extra = {"constant": "p", "knots": "knots", "circular": "gamma"}
    if form not in extra:
        raise SpecError(f"form: unknown cycle form {form!r}")
    for k in ("p", "knots", "gamma"):
        if k in doc and k != extra[form]:
            raise SpecError(f"{k}: not allowed for form {form!r}")
    if extra[form] not in doc:
        raise SpecError(f"missing key {extra[form]!r}")
    try:
        if form == "constant":
            p = [_real(v, f"p[{n}]") for n, v in enumerate(doc["p"])]
            if lam != 1.0:
                raise SpecError("lambda: a constant cycle has lambda = 1")
            if min(p) < 0 or abs(sum(p) - 1.0) > 1e-12:
                raise SpecError("p: not a probability vector")
            return ConstantCycle(np.array(p))
        if form == "knots":
            if not lam > 1.0:
                raise SpecError("lambda: knot cycles need lambda > 1")
            return KnotCycle(lam, _matrix(doc["knots"], "knots"))
        g = _real(doc["gamma"], "gamma")
        if not g > 0:
            raise SpecError("gamma: must be positive")
        c = CircularCycle(g)
        if abs(c.lam - lam) > 1e-12 * lam:
            raise SpecError(f"lambda: circular cycle with gamma {g!r} has lambda {c.lam!r}")
        return c
    except SpecError:
        raise
    except (ValueError, TypeError) as exc:
        raise SpecError(f"{form}: {exc}") from None


def parse_spec(text: str):
    """Parse a sponge or cycle document (JSON text)."""
    doc = _loads(text)
    if not isinstance(doc, dict):
        raise SpecError("top level: expected an object")
    if "kind" in doc:
        if doc["kind"] == "explicit":
            return _explicit(doc)
        if doc["kind"] == "block":
            return _block(doc)
        raise SpecError(f"kind: unknown sponge kind {doc['kind']!r}")
    if "form" in doc:
        return _cycle(doc)
    raise SpecError("top level: need 'kind' (sponge) or 'form' (cycle)")


def load_spec(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise SpecError(f"{path}: {exc}") from None
    return parse_spec(text)


def to_doc(obj) -> dict:
    if isinstance(obj, DiagonalIFS):
        return {
            "kind": "explicit",
            "d": obj.d,
            "bases": [
                [{"ratio": m.ratio, "offset": m.offset, "orientation": m.orientation} for m in coord]
                for coord in obj.bases
            ],
            "E": [list(a) for a in obj.E],
        }
    if isinstance(obj, BlockIFS):
        doc = {"kind": "block", "d": obj.d, "J": obj.J, "logN": obj.logN, "X": obj.X}
        if obj.meta:
            doc["meta"] = dict(obj.meta)
        return doc
    if isinstance(obj, Cycle):
        return obj.to_dict()
    raise TypeError(f"no document form for {type(obj).__name__}")


def dump_spec(obj) -> str:
    return dumps(to_doc(obj))


# ---------------------------------------------------------------- figures


def svg_curve(xs, ys, title: str = "", xlabel: str = "B", ylabel: str = "delta(r, B)",
              width: int = 640, height: int = 400) -> str:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    m = 50
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys.min(), ys.max()
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    px = m + (xs - x0) / (x1 - x0) * (width - 2 * m)
    py = height - m - (ys - y0) / (y1 - y0) * (height - 2 * m)
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>\n'
        f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" stroke="black"/>\n'
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>\n'
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">{xlabel}</text>\n'
        f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})">{ylabel}</text>\n'
        f'<text x="{m}" y="{height - m + 16}" font-size="10">{x0:.6g}</text>\n'
        f'<text x="{width - m}" y="{height - m + 16}" font-size="10" text-anchor="end">{x1:.6g}</text>\n'
        f'<text x="{m - 4}" y="{height - m}" font-size="10" text-anchor="end">{y0:.8g}</text>\n'
        f'<text x="{m - 4}" y="{m + 4}" font-size="10" text-anchor="end">{y1:.8g}</text>\n'
        f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{pts}"/>\n'
        "</svg>\n"
    )


def svg_cylinders(ifs: DiagonalIFS, depth: int = 3, size: int = 600, max_rects: int = 50_000) -> str:
    """Depth-``depth`` cylinder rectangles of a carpet."""
    if ifs.d != 2:
        raise ValueError("cylinder rendering needs d = 2")
    if ifs.size ** depth > max_rects:
        raise ValueError(f"{ifs.size}**{depth} rectangles exceed {max_rects}")
    lo = np.zeros((1, 2))
    hi = np.ones((1, 2))
    for _ in range(depth):
        new_lo, new_hi = [], []
        for a in ifs.E:
            maps = [ifs.bases[i][a[i]] for i in range(2)]
            r = np.array([m.ratio for m in maps])
            off = np.array([m.offset for m in maps])
            s = np.array([m.orientation for m in maps])
            # apply phi_a after the existing prefix: the word grows on the right
            a_lo = np.where(s > 0, off, off + r)
            new_lo.append(lo + (hi - lo) * a_lo)
            new_hi.append(lo + (hi - lo) * (a_lo + s * r))
        lo = np.concatenate(new_lo)
        hi = np.concatenate(new_hi)
    x0, x1 = np.minimum(lo, hi), np.maximum(lo, hi)
    rects = "\n".join(
        f'<rect x="{a[0] * size:.3f}" y="{(1 - b[1]) * size:.3f}" '
        f'width="{(b[0] - a[0]) * size:.3f}" height="{(b[1] - a[1]) * size:.3f}"/>'
        for a, b in zip(x0, x1)
    )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
        f'<g fill="black">\n{rects}\n</g>\n</svg>\n'
    )
