"""Command line entry point ``sponge-dim``.

Exit codes: 0 success, 2 invalid input (violations printed), 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import asdict

import numpy as np

from .cycles import CircularCycle, ConstantCycle, CycleCalculus, Cycle, delta_r, is_nondegenerate
from .gap import (
    GapParams,
    RHO,
    beta,
    build_gap_ifs,
    build_matrices,
    delta0,
    eps_max,
    gap_report,
    quadratic_form_check,
)
from .ifs import BlockIFS, DiagonalIFS, classify, is_good_measure, validate
from .measure import as_prob, delta_p_integral, delta_p_sorted, lyapunov
from .optimize import OptimizerConfig, dynamical_dimension, hausdorff_lb
from .oracle import EmpiricalConfig, empirical_pointwise_dim, mcmullen_dim, moran_dim
from .serialize import SpecError, dump_spec, dumps, load_spec, parse_spec, svg_curve, svg_cylinders


class InputError(Exception):
    """Bad user input; reported with exit code 2."""


def _workers() -> int:
    cap = os.environ.get("SPONGE_DIM_THREADS")
    if cap:
        try:
            return max(1, int(cap))
        except ValueError:
            raise InputError(f"SPONGE_DIM_THREADS={cap!r} is not an integer") from None
    return os.cpu_count() or 1


def _cfg(args) -> OptimizerConfig:
    return OptimizerConfig(starts=args.starts, seed=args.seed, workers=_workers())


def _sponge(args):
    if not args.spec:
        raise InputError("--spec is required")
    obj = load_spec(args.spec)
    if not isinstance(obj, (DiagonalIFS, BlockIFS)):
        raise InputError(f"{args.spec}: expected a sponge document, got a cycle")
    res = validate(obj)
    if not res.ok:
        raise InputError("invalid sponge:\n" + "\n".join(f"  - {v}" for v in res.violations))
    return obj


def _cycle(path) -> Cycle:
    obj = load_spec(path)
    if not isinstance(obj, Cycle):
        raise InputError(f"{path}: expected a cycle document")
    return obj


def _weights(ifs, args):
    if args.p is None:
        return as_prob(ifs)
    text = args.p
    if os.path.exists(text):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    try:
        vals = parse_spec('{"lambda": 1, "form": "constant", "p": %s}' % text).p
    except SpecError as exc:
        raise InputError(f"--p: {exc}") from None
    try:
        return as_prob(ifs, vals)
    except ValueError as exc:
        raise InputError(f"--p: {exc}") from None


def _text(obj, prefix="") -> str:
    lines = []
    for k, v in sorted(obj.items()):
        if isinstance(v, dict) and not v:
            lines.append(f"{prefix}{k}: {{}}")
        elif isinstance(v, dict):
            lines.append(f"{prefix}{k}:")
            lines.append(_text(v, prefix + "  "))
        elif isinstance(v, float):
            lines.append(f"{prefix}{k}: {v:.12g}")
        else:
            lines.append(f"{prefix}{k}: {v}")
    return "\n".join(lines)


def _emit(args, payload: dict):
    out = dumps(payload) if args.json else _text(payload) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(["%.17g" % v for v in r])


# ---------------------------------------------------------------- commands


def cmd_validate(args):
    if not args.spec:
        raise InputError("--spec is required")
    obj = load_spec(args.spec)
    if isinstance(obj, Cycle):
        _emit(args, {"ok": True, "kind": "cycle", "nondegenerate_form": obj.kind})
        return 0
    res = validate(obj)
    _emit(args, {"ok": res.ok, "violations": list(res.violations), "warnings": list(res.warnings)})
    return 0 if res.ok else 2


def cmd_classify(args):
    ifs = _sponge(args)
    if isinstance(ifs, BlockIFS):
        c = {"kind": "block", "is_baranski": True, "is_strongly_baranski": True,
             "coordinate_ordering": _block_ordering(ifs), "is_sierpinski": False}
    else:
        c = asdict(classify(ifs))
    _emit(args, c)
    if args.svg:
        if isinstance(ifs, DiagonalIFS) and ifs.d == 2:
            _write(args.svg, svg_cylinders(ifs, args.depth))
    return 0


def _block_ordering(b: BlockIFS):
    sigma = np.argsort(b.X[:, 0], kind="stable")
    ordered = b.X[sigma]
    return [int(i) for i in sigma] if np.all(ordered[:-1] < ordered[1:]) else None


def cmd_dim_bernoulli(args):
    ifs = _sponge(args)
    p = _weights(ifs, args)
    good = True if isinstance(ifs, BlockIFS) else bool(is_good_measure(ifs, p))
    _emit(args, {
        "quantity": "bernoulli_dimension",
        "value": float(delta_p_sorted(ifs, p)),
        "value_breakpoint_form": float(delta_p_integral(ifs, p)),
        "lyapunov": [float(x) for x in lyapunov(ifs, p)],
        "p": p.tolist(),
        "good_measure": good,
    })
    return 0


def cmd_dynd(args):
    ifs = _sponge(args)
    rep = dynamical_dimension(ifs, _cfg(args))
    if isinstance(ifs, DiagonalIFS):
        mc = mcmullen_dim(ifs)
        if mc is not None:
            rep.oracle["mcmullen"] = mc
            rep.oracle["mcmullen_difference"] = rep.value - mc
    _emit(args, rep.to_dict())
    return 0


def cmd_hausdorff_lb(args):
    ifs = _sponge(args)
    gammas = [float(g) for g in args.gammas.split(",")] if args.gammas else None
    lambdas = tuple(float(x) for x in args.lambdas.split(","))
    rep = hausdorff_lb(ifs, args.family, _cfg(args), n_knots=args.knots, lambdas=lambdas,
                       gammas=gammas, budget=args.budget)
    _emit(args, rep.to_dict())
    return 0


def cmd_cycle_dim(args):
    ifs = _sponge(args)
    if not args.cycle:
        raise InputError("--cycle is required")
    r = _cycle(args.cycle)
    if r.__class__ is ConstantCycle and len(r.p) != ifs.size:
        raise InputError("cycle weights do not match the sponge alphabet")
    if isinstance(r, CircularCycle) and not (isinstance(ifs, BlockIFS) and ifs.J == 3):
        raise InputError("circular cycles need a block sponge with J = 3")
    calc = CycleCalculus(ifs, r)
    res = delta_r(ifs, r, grid=args.grid, calc=calc)
    payload = {
        "quantity": "pseudo_bernoulli_dimension",
        "value": res.value,
        "argmin_B": res.argmin,
        "minima": res.minima,
        "grid_residual": res.grid_residual,
        "nondegenerate": is_nondegenerate(ifs, r),
        "upper_bound_only": res.degenerate,
        "cycle": r.to_dict(),
    }
    _emit(args, payload)
    if args.csv or args.svg:
        if isinstance(r, ConstantCycle):
            B, vals = np.array([1.0]), np.array([res.value])
        else:
            B = np.exp(np.linspace(0.0, r.L, args.grid, endpoint=False))
            vals = calc.delta_rB(B)
        if args.csv:
            _write_rows(args.csv, ["B", "delta_rB"], zip(B, vals))
        if args.svg:
            _write(args.svg, svg_curve(B, vals, title="delta(r, B) over one period"))
    return 0


def _params(args) -> GapParams:
    try:
        return GapParams(epsilon=args.epsilon, ell=args.ell, k=args.k)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_gap_build(args):
    params = _params(args)
    try:
        ifs = build_gap_ifs(params)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    text = dump_spec(ifs)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_gap_verify(args):
    params = _params(args)
    try:
        mats = build_matrices(params)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    ts = np.linspace(0.0, RHO, 1024, endpoint=False)
    b = beta(params, ts)
    d0, q0 = delta0(params, cfg=OptimizerConfig(starts=4, seed=args.seed))
    payload = {
        "quadratic_forms": quadratic_form_check(params, seed=args.seed),
        "Hu_residual": float(np.max(np.abs(mats.H.mean(axis=1) - 2.0 ** np.arange(3)))),
        "Xu_residual": float(np.max(np.abs(mats.X.mean(axis=1) - 2.0 ** np.arange(1, 4)))),
        "beta_min": float(b.min()),
        "beta_over_eps2_max_error": float(np.max(np.abs(b / params.epsilon ** 2 - math.sqrt(3) / 4)))
        if params.epsilon > 0 else None,
        "delta0": d0,
        "delta0_argmax": q0.tolist(),
        "eps_max": eps_max(),
    }
    _emit(args, payload)
    if args.csv:
        _write_rows(args.csv, ["t", "beta"], zip(ts, b))
    return 0


def cmd_gap_report(args):
    params = _params(args)
    try:
        rep = gap_report(params, _cfg(args), grid=args.grid)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _emit(args, rep)
    if args.csv or args.svg:
        ifs = build_gap_ifs(params)
        cyc = CircularCycle(params.gamma)
        B = np.exp(np.linspace(0.0, cyc.L, args.grid, endpoint=False))
        vals = CycleCalculus(ifs, cyc).delta_rB(B)
        if args.csv:
            _write_rows(args.csv, ["B", "delta_rB"], zip(B, vals))
        if args.svg:
            _write(args.svg, svg_curve(B, vals, title="circular cycle: delta(r, B)"))
    return 0


def cmd_oracle_empirical(args):
    ifs = _sponge(args)
    source = _cycle(args.cycle) if args.cycle else _weights(ifs, args)
    cfg = EmpiricalConfig(samples=args.samples, B=args.B, seed=args.seed,
                          fractional=not args.whole_steps)
    try:
        res = empirical_pointwise_dim(ifs, source, cfg)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    payload = res.to_dict()
    if not isinstance(source, Cycle):
        payload["delta_p"] = float(delta_p_sorted(ifs, source))
    _emit(args, payload)
    if args.csv:
        res.write_csv(args.csv)
    return 0


def cmd_oracle_closed_form(args):
    ifs = _sponge(args)
    mo = moran_dim(ifs)
    mc = mcmullen_dim(ifs)
    _emit(args, {
        "moran": "not-applicable" if mo is None else mo,
        "mcmullen": "not-applicable" if mc is None else mc,
    })
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="sponge document (JSON)")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--json", action="store_true", help="JSON report")
    common.add_argument("--csv", help="CSV side output")
    common.add_argument("--svg", help="SVG figure")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--starts", type=int, default=16)

    gap = argparse.ArgumentParser(add_help=False)
    gap.add_argument("--epsilon", type=float, default=0.05)
    gap.add_argument("--ell", type=int, default=8)
    gap.add_argument("--k", type=float, default=1e4)

    p = argparse.ArgumentParser(prog="sponge-dim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="check a sponge or cycle document")
    s.set_defaults(fn=cmd_validate)
    s = sub.add_parser("classify", parents=[common], help="separation and ordering properties")
    s.add_argument("--depth", type=int, default=3, help="cylinder depth for --svg")
    s.set_defaults(fn=cmd_classify)
    s = sub.add_parser("dim-bernoulli", parents=[common], help="dimension of a Bernoulli measure")
    s.add_argument("--p", help="weights as a JSON list, or a file holding one (default uniform)")
    s.set_defaults(fn=cmd_dim_bernoulli)
    s = sub.add_parser("dynd", parents=[common], help="dynamical dimension")
    s.set_defaults(fn=cmd_dynd)
    s = sub.add_parser("hausdorff-lb", parents=[common], help="Hausdorff dimension lower bound")
    s.add_argument("--family", choices=["constant", "knots", "circular"], default="knots")
    s.add_argument("--knots", type=int, default=2)
    s.add_argument("--lambdas", default="2,4")
    s.add_argument("--gammas", help="comma separated gamma values (circular family)")
    s.add_argument("--budget", type=int, default=300)
    s.set_defaults(fn=cmd_hausdorff_lb)
    s = sub.add_parser("cycle-dim", parents=[common], help="dimension of a pseudo-Bernoulli measure")
    s.add_argument("--cycle", help="cycle document (JSON)")
    s.add_argument("--grid", type=int, default=256)
    s.set_defaults(fn=cmd_cycle_dim)
    s = sub.add_parser("gap-build", parents=[common, gap], help="emit the gap sponge as a block document")
    s.set_defaults(fn=cmd_gap_build)
    s = sub.add_parser("gap-verify", parents=[common, gap], help="identities behind the gap construction")
    s.set_defaults(fn=cmd_gap_verify)
    s = sub.add_parser("gap-report", parents=[common, gap], help="dimension gap at finite k and in the limit")
    s.add_argument("--grid", type=int, default=256)
    s.set_defaults(fn=cmd_gap_report)
    s = sub.add_parser("oracle-empirical", parents=[common], help="Monte Carlo pointwise dimension")
    s.add_argument("--p", help="weights as a JSON list, or a file holding one (default uniform)")
    s.add_argument("--cycle", help="sample a cycle instead of a Bernoulli measure")
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--B", type=float, default=20.0)
    s.add_argument("--whole-steps", action="store_true", help="integer crossing times")
    s.set_defaults(fn=cmd_oracle_empirical)
    s = sub.add_parser("oracle-closed-form", parents=[common], help="Moran and McMullen closed forms")
    s.set_defaults(fn=cmd_oracle_closed_form)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InputError, SpecError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level guard
        sys.stderr.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
