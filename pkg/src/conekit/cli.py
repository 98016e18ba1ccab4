"""conekit command line: constants, check, certify, solve, report.

Exit codes: 0 ok, 1 I/O, 2 validation or malformed request, 3 numerical failure,
4 certificate not established.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import index as ix
from . import solver as sv
from .constants import compute_all
from .errors import (AssumptionError, ConekitError, ExprSyntaxError, LadderError, MatrixError,
                     ProblemError)
from .problem import SchemaError, build
from .report import RunReport, solution_json

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NUMERIC, EXIT_UNCERTIFIED = 0, 1, 2, 3, 4

# --tol-* flag -> Options field
TOL_FLAGS = {"quad": "tol", "picard": "picard_tol"}


class UsageError(Exception):
    pass


def load_problem(path, args):
    raw = Path(path).read_bytes()
    try:
        data = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise SchemaError(f"invalid JSON: {err}") from None
    if not isinstance(data, dict):
        raise SchemaError("problem file must hold a JSON object")
    opts = dict(data.get("options") or {})
    for flag, key in TOL_FLAGS.items():
        value = getattr(args, f"tol_{flag}", None)
        if value is not None:
            opts[key] = value
    for key in ("f_grid", "nodes", "damping", "max_iter", "ceiling"):
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    if opts:
        data["options"] = opts
    return build(data, hashlib.sha256(raw).hexdigest())


def parse_ladder(spec: str):
    """'0.125:star,1:one,11:zero', or a file holding that text or a JSON list of [rho, kind]."""
    path = Path(spec)
    if spec and path.is_file():
        text = path.read_text().strip()
        if text.startswith("["):
            return ix.validate_ladder([(_rho(str(r)), k) for r, k in json.loads(text)])
        spec = text
    items = [s for s in spec.replace("\n", ",").split(",") if s.strip()]
    ladder = []
    for item in items:
        if ":" not in item:
            raise LadderError(f"ladder entry {item!r} is not rho:kind")
        r, k = item.rsplit(":", 1)
        ladder.append((_rho(r), k))
    return ix.validate_ladder(ladder)


def _rho(text):
    from .problem import number
    try:
        rho = number(text.strip(), "rho")
    except (ValueError, SchemaError) as err:
        raise LadderError(f"bad radius {text!r}: {err}") from None
    if rho <= 0:
        raise LadderError(f"radius must be positive, got {text!r}")
    return rho


def parse_brackets(spec: str):
    out = []
    for item in spec.split(","):
        if not item.strip():
            continue
        lo, hi = item.split(":")
        out.append((float(lo), float(hi)))
    if not out:
        raise UsageError("no brackets given")
    return out


def _report(p, **kw):
    return RunReport(p.name, p.digest, __version__, **kw)


def _emit(args, rep: RunReport):
    if getattr(args, "format", "json") == "table":
        sys.stdout.write(rep.text())
    else:
        sys.stdout.write(rep.dumps())


# ---------------------------------------------------------------- subcommands

def cmd_constants(args):
    t0 = time.perf_counter()
    p = load_problem(args.problem, args)
    k = compute_all(p)
    rep = _report(p, constants=k, thresholds=ix.thresholds(p, k))
    rep.wall_time = time.perf_counter() - t0
    _emit(args, rep)
    return EXIT_OK


def cmd_check(args):
    t0 = time.perf_counter()
    p = load_problem(args.problem, args)
    k = compute_all(p)
    verdict = None
    if args.ladder:
        verdict = ix.multiplicity(p, k, parse_ladder(args.ladder), args.f_grid)
        conds = list(verdict.conditions)
    elif args.scan:
        parts = args.scan.split(":")
        lo, hi = float(parts[0]), float(parts[1])
        n = int(parts[2]) if len(parts) > 2 else 48
        proposal = ix.propose_ladder(p, k, lo, hi, n, args.f_grid)
        if not proposal:
            conds = []
        else:
            verdict = ix.multiplicity(p, k, proposal, args.f_grid)
            conds = list(verdict.conditions)
    else:
        if args.rho is None:
            raise UsageError("check needs --rho, --ladder or --scan")
        kinds = [args.kind] if args.kind else list(ix.KINDS)
        conds = [ix.check(p, k, _rho(args.rho), kd, args.f_grid) for kd in kinds]
    rep = _report(p, thresholds=ix.thresholds(p, k), conditions=conds, verdict=verdict)
    rep.wall_time = time.perf_counter() - t0
    _emit(args, rep)
    return EXIT_OK


def cmd_certify(args):
    t0 = time.perf_counter()
    ladder = parse_ladder(args.ladder)
    p = load_problem(args.problem, args)
    k = compute_all(p)
    verdict = ix.multiplicity(p, k, ladder, args.f_grid)
    rep = _report(p, constants=k, thresholds=ix.thresholds(p, k), conditions=list(verdict.conditions),
                  verdict=verdict)
    rep.wall_time = time.perf_counter() - t0
    _emit(args, rep)
    return EXIT_OK if verdict.guaranteed_count >= args.at_least else EXIT_UNCERTIFIED


def _solve(p, args):
    nodes = sv.default_nodes(p, args.nodes)
    if args.seed_norm is not None:
        start = (sv.GridFunction.constant(nodes, args.seed_norm),) * 2
        r = sv.picard(p, start, args.damping)
        ok = r.residual < args.tol_residual
        return [r] if ok else []
    return sv.multistart(p, parse_brackets(args.brackets), args.seeds, nodes, args.damping,
                         accept=args.tol_residual)


def _write_solutions(results, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for n, r in enumerate(results, 1):
        path = out / f"solution_{n}.csv"
        data = np.column_stack([r.u.nodes, r.u.values, r.v.values])
        np.savetxt(path, data, delimiter=",", header="t,u,v", comments="", fmt="%.17g")
        rows.append(solution_json(r, str(path)))
    return rows


def cmd_solve(args):
    t0 = time.perf_counter()
    p = load_problem(args.problem, args)
    results = _solve(p, args)
    rows = _write_solutions(results, args.out)
    rep = _report(p, solutions=rows)
    rep.wall_time = time.perf_counter() - t0
    (Path(args.out) / "solve.json").write_text(rep.dumps())
    for n, r in enumerate(results, 1):
        print(f"solution {n}: norm={r.norm:.10g} residual={r.residual:.3g} "
              f"in_cone=({r.in_cone[0]}, {r.in_cone[1]}) iterations={r.iterations}")
    if not results:
        print("no fixed point found: every start diverged or stalled", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_report(args):
    t0 = time.perf_counter()
    p = load_problem(args.problem, args)
    k = compute_all(p)
    verdict, conds, rows = None, [], []
    if args.ladder:
        verdict = ix.multiplicity(p, k, parse_ladder(args.ladder), args.f_grid)
        conds = list(verdict.conditions)
    if args.solve:
        rows = [solution_json(r) for r in _solve(p, args)]
    rep = _report(p, constants=k, thresholds=ix.thresholds(p, k), conditions=conds, verdict=verdict,
                  solutions=rows)
    rep.wall_time = time.perf_counter() - t0
    text = rep.dumps() if args.format == "json" else rep.text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    ap = argparse.ArgumentParser(prog="conekit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"conekit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, fmt=True):
        sp.add_argument("problem", help="problem file (JSON)")
        if fmt:
            sp.add_argument("--format", choices=("json", "table"), default="json")
        sp.add_argument("--tol-quad", type=float, help="quadrature tolerance (default 1e-10)")
        sp.add_argument("--f-grid", type=int, dest="f_grid", help="f-extremum grid per axis (default 64)")

    def solving(sp):
        sp.add_argument("--seed-norm", type=float, help="single constant start instead of brackets")
        sp.add_argument("--damping", type=float, help="Picard damping in (0, 1] (default 0.5)")
        sp.add_argument("--nodes", type=int, help="Chebyshev nodes (default 257)")
        sp.add_argument("--brackets", default="0:1,1:10,10:100", help="norm brackets lo:hi,lo:hi")
        sp.add_argument("--seeds", type=int, default=3, help="seeds per bracket")
        sp.add_argument("--max-iter", type=int, dest="max_iter")
        sp.add_argument("--ceiling", type=float, help="divergence ceiling on the norm")
        sp.add_argument("--tol-picard", type=float, help="stop when the update is below this (default 1e-11)")
        sp.add_argument("--tol-residual", type=float, default=1e-8, help="accept fixed points below this")

    sp = sub.add_parser("constants", help="print every constant of the theory")
    common(sp)
    sp.set_defaults(func=cmd_constants)

    sp = sub.add_parser("check", help="evaluate index conditions at given radii")
    common(sp)
    sp.add_argument("--rho")
    sp.add_argument("--kind", help="index1|index0|index0_star (aliases one|zero|star)")
    sp.add_argument("--ladder", help="inline ladder or ladder file")
    sp.add_argument("--scan", help="lo:hi[:n] log-grid scan proposing a ladder, then re-verified")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("certify", help="run the multiplicity ladder")
    common(sp)
    sp.add_argument("--ladder", required=True)
    sp.add_argument("--at-least", type=int, default=1, dest="at_least")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("solve", help="search fixed points by damped Picard iteration")
    common(sp, fmt=False)
    solving(sp)
    sp.add_argument("--out", default="solutions", help="output directory for CSV and JSON")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("report", help="full pipeline report")
    common(sp)
    solving(sp)
    sp.add_argument("--ladder")
    sp.add_argument("--solve", action="store_true")
    sp.add_argument("--out", help="write the report here instead of stdout")
    sp.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ProblemError, SchemaError, ExprSyntaxError, AssumptionError, LadderError, MatrixError,
            UsageError) as err:
        print(f"conekit: invalid input: {err}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as err:
        print(f"conekit: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except (ConekitError, ArithmeticError, ValueError) as err:
        print(f"conekit: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
