"""Node-doubling study: sup-norm change between successive solutions and its ratio."""
import argparse
import json
from pathlib import Path

import numpy as np

from conekit import solver as sv
from conekit.problem import load

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("problem", nargs="?", default=ROOT / "problems" / "smooth.json")
    ap.add_argument("--levels", type=int, nargs="+", default=[17, 33, 65, 129, 257])
    args = ap.parse_args()
    p = load(args.problem)
    xs = np.linspace(0, 1, 2001)
    prev, prev_change = None, None
    print(f"{'nodes':>6} {'norm':>14} {'residual':>10} {'change':>10} {'ratio':>7}")
    for n in args.levels:
        nodes = sv.default_nodes(p, n)
        start = (sv.GridFunction.constant(nodes, 0),) * 2
        r = sv.picard(p, start, tol=1e-14)
        cur = np.concatenate([r.u(xs), r.v(xs)])
        change = None if prev is None else float(np.max(np.abs(cur - prev)))
        ratio = "" if change is None or prev_change is None else f"{prev_change / change:7.2f}"
        shown = "" if change is None else f"{change:10.2e}"
        print(f"{len(nodes):>6} {r.norm:>14.10f} {r.residual:>10.1e} {shown:>10} {ratio:>7}")
        prev, prev_change = cur, change


if __name__ == "__main__":
    main()
