"""Exact index thresholds of the Example next to the two-decimal figures printed for it."""
from pathlib import Path

from conekit import index as ix
from conekit.constants import compute_all
from conekit.problem import load

PRINTED = [("(I0*) f1 inf", "index0", 1, 14.81), ("(I1) f1 sup", "index1", 1, 2.97),
           ("(I1) f2 sup", "index1", 2, 53.93), ("(I0) f2 inf", "index0", 2, 141.49)]


def main():
    p = load(Path(__file__).resolve().parent.parent / "problems" / "example.json")
    k = compute_all(p)
    th = ix.thresholds(p, k)
    print(f"{'condition':<14} {'exact':>16} {'decimal':>12} {'printed':>9} {'diff':>8}")
    for label, kind, i, printed in PRINTED:
        v = getattr(th, kind)[i]
        exact = str(v) if hasattr(v, "denominator") else "-"
        print(f"{label:<14} {exact:>16} {float(v):>12.6f} {printed:>9} {float(v) - printed:>+8.3f}")


if __name__ == "__main__":
    main()
