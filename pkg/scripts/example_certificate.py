"""Certify the worked Example: constants, the three conditions, and the S3 verdict."""
import argparse
from fractions import Fraction
from pathlib import Path

from conekit import index as ix
from conekit.constants import compute_all
from conekit.problem import load
from conekit.report import RunReport

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("problem", nargs="?", default=ROOT / "problems" / "example.json")
    ap.add_argument("--sampled", action="store_true", help="ignore the exact f overrides")
    args = ap.parse_args()
    p = load(args.problem)
    if args.sampled:
        from dataclasses import replace
        p = replace(p, f_bounds=())
    k = compute_all(p)
    ladder = [(Fraction(1, 8), "star"), (1, "one"), (11, "zero")]
    verdict = ix.multiplicity(p, k, ladder)
    rep = RunReport(p.name, p.digest, "script", constants=k, thresholds=ix.thresholds(p, k),
                    conditions=list(verdict.conditions), verdict=verdict)
    print(rep.text(), end="")


if __name__ == "__main__":
    main()
