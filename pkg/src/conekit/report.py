"""RunReport: the JSON (schema report.v1) and text renderings of a pipeline run."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

from .constants import TheoryConstants
from .index import MultiplicityVerdict, RhoCondition, Thresholds

SCHEMA = "report.v1"


def num(x) -> dict:
    """A number as {value: float, exact: "p/q" | null}."""
    exact = None
    if isinstance(x, Fraction):
        exact = str(x)
    elif isinstance(x, int) and not isinstance(x, bool):
        exact = str(x)
    return {"value": float(x), "exact": exact}


def _box(box):
    return [[float(lo), float(hi)] for lo, hi in box]


def condition_json(c: RhoCondition) -> dict:
    eqs = {}
    for i in (1, 2):
        e = c.extrema[i]
        eqs[str(i)] = {
            "lhs": num(c.lhs[i]),
            "margin": num(c.margins[i]),
            "threshold": num(c.thresholds[i]),
            "extremum": {
                "box": _box(e.box), "mode": e.mode, "raw": num(e.raw), "value": num(e.value),
                "source": e.source, "arg": [float(a) for a in e.arg], "refinement": e.refinement,
            },
        }
    return {"kind": c.kind, "rho": num(c.rho), "satisfied": c.satisfied, "margin": num(c.margin),
            "equations": eqs}


def verdict_json(v: MultiplicityVerdict) -> dict:
    return {
        "clause": v.clause,
        "guaranteed_count": v.guaranteed_count,
        "rho_ladder": [{"rho": num(r), "kind": k} for r, k in v.rho_ladder],
        "gap_checks": [{"constraint": g.constraint, "lhs": num(g.lhs), "rhs": num(g.rhs),
                        "satisfied": g.satisfied} for g in v.gap_checks],
        "window": list(v.window),
    }


def solution_json(r, csv_path=None) -> dict:
    return {
        "norm": r.norm, "residual": r.residual, "iterations": r.iterations,
        "in_cone": list(r.in_cone), "converged": r.converged, "seed": float(r.seed),
        "bracket": None if r.bracket is None else [float(b) for b in r.bracket],
        "nodes": int(len(r.u.nodes)), "csv": csv_path,
    }


@dataclass
class RunReport:
    problem_name: str
    digest: str
    version: str
    constants: TheoryConstants = None
    thresholds: Thresholds = None
    conditions: list = field(default_factory=list)
    verdict: MultiplicityVerdict = None
    solutions: list = field(default_factory=list)  # already-serialised solution dicts
    wall_time: float = 0.0

    def to_json(self) -> dict:
        out = {
            "schema": SCHEMA,
            "tool": {"name": "conekit", "version": self.version},
            "problem": {"name": self.problem_name, "digest": self.digest},
            "constants": None, "thresholds": None,
            "conditions": [condition_json(c) for c in self.conditions],
            "verdict": None if self.verdict is None else verdict_json(self.verdict),
            "solutions": list(self.solutions),
            "wall_time": self.wall_time,
        }
        if self.constants is not None:
            out["constants"] = {k: num(v) for k, v in self.constants.table().items()}
        if self.thresholds is not None:
            out["thresholds"] = {
                "index1": {str(i): num(v) for i, v in self.thresholds.index1.items()},
                "index0": {str(i): num(v) for i, v in self.thresholds.index0.items()},
            }
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def text(self) -> str:
        lines = [f"problem  {self.problem_name}", f"digest   {self.digest}"]
        if self.constants is not None:
            lines.append("")
            lines += format_table(self.constants.table())
        if self.thresholds is not None:
            lines.append("")
            for i in (1, 2):
                lines.append(f"threshold index1 eq{i}  f^(0,rho) < {fmt(self.thresholds.index1[i])}")
                lines.append(f"threshold index0 eq{i}  f_(rho,rho/c) > {fmt(self.thresholds.index0[i])}")
        if self.conditions:
            lines.append("")
        for c in self.conditions:
            state = "SATISFIED" if c.satisfied else "not satisfied"
            lines.append(f"{c.kind:<12} rho={fmt(c.rho):<14} {state}")
            for i in (1, 2):
                e = c.extrema[i]
                lines.append(f"    eq{i}: lhs={float(c.lhs[i]):.6g} threshold={float(c.thresholds[i]):.6g} "
                             f"f/rho={float(e.value):.6g} ({e.source})")
        if self.verdict is not None:
            v = self.verdict
            lines += ["", f"clause {v.clause}: at least {v.guaranteed_count} positive solution(s)"]
            for g in v.gap_checks:
                mark = "ok" if g.satisfied else "FAILS"
                lines.append(f"    {g.constraint}: {fmt(g.lhs)} vs {fmt(g.rhs)} {mark}")
        for n, s in enumerate(self.solutions, 1):
            lines.append(f"solution {n}: norm={s['norm']:.10g} residual={s['residual']:.3g} "
                         f"in_cone={s['in_cone']}")
        return "\n".join(lines) + "\n"


def fmt(x) -> str:
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return str(x.numerator)
        return f"{x} ≈ {float(x):.10g}"
    if isinstance(x, int):
        return str(x)
    return f"{float(x):.10g}"


def format_table(table: dict) -> list:
    width = max(len(k) for k in table)
    return [f"{k:<{width}}  {fmt(v)}" for k, v in table.items()]


def load_schema() -> dict:
    return json.loads(resources.files("conekit").joinpath("schemas/report.v1.json").read_text())
