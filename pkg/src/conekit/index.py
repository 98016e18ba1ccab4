"""The index conditions (I1), (I0), (I0*) at a radius rho, and the multiplicity ladder."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .constants import TheoryConstants
from .errors import ConekitError, EvalError, LadderError
from .parallel import pmap
from .problem import ProblemDef

INDEX1, INDEX0, INDEX0_STAR = "index1", "index0", "index0_star"
KINDS = (INDEX1, INDEX0, INDEX0_STAR)
KIND_ALIASES = {"one": INDEX1, "1": INDEX1, "index1": INDEX1,
                "zero": INDEX0, "0": INDEX0, "index0": INDEX0,
                "star": INDEX0_STAR, "zero_star": INDEX0_STAR, "index0_star": INDEX0_STAR}


def kind_of(name: str) -> str:
    try:
        return KIND_ALIASES[name.strip().lower()]
    except KeyError:
        raise LadderError(f"unknown condition kind {name!r}") from None


# ---------------------------------------------------------------- f over boxes

Box = tuple  # ((t_lo, t_hi), (u_lo, u_hi), (v_lo, v_hi))


@dataclass(frozen=True)
class BoxExtremum:
    equation: int
    box: Box
    mode: str  # "sup" | "inf"
    rho: object
    raw: object  # extremum of f itself
    value: object  # raw / rho
    source: str  # "sampled" | "user-exact"
    arg: tuple = ()
    refinement: int = 0


def index1_box(p: ProblemDef, i, rho) -> Box:
    return ((Fraction(0), Fraction(1)), (0, rho), (0, rho))


def index0_box(p: ProblemDef, i, rho, star=False) -> Box:
    eq = p.eq(i)
    top = rho / p.c
    if star:
        return ((eq.a, eq.b), (0, top), (0, top))
    if i == 1:
        return ((eq.a, eq.b), (rho, top), (0, top))
    return ((eq.a, eq.b), (0, top), (rho, top))


def _sample(f, box, n):
    axes = [np.linspace(float(lo), float(hi), n) for lo, hi in box]
    T, U, V = np.meshgrid(*axes, indexing="ij")
    try:
        vals = np.broadcast_to(f.array(t=T, u=U, v=V), T.shape)
    except (EvalError, FloatingPointError, ValueError) as err:
        raise ConekitError(f"f evaluation failed inside box {box}: {err}") from err
    return axes, vals


def f_extremum(p: ProblemDef, i, box: Box, mode: str, rho=1, grid: int = None) -> BoxExtremum:
    """Sampled sup or inf of f_i over box, divided by rho; exact overrides win."""
    if mode not in ("sup", "inf"):
        raise ValueError("mode must be 'sup' or 'inf'")
    for bound in p.f_bounds:
        if bound.matches(i, mode, box):
            return BoxExtremum(i, box, mode, rho, bound.value, bound.value / rho, "user-exact")
    grid = grid or p.options.f_grid
    if grid < 2:
        raise ValueError("grid must be at least 2")
    f = p.eq(i).f
    pick = np.argmax if mode == "sup" else np.argmin
    axes, vals = _sample(f, box, grid)
    idx = np.unravel_index(pick(vals), vals.shape)
    best = float(vals[idx])
    arg = tuple(float(a[k]) for a, k in zip(axes, idx))
    # one refinement pass: +-1 cell around the incumbent at 3x density
    sub = []
    for a, k, (lo, hi) in zip(axes, idx, box):
        h = a[1] - a[0] if len(a) > 1 else 0.0
        sub.append((max(float(lo), a[k] - h), min(float(hi), a[k] + h)))
    axes2, vals2 = _sample(f, sub, 7)
    idx2 = np.unravel_index(pick(vals2), vals2.shape)
    cand = float(vals2[idx2])
    if (mode == "sup" and cand > best) or (mode == "inf" and cand < best):
        best = cand
        arg = tuple(float(a[k]) for a, k in zip(axes2, idx2))
    return BoxExtremum(i, box, mode, rho, best, best / float(rho), "sampled", arg, refinement=1)


# ---------------------------------------------------------------- coefficients

def index1_coefficients(p: ProblemDef, k: TheoryConstants, i):
    """(A, C) with lhs(I1) = f^{0,rho} * A + C."""
    e = k.eq(i)
    t1, t2 = p.bt(i, 1), p.bt(i, 2)
    g1, g2 = k.term(i, 1).gamma_norm, k.term(i, 2).gamma_norm
    th1, th2, th3, th4 = e.theta
    A = ((g1 * t1.h_hi * th1 + g2 * t2.h_hi * th3) * k.term(i, 1).kf_full
         + (g1 * t1.h_hi * th2 + g2 * t2.h_hi * th4) * k.term(i, 2).kf_full
         + e.inv_m)
    C = (g1 * t1.h_hi * (th1 * e.Q + th2 * e.S) + g2 * t2.h_hi * (th3 * e.Q + th4 * e.S)
         + g1 * t1.l_hi * k.term(i, 1).delta_one + g2 * t2.l_hi * k.term(i, 2).delta_one)
    return A, C


def index0_coefficient(p: ProblemDef, k: TheoryConstants, i):
    """B with lhs(I0) = f_{(rho, rho/c)} * B."""
    e = k.eq(i)
    t1, t2 = p.bt(i, 1), p.bt(i, 2)
    w1 = k.term(i, 1).c_gamma * k.term(i, 1).gamma_norm * t1.h_lo / e.D_under
    w2 = k.term(i, 2).c_gamma * k.term(i, 2).gamma_norm * t2.h_lo / e.D_under
    bg = k.bg
    return ((w1 * (1 - t2.h_lo * bg(i, 2, 2)) + w2 * t1.h_lo * bg(i, 2, 1)) * k.term(i, 1).kf_ab
            + (w1 * t2.h_lo * bg(i, 1, 2) + w2 * (1 - t1.h_lo * bg(i, 1, 1))) * k.term(i, 2).kf_ab
            + e.inv_M)


@dataclass(frozen=True)
class Thresholds:
    index1: dict  # i -> (1 - C) / A: f^{0,rho} must stay below
    index0: dict  # i -> 1 / B: f_{(rho, rho/c)} must exceed


def thresholds(p: ProblemDef, k: TheoryConstants) -> Thresholds:
    one, zero = {}, {}
    for i in (1, 2):
        A, C = index1_coefficients(p, k, i)
        one[i] = (1 - C) / A
        zero[i] = 1 / index0_coefficient(p, k, i)
    return Thresholds(one, zero)


# ---------------------------------------------------------------- conditions

@dataclass(frozen=True)
class RhoCondition:
    kind: str
    rho: object
    lhs: dict  # i -> left-hand side
    margins: dict  # i -> 1 - lhs (index1) or lhs - 1 (index0 variants)
    thresholds: dict  # i -> critical value for the f-extremum
    extrema: dict  # i -> BoxExtremum
    satisfied: bool

    @property
    def margin(self):
        m = list(self.margins.values())
        return max(m) if self.kind == INDEX0_STAR else min(m)

    @property
    def provenance(self):
        return {i: e.source for i, e in self.extrema.items()}


def _rho(rho):
    if isinstance(rho, float):
        rho = Fraction(rho)
    if rho <= 0:
        raise ValueError("rho must be positive")
    return rho


def check_index1(p: ProblemDef, k: TheoryConstants, rho, grid=None) -> RhoCondition:
    rho = _rho(rho)
    lhs, margins, thr, ext = {}, {}, {}, {}
    for i in (1, 2):
        A, C = index1_coefficients(p, k, i)
        ext[i] = f_extremum(p, i, index1_box(p, i, rho), "sup", rho, grid)
        lhs[i] = ext[i].value * A + C
        margins[i] = 1 - lhs[i]
        thr[i] = (1 - C) / A
    return RhoCondition(INDEX1, rho, lhs, margins, thr, ext, all(m > 0 for m in margins.values()))


def check_index0(p: ProblemDef, k: TheoryConstants, rho, star: bool = False, grid=None) -> RhoCondition:
    rho = _rho(rho)
    lhs, margins, thr, ext = {}, {}, {}, {}
    for i in (1, 2):
        B = index0_coefficient(p, k, i)
        ext[i] = f_extremum(p, i, index0_box(p, i, rho, star), "inf", rho, grid)
        lhs[i] = ext[i].value * B
        margins[i] = lhs[i] - 1
        thr[i] = 1 / B
    ok = [m > 0 for m in margins.values()]
    return RhoCondition(INDEX0_STAR if star else INDEX0, rho, lhs, margins, thr, ext,
                        any(ok) if star else all(ok))


def check(p: ProblemDef, k: TheoryConstants, rho, kind: str, grid=None) -> RhoCondition:
    kind = kind_of(kind)
    if kind == INDEX1:
        return check_index1(p, k, rho, grid)
    return check_index0(p, k, rho, star=kind == INDEX0_STAR, grid=grid)


# ---------------------------------------------------------------- multiplicity

CLAUSES = {
    (INDEX0, INDEX1): "S1",
    (INDEX1, INDEX0): "S2",
    (INDEX0, INDEX1, INDEX0): "S3",
    (INDEX1, INDEX0, INDEX1): "S4",
    (INDEX0, INDEX1, INDEX0, INDEX1): "S5",
    (INDEX1, INDEX0, INDEX1, INDEX0): "S6",
}


@dataclass(frozen=True)
class GapCheck:
    constraint: str
    lhs: object
    rhs: object
    satisfied: bool


@dataclass(frozen=True)
class MultiplicityVerdict:
    clause: str
    rho_ladder: tuple  # ((rho, kind), ...)
    guaranteed_count: int
    gap_checks: tuple
    conditions: tuple = ()
    window: tuple = (0, 0)  # [start, stop) of the ladder entries the clause uses


def _is_zero(kind):
    return kind in (INDEX0, INDEX0_STAR)


def validate_ladder(ladder):
    ladder = [(_rho(r), kind_of(kd)) for r, kd in ladder]
    if not ladder:
        raise LadderError("empty ladder")
    for n, (r, kd) in enumerate(ladder):
        if kd == INDEX0_STAR and n != 0:
            raise LadderError("(I0*) is only admissible as the first rung")
        if n and not r > ladder[n - 1][0]:
            raise LadderError("ladder radii must be strictly increasing")
        if n and _is_zero(kd) == _is_zero(ladder[n - 1][1]):
            raise LadderError("ladder kinds must alternate between index 1 and index 0")
    return ladder


def gap_checks(ladder, c, offset=0):
    out = []
    for n in range(len(ladder) - 1):
        (r0, k0), (r1, _) = ladder[n], ladder[n + 1]
        a, b = n + 1 + offset, n + 2 + offset
        if _is_zero(k0):
            out.append(GapCheck(f"rho{a}/c < rho{b}", r0 / c, r1, r0 / c < r1))
        else:
            out.append(GapCheck(f"rho{a} < rho{b}", r0, r1, r0 < r1))
    return out


def clause_name(kinds):
    base = tuple(INDEX0 if _is_zero(kd) else kd for kd in kinds)
    if len(base) < 2:
        return "none"
    return CLAUSES.get(base, f"extended({len(base) - 1})")


def verdict_from_conditions(conditions, c) -> MultiplicityVerdict:
    """Longest contiguous run of satisfied conditions whose gap constraints all hold."""
    ladder = validate_ladder([(cd.rho, cd.kind) for cd in conditions])
    gaps = gap_checks(ladder, c)
    best = (0, 0)
    for start in range(len(ladder)):
        stop = start
        while stop < len(ladder) and conditions[stop].satisfied and \
                (stop == start or gaps[stop - 1].satisfied):
            stop += 1
        if stop - start > best[1] - best[0]:
            best = (start, stop)
    start, stop = best
    window = ladder[start:stop]
    clause = clause_name([kd for _, kd in window])
    count = 0 if clause == "none" else len(window) - 1
    return MultiplicityVerdict(clause, tuple(ladder), count, tuple(gaps), tuple(conditions), best)


def multiplicity(p: ProblemDef, k: TheoryConstants, ladder, grid=None) -> MultiplicityVerdict:
    ladder = validate_ladder(ladder)
    conds = pmap(lambda rk: check(p, k, rk[0], rk[1], grid), ladder)
    return verdict_from_conditions(conds, k.c)


def propose_ladder(p: ProblemDef, k: TheoryConstants, rho_min, rho_max, n: int = 48, grid=None):
    """Scan a log grid of radii and return the longest admissible ladder found.

    The proposal is a convenience only; feed it back to multiplicity() to certify.
    """
    rhos = [Fraction(float(x)).limit_denominator(10**6)
            for x in np.geomspace(float(rho_min), float(rho_max), n)]
    rhos = sorted(set(rhos))
    results = pmap(lambda r: (check_index1(p, k, r, grid), check_index0(p, k, r, False, grid),
                              check_index0(p, k, r, True, grid)), rhos)
    c = k.c
    # nodes: (position, kind); chain[node] = longest ladder ending there
    nodes = []
    for pos, (one, zero, star) in enumerate(results):
        if one.satisfied:
            nodes.append((pos, INDEX1))
        if zero.satisfied:
            nodes.append((pos, INDEX0))
        if star.satisfied:
            nodes.append((pos, INDEX0_STAR))
    chain = {}
    for node in nodes:
        pos, kd = node
        best = [node]
        if kd != INDEX0_STAR:
            for prev in nodes:
                ppos, pkd = prev
                if ppos >= pos or _is_zero(pkd) == _is_zero(kd) or prev not in chain:
                    continue
                r0, r1 = rhos[ppos], rhos[pos]
                ok = r0 / c < r1 if _is_zero(pkd) else r0 < r1
                if ok and len(chain[prev]) + 1 > len(best):
                    best = chain[prev] + [node]
        chain[node] = best
    if not chain:
        return []
    longest = max(chain.values(), key=len)
    return [(rhos[pos], kd) for pos, kd in longest]
