"""Problem files: JSON ingestion, the ProblemDef model and standing-assumption checks."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels as kn
from .errors import AssumptionError, ConekitError, EvalError, ExprSyntaxError, ProblemError
from .expr import Expression, parse
from .poly import to_poly
from .quadrature import Measure, integrate, stieltjes_expr

SPEC_VERSION = 1
INDICES = ((1, 1), (1, 2), (2, 1), (2, 2))

# One label per standing assumption; every rejection cites exactly one of these.
ASSUMPTIONS = {
    "interval": "[aᵢ,bᵢ]⊆[0,1]",
    "kernel": "cᵢΦᵢ(s)≤kᵢ(t,s)≤Φᵢ(s)",
    "kernel_c": "cᵢ∈(0,1]",
    "g": "gᵢ≥0",
    "phi_g": "∫ₐᵇΦᵢgᵢ>0",
    "f": "fᵢ≥0",
    "measure": "dBᵢⱼ, dCᵢⱼ positive measures",
    "hl": "hᵢⱼ₁w≤Hᵢⱼ(w)≤hᵢⱼ₂w, Lᵢⱼ(w)≤lᵢⱼ₂w",
    "gamma": "γᵢⱼ(t)≥0",
    "gamma_c": "γᵢⱼ(t)≥cᵢⱼ‖γᵢⱼ‖∞",
    "h_beta": "hᵢⱼ₂βᵢⱼ[γᵢⱼ]<1",
    "D": "Dᵢ>0",
    "D_under": "D̲ᵢ>0",
}


class SchemaError(ConekitError):
    pass


@dataclass(frozen=True)
class Options:
    tol: float = 1e-10
    f_grid: int = 64
    hl_wmax: float = 1e3
    hl_samples: int = 10_000
    sample_grid: int = 201
    nodes: int = 257
    damping: float = 0.5
    max_iter: int = 5000
    picard_tol: float = 1e-11
    ceiling: float = 1e8


@dataclass(frozen=True)
class Equation:
    kernel: kn.KernelSpec
    g: Expression
    f: Expression
    a: Fraction
    b: Fraction
    c: object  # kernel concentration constant c_i


@dataclass(frozen=True)
class BoundaryTerm:
    gamma: kn.GammaTerm
    beta: Measure
    delta: Measure
    h_lo: Fraction
    h_hi: Fraction
    l_hi: Fraction
    H: Optional[Expression] = None
    L: Optional[Expression] = None


@dataclass(frozen=True)
class FBound:
    """User-supplied exact extremum of f_i over a box (overrides sampling)."""

    equation: int
    mode: str
    box: tuple  # ((t_lo, t_hi), (u_lo, u_hi), (v_lo, v_hi))
    value: Fraction

    def matches(self, i, mode, box, rel=1e-12):
        if i != self.equation or mode != self.mode:
            return False
        for (a0, b0), (a1, b1) in zip(self.box, box):
            for x, y in ((a0, a1), (b0, b1)):
                if abs(float(x) - float(y)) > rel * max(1.0, abs(float(x))):
                    return False
        return True


@dataclass(frozen=True)
class ProblemDef:
    name: str
    equations: tuple
    boundary: dict
    options: Options
    f_bounds: tuple = ()
    beta_gamma: dict = field(default_factory=dict)  # (i, j, l) -> beta_ij[gamma_il]
    digest: str = ""

    def eq(self, i) -> Equation:
        return self.equations[i - 1]

    def bt(self, i, j) -> BoundaryTerm:
        return self.boundary[(i, j)]

    def tilde_c(self, i):
        return min(self.eq(i).c, self.bt(i, 1).gamma.c_gamma, self.bt(i, 2).gamma.c_gamma)

    @property
    def c(self):
        return min(self.tilde_c(1), self.tilde_c(2))

    def atom_locations(self):
        locs = set()
        for term in self.boundary.values():
            locs.update(term.beta.locations)
            locs.update(term.delta.locations)
        return sorted(locs)

    def has_solver_terms(self):
        return all(t.H is not None and t.L is not None for t in self.boundary.values())


# ---------------------------------------------------------------- parsing helpers

def number(x, what="number") -> Fraction:
    """JSON numbers and "p/q" strings as exact Fractions."""
    if isinstance(x, bool):
        raise SchemaError(f"{what}: expected a number, got {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise SchemaError(f"{what}: non-finite number")
        return Fraction(repr(x))
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise SchemaError(f"{what}: cannot read {x!r} as a rational") from None
    raise SchemaError(f"{what}: expected a number, got {type(x).__name__}")


def _expr(src, variables, what):
    if isinstance(src, (int, float)) and not isinstance(src, bool):
        src = str(src)
    if not isinstance(src, str):
        raise SchemaError(f"{what}: expected an expression string")
    try:
        return parse(src, variables)
    except ExprSyntaxError as err:
        raise SchemaError(f"{what}: {err}") from None


def _measure(obj, what):
    if obj is None:
        return Measure()
    if not isinstance(obj, dict):
        raise SchemaError(f"{what}: expected an object with 'atoms' and optional 'density'")
    atoms = []
    for n, atom in enumerate(obj.get("atoms", [])):
        try:
            atoms.append((number(atom["at"], f"{what}.atoms[{n}].at"),
                          number(atom.get("weight", 1), f"{what}.atoms[{n}].weight")))
        except (KeyError, TypeError):
            raise SchemaError(f"{what}.atoms[{n}]: expected {{'at': ..., 'weight': ...}}") from None
    density = obj.get("density")
    density = None if density in (None, "") else _expr(density, ("t",), f"{what}.density")
    return Measure(tuple(atoms), density)


def _interval(obj, what):
    if not isinstance(obj, (list, tuple)) or len(obj) != 2:
        raise SchemaError(f"{what}: expected [lo, hi]")
    return number(obj[0], what), number(obj[1], what)


def _kernel(obj, what):
    if isinstance(obj, str):
        try:
            return kn.from_name(obj)
        except ValueError as err:
            raise SchemaError(f"{what}: {err}") from None
    if isinstance(obj, dict):
        for key in ("lower", "upper", "phi"):
            if key not in obj:
                raise SchemaError(f"{what}: custom kernel needs '{key}'")
        conc = obj.get("c")
        conc_expr = conc_value = None
        if conc is not None:
            if isinstance(conc, str) and any(ch.isalpha() for ch in conc):
                conc_expr = _expr(conc, ("t",), f"{what}.c")
            else:
                conc_value = number(conc, f"{what}.c")
        return kn.KernelSpec("custom", _expr(obj["lower"], kn.TS, f"{what}.lower"),
                             _expr(obj["upper"], kn.TS, f"{what}.upper"),
                             _expr(obj["phi"], ("s",), f"{what}.phi"), conc_expr, conc_value)
    raise SchemaError(f"{what}: expected 'builtin2', 'builtin4' or a custom kernel object")


def _options(obj):
    if obj is None:
        return Options()
    if not isinstance(obj, dict):
        raise SchemaError("options: expected an object")
    known = Options.__dataclass_fields__
    unknown = set(obj) - set(known)
    if unknown:
        raise SchemaError(f"options: unknown key(s) {sorted(unknown)}")
    kw = {}
    for k, v in obj.items():
        typ = type(getattr(Options, k))
        kw[k] = typ(float(number(v, f"options.{k}"))) if typ is not int else int(v)
    return Options(**kw)


def _detail(err: AssumptionError) -> str:
    return str(err).split(": ", 1)[-1]


def _violation(key, where, detail):
    return AssumptionError(ASSUMPTIONS[key], f"{where}: {detail}")


# ---------------------------------------------------------------- checks

def _sample_min(e: Expression, n, **fixed_ranges):
    grids = {}
    for var, (lo, hi) in fixed_ranges.items():
        pts = np.linspace(float(lo), float(hi), n)
        grids[var] = np.union1d(pts, [float(b) for b in e.breakpoints(var) if float(lo) <= b <= float(hi)])
    mesh = np.meshgrid(*grids.values(), indexing="ij")
    vals = e.array(**dict(zip(grids, mesh)))
    k = int(np.argmin(vals))
    where = {v: float(m.reshape(-1)[k]) for v, m in zip(grids, mesh)}
    return float(vals.reshape(-1)[k]), where


def _phi_g_integral(eq: Equation, tol):
    phi = to_poly(eq.kernel.phi, ("s",))
    g = to_poly(eq.g, ("s",))
    if phi is not None and g is not None:
        return (phi * g).integrate("s", eq.a, eq.b).constant_value()
    brk = eq.kernel.breakpoints_s + eq.g.breakpoints("s")
    return integrate(lambda s: eq.kernel.phi.array(s=s) * eq.g.array(s=s), eq.a, eq.b, brk, tol)


@dataclass
class HLReport:
    entries: list  # dicts: i, j, which, worst_margin, at_w
    ok: bool

    def worst(self):
        return min((e["worst_margin"] for e in self.entries), default=0.0)


def validate_HL_consistency(p: ProblemDef, W_max: float = None, n: int = None, slack: float = 1e-12) -> HLReport:
    """Sampled check of h_lo w <= H(w) <= h_hi w and 0 <= L(w) <= l_hi w on (0, W_max].

    Sampling cannot prove the bounds, so violations are reported, not raised.
    """
    W_max = float(W_max if W_max is not None else p.options.hl_wmax)
    n = int(n if n is not None else p.options.hl_samples)
    entries = []
    for (i, j), term in sorted(p.boundary.items()):
        for which, fn in (("H", term.H), ("L", term.L)):
            if fn is None:
                continue
            w = np.geomspace(W_max * 1e-9, W_max, n)
            extra = [b for b in fn.breakpoints("w") if 0 < b <= W_max]
            w = np.union1d(w, [float(b) for b in extra])
            vals = fn.array(w=w)
            if which == "H":
                margins = np.minimum(vals - float(term.h_lo) * w, float(term.h_hi) * w - vals)
            else:
                margins = np.minimum(vals, float(term.l_hi) * w - vals)
            k = int(np.argmin(margins))
            entries.append(dict(i=i, j=j, which=which, worst_margin=float(margins[k]), at_w=float(w[k]),
                                ok=bool(np.all(margins >= -slack * np.maximum(1.0, w)))))
    return HLReport(entries, all(e["ok"] for e in entries))


def _D(term1, term2, bg, i, lo_hi):
    h1 = getattr(term1, lo_hi)
    h2 = getattr(term2, lo_hi)
    return (1 - h1 * bg[(i, 1, 1)]) * (1 - h2 * bg[(i, 2, 2)]) - h1 * h2 * bg[(i, 1, 2)] * bg[(i, 2, 1)]


def build(data: dict, digest: str = "") -> ProblemDef:
    """Assemble and validate a ProblemDef from a decoded problem document."""
    if not isinstance(data, dict):
        raise SchemaError("problem document must be a JSON object")
    if data.get("spec_version") != SPEC_VERSION:
        raise SchemaError(f"spec_version must be {SPEC_VERSION}")
    eqs_raw = data.get("equations")
    if not isinstance(eqs_raw, list) or len(eqs_raw) != 2:
        raise SchemaError("equations: expected an array of exactly 2 objects")
    bnd_raw = data.get("boundary")
    if not isinstance(bnd_raw, list) or len(bnd_raw) != 4:
        raise SchemaError("boundary: expected an array of exactly 4 objects")
    options = _options(data.get("options"))
    violations = []

    equations = []
    for i, raw in enumerate(eqs_raw, start=1):
        where = f"equation {i}"
        if not isinstance(raw, dict):
            raise SchemaError(f"{where}: expected an object")
        for key in ("kernel", "f", "interval"):
            if key not in raw:
                raise SchemaError(f"{where}: missing '{key}'")
        kernel = _kernel(raw["kernel"], f"{where}.kernel")
        g = _expr(raw.get("g", "1"), ("s",), f"{where}.g")
        f = _expr(raw["f"], ("t", "u", "v"), f"{where}.f")
        a, b = _interval(raw["interval"], f"{where}.interval")
        c = None
        if not (0 <= a < b <= 1):
            violations.append(_violation("interval", where, f"[{a}, {b}] is not a proper subinterval of [0,1]"))
        else:
            try:
                c = kn.derive_c(kernel, a, b)
            except ValueError as err:
                violations.append(_violation("interval", where, str(err)))
            except AssumptionError as err:
                violations.append(_violation("kernel_c", where, _detail(err)))
        n = options.sample_grid
        if c is not None:
            up, low, kmin = kn.bound_margins(kernel, a, b, c, n)
            if min(up, low, kmin) < -1e-12:
                violations.append(_violation("kernel", where,
                                             f"sampled margins k>=0: {kmin:.3g}, phi-k: {up:.3g}, k-c*phi: {low:.3g}"))
        try:
            gmin, at = _sample_min(g, n, s=(0, 1))
        except EvalError as err:
            gmin = -1.0
            violations.append(_violation("g", where, f"g is undefined on [0,1]: {err}"))
        else:
            if gmin < 0:
                violations.append(_violation("g", where, f"g(s)={gmin:.6g} at s={at['s']:.6g}"))
        try:
            fmin, at = _sample_min(f, 17, t=(0, 1), u=(0, 2), v=(0, 2))
        except EvalError as err:
            violations.append(_violation("f", where, f"f is undefined on [0,1]x[0,inf)^2: {err}"))
        else:
            if fmin < 0:
                violations.append(_violation("f", where, f"f={fmin:.6g} at {at}"))
        eq = Equation(kernel, g, f, a, b, c)
        if c is not None and gmin >= 0:
            if _phi_g_integral(eq, options.tol) <= 0:
                violations.append(_violation("phi_g", where, f"integral of phi*g over [{a}, {b}] is zero"))
        equations.append(eq)

    boundary = {}
    for n_raw, raw in enumerate(bnd_raw):
        if not isinstance(raw, dict):
            raise SchemaError(f"boundary[{n_raw}]: expected an object")
        try:
            i, j = int(raw["i"]), int(raw["j"])
        except (KeyError, TypeError, ValueError):
            raise SchemaError(f"boundary[{n_raw}]: needs integer 'i' and 'j'") from None
        if (i, j) not in INDICES or (i, j) in boundary:
            raise SchemaError(f"boundary[{n_raw}]: (i,j)=({i},{j}) invalid or repeated")
        where = f"boundary ({i},{j})"
        beta = _measure(raw.get("beta"), f"{where}.beta")
        delta = _measure(raw.get("delta"), f"{where}.delta")
        for name, m in (("beta", beta), ("delta", delta)):
            for issue in m.negative_parts():
                violations.append(_violation("measure", f"{where}.{name}", issue))
        h_lo = number(raw.get("h_lo", 0), f"{where}.h_lo")
        h_hi = number(raw.get("h_hi", 0), f"{where}.h_hi")
        l_hi = number(raw.get("l_hi", 0), f"{where}.l_hi")
        if not (0 <= h_lo <= h_hi) or l_hi < 0:
            violations.append(_violation("hl", where, f"need 0<=h_lo<=h_hi and l_hi>=0, got {h_lo}, {h_hi}, {l_hi}"))
        gamma_expr = _expr(raw.get("gamma", "0"), ("t",), f"{where}.gamma")
        eq = equations[i - 1]
        gamma = None
        try:
            gamma = kn.derive_gamma_constants(gamma_expr, eq.a, eq.b, allow_zero=True)
        except AssumptionError as err:
            key = "gamma" if err.assumption == ASSUMPTIONS["gamma"] else "gamma_c"
            violations.append(_violation(key, where, _detail(err)))
        H = _expr(raw["H"], ("w",), f"{where}.H") if raw.get("H") is not None else None
        L = _expr(raw["L"], ("w",), f"{where}.L") if raw.get("L") is not None else None
        boundary[(i, j)] = BoundaryTerm(gamma, beta, delta, h_lo, h_hi, l_hi, H, L)

    f_bounds = []
    for n_raw, raw in enumerate(data.get("f_bounds", []) or []):
        try:
            box = tuple(_interval(raw["box"][k], f"f_bounds[{n_raw}].box.{k}") for k in ("t", "u", "v"))
            fb = FBound(int(raw["equation"]), raw["mode"], box, number(raw["value"], f"f_bounds[{n_raw}].value"))
        except (KeyError, TypeError):
            raise SchemaError(f"f_bounds[{n_raw}]: needs equation, mode, box{{t,u,v}}, value") from None
        if fb.mode not in ("sup", "inf") or fb.equation not in (1, 2):
            raise SchemaError(f"f_bounds[{n_raw}]: mode must be sup|inf and equation 1|2")
        f_bounds.append(fb)

    if violations:
        raise ProblemError(violations)

    beta_gamma = {}
    for (i, j) in INDICES:
        for l in (1, 2):
            beta_gamma[(i, j, l)] = stieltjes_expr(boundary[(i, l)].gamma.expr, boundary[(i, j)].beta, options.tol)
    for (i, j), term in boundary.items():
        prod = term.h_hi * beta_gamma[(i, j, j)]
        if prod >= 1:
            violations.append(_violation("h_beta", f"boundary ({i},{j})",
                                         f"h_{i}{j}2*beta_{i}{j}[gamma_{i}{j}] = {prod} >= 1"))
    if not violations:
        for i in (1, 2):
            D = _D(boundary[(i, 1)], boundary[(i, 2)], beta_gamma, i, "h_hi")
            if D <= 0:
                violations.append(_violation("D", f"equation {i}", f"D_{i} = {D} <= 0"))
                continue
            Du = _D(boundary[(i, 1)], boundary[(i, 2)], beta_gamma, i, "h_lo")
            if Du <= 0:
                violations.append(_violation("D_under", f"equation {i}", f"lower D_{i} = {Du} <= 0"))

    problem = ProblemDef(str(data.get("name", "")), tuple(equations), boundary, options,
                         tuple(f_bounds), beta_gamma, digest)
    if not violations:
        report = validate_HL_consistency(problem)
        for e in report.entries:
            if not e["ok"]:
                violations.append(_violation("hl", f"boundary ({e['i']},{e['j']}).{e['which']}",
                                             f"sampled margin {e['worst_margin']:.3g} at w={e['at_w']:.6g}"))
    if violations:
        raise ProblemError(violations)
    return problem


def loads(text: str, digest: str = "") -> ProblemDef:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise SchemaError(f"invalid JSON: {err}") from None
    return build(data, digest or hashlib.sha256(text.encode("utf-8")).hexdigest())


def load(path) -> ProblemDef:
    raw = Path(path).read_bytes()
    return loads(raw.decode("utf-8"), hashlib.sha256(raw).hexdigest())


# ---------------------------------------------------------------- serialisation

def _num(x):
    return str(Fraction(x))


def _measure_dict(m: Measure):
    out = {"atoms": [{"at": _num(a), "weight": _num(w)} for a, w in m.atoms]}
    if m.density is not None:
        out["density"] = m.density.source
    return out


def dump(p: ProblemDef) -> dict:
    """Re-serialise a ProblemDef into a problem document that loads back identically."""
    eqs = []
    for eq in p.equations:
        k = eq.kernel
        if k.kind == "custom":
            kernel = {"lower": k.lower.source, "upper": k.upper.source, "phi": k.phi.source}
            if k.conc is not None:
                kernel["c"] = k.conc.source
            elif k.conc_value is not None:
                kernel["c"] = _num(k.conc_value)
        else:
            kernel = k.kind
        eqs.append({"kernel": kernel, "g": eq.g.source, "f": eq.f.source, "interval": [_num(eq.a), _num(eq.b)]})
    bnd = []
    for (i, j) in INDICES:
        t = p.bt(i, j)
        d = {"i": i, "j": j, "gamma": t.gamma.expr.source, "beta": _measure_dict(t.beta),
             "delta": _measure_dict(t.delta), "h_lo": _num(t.h_lo), "h_hi": _num(t.h_hi), "l_hi": _num(t.l_hi)}
        if t.H is not None:
            d["H"] = t.H.source
        if t.L is not None:
            d["L"] = t.L.source
        bnd.append(d)
    opts = {k: getattr(p.options, k) for k in Options.__dataclass_fields__}
    fbs = [{"equation": fb.equation, "mode": fb.mode,
            "box": dict(zip("tuv", ([_num(a), _num(b)] for a, b in fb.box))), "value": _num(fb.value)}
           for fb in p.f_bounds]
    return {"spec_version": SPEC_VERSION, "name": p.name, "equations": eqs, "boundary": bnd,
            "options": opts, "f_bounds": fbs}


def dumps(p: ProblemDef) -> str:
    return json.dumps(dump(p), indent=2, ensure_ascii=False)
