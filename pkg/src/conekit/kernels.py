"""Green's kernels, their upper bounds Phi(s), concentration constants and gamma terms."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import AssumptionError
from .expr import Expression, parse
from .poly import poly_extremum, to_poly
from .quadrature import extremum_on_interval

TS = ("t", "s")

# u'' + g f = 0, u(0) = u(1) = 0
DIRICHLET2 = dict(
    lower="s*(1 - t)",
    upper="t*(1 - s)",
    phi="s*(1 - s)",
)
# simply supported beam v'''' = g f, v(0) = v(1) = v''(0) = v''(1) = 0
BEAM4 = dict(
    lower="(1/6)*s*(1 - t)*(2*t - s^2 - t^2)",
    upper="(1/6)*t*(1 - s)*(2*s - t^2 - s^2)",
    phi=("piecewise(s in [0, 1/2]: sqrt(3)/27*s*(1 - s^2)^(3/2); "
         "s in (1/2, 1]: sqrt(3)/27*(1 - s)*s^(3/2)*(2 - s)^(3/2))"),
    conc=("piecewise(t in [0, 1/2]: 3*sqrt(3)/2*t*(1 - t^2); "
          "t in (1/2, 1]: 3*sqrt(3)/2*t*(1 - t)*(2 - t))"),
)


@dataclass(frozen=True)
class KernelSpec:
    kind: str  # "builtin2" | "builtin4" | "custom"
    lower: Expression  # used where s <= t
    upper: Expression  # used where s > t
    phi: Expression
    conc: Optional[Expression] = None  # c(t) with k(t, s) >= c(t) phi(s)
    conc_value: Optional[Fraction] = None  # constant c, overrides conc

    @property
    def breakpoints_s(self):
        return sorted(set(self.phi.breakpoints("s")))


def builtin2() -> KernelSpec:
    return KernelSpec("builtin2", parse(DIRICHLET2["lower"], TS), parse(DIRICHLET2["upper"], TS),
                      parse(DIRICHLET2["phi"], ("s",)))


def builtin4() -> KernelSpec:
    return KernelSpec("builtin4", parse(BEAM4["lower"], TS), parse(BEAM4["upper"], TS),
                      parse(BEAM4["phi"], ("s",)), parse(BEAM4["conc"], ("t",)))


def custom(lower: str, upper: str, phi: str, conc=None) -> KernelSpec:
    conc_expr = conc_value = None
    if conc is not None:
        if isinstance(conc, (int, Fraction)):
            conc_value = Fraction(conc)
        else:
            conc_expr = parse(conc, ("t",))
    return KernelSpec("custom", parse(lower, TS), parse(upper, TS), parse(phi, ("s",)), conc_expr, conc_value)


def from_name(name: str) -> KernelSpec:
    try:
        return {"builtin2": builtin2, "builtin4": builtin4}[name]()
    except KeyError:
        raise ValueError(f"unknown builtin kernel {name!r}") from None


def eval_kernel(k: KernelSpec, t, s):
    if not (0 <= t <= 1 and 0 <= s <= 1):
        raise ValueError(f"kernel arguments ({t}, {s}) outside [0,1]^2")
    piece = k.lower if s <= t else k.upper
    return piece.exact(t=t, s=s)


def kernel_array(k: KernelSpec, t, s) -> np.ndarray:
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    out = np.empty(t.shape)
    low = s <= t
    if low.any():
        out[low] = k.lower.array(t=t[low], s=s[low])
    if (~low).any():
        out[~low] = k.upper.array(t=t[~low], s=s[~low])
    return out


def derive_c(k: KernelSpec, a, b):
    """Constant c with k(t, s) >= c phi(s) for t in [a, b]."""
    if not (0 < a < b < 1):
        raise ValueError("derive_c needs 0 < a < b < 1")
    if k.kind == "builtin2":
        c = min(1 - b, a)
    elif k.conc_value is not None:
        c = k.conc_value
    elif k.conc is not None:
        conc = k.conc
        _, c = extremum_on_interval(lambda t: conc.exact(t=t), a, b, "min",
                                    breakpoints=conc.breakpoints("t"))
    else:
        n = 201
        ts = np.union1d(np.linspace(float(a), float(b), n), [])
        ss = np.union1d(np.linspace(0, 1, n), k.breakpoints_s)
        T, S = np.meshgrid(ts, ss, indexing="ij")
        kv = kernel_array(k, T, S)
        ph = np.broadcast_to(k.phi.array(s=S), S.shape)
        pos = ph > 0
        c = float(np.min(kv[pos] / ph[pos]))
        c = min(c, 1.0)
    if c <= 0:
        raise AssumptionError("cᵢ∈(0,1]", f"derived kernel constant c={c} on [{a}, {b}]")
    return c


def bound_margins(k: KernelSpec, a, b, c, n: int = 201):
    """Worst margins (upper, lower) of c*phi(s) <= k(t, s) <= phi(s) on an n x n grid.

    Non-negative margins mean the sandwich holds at every sample.
    """
    ts = np.union1d(np.linspace(0, 1, n), [float(a), float(b)])
    ss = np.union1d(np.linspace(0, 1, n), k.breakpoints_s)
    T, S = np.meshgrid(ts, ss, indexing="ij")
    kv = kernel_array(k, T, S)
    ph = np.broadcast_to(k.phi.array(s=S), S.shape)
    upper = float(np.min(ph - kv))
    inside = (T >= float(a)) & (T <= float(b))
    lower = float(np.min(kv[inside] - float(c) * ph[inside]))
    return upper, lower, float(np.min(kv))


@dataclass(frozen=True)
class GammaTerm:
    expr: Expression
    sup_norm: object
    c_gamma: object
    min_ab: object  # min of gamma on [a, b], equals c_gamma * sup_norm
    min_01: object


def _extremum(g: Expression, lo, hi, mode):
    p = to_poly(g, ("t",))
    if p is not None:
        return poly_extremum(p, "t", lo, hi, mode)[1]
    return extremum_on_interval(lambda t: g.exact(t=t), lo, hi, mode, breakpoints=g.breakpoints("t"))[1]


def derive_gamma_constants(g: Expression, a, b, allow_zero: bool = False) -> GammaTerm:
    """sup-norm of gamma and the largest c with gamma(t) >= c ||gamma|| on [a, b]."""
    sup = _extremum(g, 0, 1, "max")
    low = _extremum(g, 0, 1, "min")
    min_ab = _extremum(g, a, b, "min")
    if low < 0:
        raise AssumptionError("γᵢⱼ(t)≥0", f"gamma '{g.source}' reaches {float(low):.6g} on [0,1]")
    if sup == 0:
        if not allow_zero:
            raise AssumptionError("γᵢⱼ(t)≥cᵢⱼ‖γᵢⱼ‖∞", f"gamma '{g.source}' vanishes identically")
        return GammaTerm(g, sup, Fraction(1), min_ab, low)
    c = min_ab / sup
    if c <= 0:
        raise AssumptionError("γᵢⱼ(t)≥cᵢⱼ‖γᵢⱼ‖∞",
                              f"gamma '{g.source}' vanishes somewhere on [{a}, {b}], so no c in (0,1] exists")
    return GammaTerm(g, sup, c, min_ab, low)
