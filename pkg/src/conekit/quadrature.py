"""Adaptive Gauss-Legendre quadrature, Riemann-Stieltjes functionals, extremum search."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import EvalError, QuadratureError
from .expr import Expression
from .poly import Poly, to_poly

DEFAULT_TOL = 1e-10
GL_ORDER = 15
MAX_SUBDIVISIONS = 2 ** 14

_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


@dataclass(frozen=True)
class Panelization:
    breakpoints: tuple = ()

    @classmethod
    def of(cls, points, lo, hi):
        """Keep the points strictly inside (lo, hi), sorted and deduplicated."""
        inside = sorted({float(p) for p in points if float(lo) < float(p) < float(hi)})
        return cls(tuple(inside))


def _gl(f, a, b):
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * _GL_X
    y = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    if not np.all(np.isfinite(y)):
        raise QuadratureError(f"integrand returned NaN/inf on [{a}, {b}]")
    return half * float(np.dot(_GL_W, y))


def integrate(f: Callable, lo, hi, panels: Panelization | tuple = (), tol: float = DEFAULT_TOL,
              max_subdivisions: int = MAX_SUBDIVISIONS) -> float:
    """Adaptive composite 15-point Gauss-Legendre on [lo, hi].

    ``f`` must accept a 1-D float array. Panels never straddle a breakpoint.
    The error budget ``tol`` is split across panels in proportion to length.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = float(lo), float(hi)
    if hi < lo:
        raise ValueError("integrate needs lo <= hi")
    if hi == lo:
        return 0.0
    if not isinstance(panels, Panelization):
        panels = Panelization.of(panels, lo, hi)
    edges = [lo, *[p for p in panels.breakpoints if lo < p < hi], hi]
    width = hi - lo
    stack = []
    for a, b in zip(edges[:-1], edges[1:]):
        stack.append((a, b, _gl(f, a, b)))
    total = 0.0
    splits = 0
    worst = None
    while stack:
        a, b, whole = stack.pop()
        m = 0.5 * (a + b)
        left, right = _gl(f, a, m), _gl(f, m, b)
        err = abs(left + right - whole)
        if err <= max(tol * (b - a) / width, 1e-15 * abs(left + right)) or (b - a) < 1e-13 * width:
            total += left + right
            continue
        splits += 1
        if worst is None or err > worst[2]:
            worst = (a, b, err)
        if splits > max_subdivisions:
            raise QuadratureError(
                f"no convergence after {max_subdivisions} subdivisions; worst panel "
                f"[{worst[0]:.6g}, {worst[1]:.6g}] error estimate {worst[2]:.3g}"
            )
        stack.append((a, m, left))
        stack.append((m, b, right))
    return total


@dataclass(frozen=True)
class Measure:
    """Positive measure on [0, 1]: point atoms plus an optional density in ``t``."""

    atoms: tuple = ()  # ((location, weight), ...)
    density: Optional[Expression] = None

    @property
    def locations(self):
        return tuple(a for a, _ in self.atoms)

    def density_breakpoints(self):
        if self.density is None:
            return []
        return self.density.breakpoints("t")

    def negative_parts(self, samples: int = 201):
        """Human-readable list of sign violations (empty when the measure is positive)."""
        issues = [f"atom at {a} has weight {w}" for a, w in self.atoms if w < 0]
        issues += [f"atom location {a} outside [0,1]" for a, _ in self.atoms if not 0 <= a <= 1]
        if self.density is not None:
            ts = np.union1d(np.linspace(0, 1, samples), [float(b) for b in self.density_breakpoints()])
            vals = self.density.array(t=ts)
            if np.any(vals < 0):
                issues.append(f"density negative at t={ts[np.argmax(vals < 0)]:.6g}")
        return issues

    def total(self, tol: float = DEFAULT_TOL):
        return stieltjes_expr(None, self, tol)


def stieltjes(w: Callable, m: Measure, tol: float = DEFAULT_TOL):
    """sum(weight * w(location)) + integral of w * density over [0, 1].

    ``w`` is called with scalar atom locations and with float arrays for the
    density part. The result stays exact when every atom term is exact and
    there is no density.
    """
    total = sum((wt * w(a) for a, wt in m.atoms), Fraction(0))
    if m.density is not None:
        dens = m.density
        total = total + integrate(lambda s: np.asarray(w(s), dtype=float) * dens.array(t=s), 0, 1,
                                  m.density_breakpoints(), tol)
    return total


def stieltjes_expr(e: Optional[Expression], m: Measure, tol: float = DEFAULT_TOL, var: str = "t"):
    """stieltjes for an Expression in one variable (``None`` means the constant 1).

    Atoms are evaluated exactly; a polynomial density against a polynomial
    profile integrates in closed form.
    """
    def point(x):
        return Fraction(1) if e is None else e.exact(**{var: x})

    total = sum((wt * point(a) for a, wt in m.atoms), Fraction(0))
    if m.density is None:
        return total
    pe = Poly.const(1) if e is None else to_poly(e, (var,))
    pd = to_poly(m.density, ("t",))
    if pe is not None and pd is not None:
        prod = pe.subs(var, Poly.var("t")) * pd
        return total + prod.integrate("t", 0, 1).constant_value()
    if e is None:
        prof = lambda s: np.ones_like(s)
    else:
        prof = lambda s: e.array(**{var: s})
    brk = list(m.density_breakpoints()) + ([] if e is None else e.breakpoints(var))
    return total + integrate(lambda s: prof(s) * m.density.array(t=s), 0, 1, brk, tol)


def _golden(f, a, b, sign, tol=1e-13, max_iter=200):
    """Golden-section search for the maximum of sign*f on [a, b]."""
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = sign * float(f(c)), sign * float(f(d))
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = sign * float(f(c))
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = sign * float(f(d))
    return (c, fc) if fc >= fd else (d, fd)


def extremum_on_interval(f: Callable, lo, hi, mode: str = "max", breakpoints=(), scan: int = 1025):
    """Global extremum of a continuous scalar function by uniform scan plus golden-section.

    Exact for functions that are unimodal between scan points; endpoints and
    breakpoints are always evaluated directly, so an extremum sitting on one of
    them keeps whatever (possibly exact) value ``f`` returns there.
    """
    if mode not in ("max", "min"):
        raise ValueError("mode must be 'max' or 'min'")
    sign = 1.0 if mode == "max" else -1.0
    flo, fhi = float(lo), float(hi)
    if flo == fhi:
        return lo, f(lo)
    xs = np.linspace(flo, fhi, scan)
    vals = np.array([float(f(x)) for x in xs])
    if np.any(np.isnan(vals)):
        raise EvalError("NaN during extremum scan")
    k = int(np.argmax(sign * vals))
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, scan - 1)]
    x_ref, v_ref = _golden(f, a, b, sign)
    best = (x_ref, sign * v_ref)
    special = [lo, hi] + [p for p in breakpoints if flo <= float(p) <= fhi]
    for p in special:
        v = f(p)
        if sign * float(v) >= sign * float(best[1]):
            best = (p, v)
    return best
