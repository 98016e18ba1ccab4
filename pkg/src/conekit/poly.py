"""Exact multivariate polynomials with Fraction coefficients.

Used for the closed-form path: kernels, weights and boundary profiles that are
polynomials with rational coefficients integrate to exact rationals.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import expr as ex

# A monomial is a sorted tuple of (variable, exponent) pairs, exponents > 0.


def _mono_mul(m1, m2):
    d = dict(m1)
    for v, e in m2:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items()))


class Poly:
    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {m: Fraction(c) for m, c in (terms or {}).items() if c != 0}

    @classmethod
    def const(cls, c):
        return cls({(): Fraction(c)})

    @classmethod
    def var(cls, name):
        return cls({((name, 1),): Fraction(1)})

    def __repr__(self):
        return f"Poly({self.terms!r})"

    def __eq__(self, other):
        if not isinstance(other, Poly):
            other = Poly.const(other)
        return self.terms == other.terms

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.const(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, Poly) else Poly.const(-Fraction(other)))

    def __rsub__(self, other):
        return Poly.const(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            other = Poly.const(other)
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        result, base = Poly.const(1), self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    @property
    def variables(self):
        return {v for m in self.terms for v, _ in m}

    def is_constant(self):
        return not self.variables

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("polynomial is not constant")
        return self.terms.get((), Fraction(0))

    def degree(self, var):
        return max((dict(m).get(var, 0) for m in self.terms), default=0)

    def subs(self, var, value):
        """Substitute ``var`` by a Poly or a number."""
        if not isinstance(value, Poly):
            value = Poly.const(value)
        out = Poly()
        powers = {}
        for m, c in self.terms.items():
            d = dict(m)
            e = d.pop(var, 0)
            if e not in powers:
                powers[e] = value ** e
            out = out + Poly({tuple(sorted(d.items())): c}) * powers[e]
        return out

    def diff(self, var):
        out = {}
        for m, c in self.terms.items():
            d = dict(m)
            e = d.get(var, 0)
            if e == 0:
                continue
            if e == 1:
                del d[var]
            else:
                d[var] = e - 1
            key = tuple(sorted(d.items()))
            out[key] = out.get(key, 0) + c * e
        return Poly(out)

    def antiderivative(self, var):
        out = {}
        for m, c in self.terms.items():
            d = dict(m)
            e = d.get(var, 0) + 1
            d[var] = e
            key = tuple(sorted(d.items()))
            out[key] = out.get(key, 0) + c / e
        return Poly(out)

    def integrate(self, var, lo, hi):
        """Definite integral in ``var``; limits may be numbers or Polys in other variables."""
        prim = self.antiderivative(var)
        return prim.subs(var, hi) - prim.subs(var, lo)

    def __call__(self, **env):
        p = self
        for v, x in env.items():
            p = p.subs(v, x)
        return p.constant_value()

    def coefficients(self, var):
        """Ascending coefficient list of a univariate polynomial in ``var``."""
        if self.variables - {var}:
            raise ValueError("polynomial is not univariate")
        deg = self.degree(var)
        coeffs = [Fraction(0)] * (deg + 1)
        for m, c in self.terms.items():
            coeffs[dict(m).get(var, 0)] = c
        return coeffs


class NotPolynomial(Exception):
    pass


def _node_poly(node, symbols, env):
    if isinstance(node, ex.Num):
        return Poly.const(node.value)
    if isinstance(node, ex.Var):
        if node.name in symbols:
            return Poly.var(node.name)
        value = env[node.name]
        if not isinstance(value, (Fraction, int)):
            raise NotPolynomial
        return Poly.const(value)
    if isinstance(node, ex.Const):
        raise NotPolynomial
    if isinstance(node, ex.Neg):
        return -_node_poly(node.operand, symbols, env)
    if isinstance(node, ex.BinOp):
        a = _node_poly(node.left, symbols, env)
        b = _node_poly(node.right, symbols, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if not b.is_constant() or b.constant_value() == 0:
                raise NotPolynomial
            return a * Poly.const(1 / b.constant_value())
        if not b.is_constant():
            raise NotPolynomial
        e = b.constant_value()
        if e.denominator != 1 or e < 0:
            if a.is_constant():
                return _const_call(node, symbols, env)
            raise NotPolynomial
        return a ** int(e)
    if isinstance(node, ex.Call):
        return _const_call(node, symbols, env)
    if isinstance(node, ex.Piecewise):
        if node.var in symbols:
            raise NotPolynomial
        x = env[node.var]
        for b in node.branches:
            if b.contains(x):
                return _node_poly(b.body, symbols, env)
        raise NotPolynomial
    raise NotPolynomial


def _const_call(node, symbols, env):
    if ex._free_vars(node) & set(symbols):
        raise NotPolynomial
    value = ex._eval(node, env)
    if not isinstance(value, Fraction):
        raise NotPolynomial
    return Poly.const(value)


def to_poly(e: ex.Expression, symbols, **bindings):
    """Convert an Expression to a Poly in ``symbols`` with the other variables bound.

    Returns None when the expression is not a polynomial with rational
    coefficients (irrational constants, sqrt of a symbol, piecewise on a
    symbol, ...).
    """
    symbols = tuple(symbols)
    try:
        return _node_poly(e.ast, symbols, bindings)
    except NotPolynomial:
        return None
    except KeyError:
        return None


def _polish(coeffs, x, lo, hi):
    c = [float(a) for a in coeffs]
    d = np.polynomial.polynomial.polyder(c)
    dd = np.polynomial.polynomial.polyder(d)
    for _ in range(50):
        fd = np.polynomial.polynomial.polyval(x, d)
        fdd = np.polynomial.polynomial.polyval(x, dd)
        if fdd == 0:
            break
        step = fd / fdd
        x_new = min(max(x - step, lo), hi)
        if abs(x_new - x) <= 1e-16 * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    return x


def poly_extremum(p: Poly, var, lo, hi, mode="max"):
    """Exact-where-possible max/min of a univariate polynomial on [lo, hi].

    Critical points that are rational are recovered exactly; irrational ones
    are located in floating point and Newton-polished.
    """
    coeffs = p.coefficients(var) if not p.is_constant() else [p.constant_value()]
    candidates = [(lo, p(**{var: lo}) if not p.is_constant() else p.constant_value()),
                  (hi, p(**{var: hi}) if not p.is_constant() else p.constant_value())]
    if len(coeffs) > 2:
        dp = p.diff(var)
        dcoef = dp.coefficients(var)
        while len(dcoef) > 1 and dcoef[-1] == 0:
            dcoef.pop()
        if len(dcoef) > 1:
            roots = np.polynomial.polynomial.polyroots([float(c) for c in dcoef])
            for r in roots:
                if abs(r.imag) > 1e-7:
                    continue
                x = float(r.real)
                if not (float(lo) - 1e-12 <= x <= float(hi) + 1e-12):
                    continue
                q = Fraction(x).limit_denominator(10**6)
                if lo <= q <= hi and dp(**{var: q}) == 0:
                    candidates.append((q, p(**{var: q})))
                    continue
                x = _polish(coeffs, x, float(lo), float(hi))
                val = float(np.polynomial.polynomial.polyval(x, [float(c) for c in coeffs]))
                candidates.append((x, val))
    pick = max if mode == "max" else min
    return pick(candidates, key=lambda c: c[1])
