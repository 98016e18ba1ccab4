"""Every scalar of the fixed-point-index theory, plus 2x2 order-preserving matrix algebra."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConstantsError, MatrixError
from .kernels import kernel_array
from .poly import Poly, poly_extremum, to_poly
from .problem import INDICES, ProblemDef
from .quadrature import extremum_on_interval, integrate, stieltjes_expr


@dataclass(frozen=True)
class Matrix2:
    """The matrix [[a, -b], [-c, d]]."""

    a: object
    b: object
    c: object
    d: object

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    def rows(self):
        return ((self.a, -self.b), (-self.c, self.d))

    def apply(self, p, q):
        return (self.a * p - self.b * q, -self.c * p + self.d * q)

    def inverse(self) -> "Matrix2":
        det = self.det
        if det == 0:
            raise MatrixError("singular matrix")
        # inverse of [[a,-b],[-c,d]] is (1/det) [[d, b], [c, a]]
        return Matrix2(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def matmul(self, other: "Matrix2"):
        (a, b), (c, d) = self.rows()
        (e, f), (g, h) = other.rows()
        return ((a * e + b * g, a * f + b * h), (c * e + d * g, c * f + d * h))

    def satisfies_lemma(self):
        return min(self.a, self.b, self.c, self.d) >= 0 and self.det > 0


def inverse_order_preserving(M: Matrix2) -> Matrix2:
    """Inverse of a matrix with the sign pattern [[a,-b],[-c,d]], a,b,c,d >= 0, det > 0.

    Under those hypotheses every entry of the inverse is non-negative, so it
    maps componentwise-ordered pairs to componentwise-ordered pairs.
    """
    if min(M.a, M.b, M.c, M.d) < 0:
        raise MatrixError(f"entries must be non-negative, got {M}")
    if M.det <= 0:
        raise MatrixError(f"determinant must be positive, got {M.det}")
    return M.inverse()


def mu_monotonicity_check(N: Matrix2, mu, p, q) -> bool:
    """True iff N_mu^{-1}(p, q) <= N^{-1}(p, q) componentwise, N_mu = N + (mu - 1) I."""
    if mu <= 1:
        raise MatrixError("mu must exceed 1")
    if p < 0 or q < 0:
        raise MatrixError("p and q must be non-negative")
    N_mu = Matrix2(N.a + mu - 1, N.b, N.c, N.d + mu - 1)
    x0 = inverse_order_preserving(N).apply(p, q)
    x1 = inverse_order_preserving(N_mu).apply(p, q)
    return x1[0] <= x0[0] and x1[1] <= x0[1]


# ---------------------------------------------------------------- kernel integrals

def _pieces(p: ProblemDef, i):
    eq = p.eq(i)
    lower = to_poly(eq.kernel.lower, ("t", "s"))
    upper = to_poly(eq.kernel.upper, ("t", "s"))
    g = to_poly(eq.g, ("s",))
    return lower, upper, g


def kernel_functional(p: ProblemDef, i, j, lo, hi, tol=None):
    """Integral over [lo, hi] of K_ij(s) g_i(s), K_ij(s) = integral of k_i(t, s) dB_ij(t)."""
    tol = tol or p.options.tol
    eq = p.eq(i)
    measure = p.bt(i, j).beta
    lower, upper, g = _pieces(p, i)
    exact = lower is not None and upper is not None and g is not None
    total = Fraction(0)
    for eta, w in measure.atoms:
        if exact and isinstance(eta, Fraction):
            mid = min(max(eta, lo), hi)
            val = (lower.subs("t", eta) * g).integrate("s", lo, mid) + \
                  (upper.subs("t", eta) * g).integrate("s", mid, hi)
            total += w * val.constant_value()
        else:
            brk = [eta, *eq.g.breakpoints("s")]
            total += w * integrate(lambda s: kernel_array(eq.kernel, float(eta), s) * eq.g.array(s=s),
                                   lo, hi, brk, tol)
    dens = measure.density
    if dens is None:
        return total
    pd = to_poly(dens, ("t",))
    if exact and pd is not None:
        t, s = Poly.var("t"), Poly.var("s")
        inner = (lower * pd).integrate("t", s, 1) + (upper * pd).integrate("t", 0, s)
        return total + (inner * g).integrate("s", lo, hi).constant_value()

    brk_t = measure.density_breakpoints()

    def inner(svals):
        svals = np.atleast_1d(svals)
        out = np.empty(svals.shape)
        for n, sv in enumerate(svals):
            out[n] = integrate(lambda t: kernel_array(eq.kernel, t, sv) * dens.array(t=t), 0, 1,
                               [sv, *brk_t], tol)
        return out

    return total + integrate(lambda s: inner(s) * eq.g.array(s=s), lo, hi,
                             list(measure.locations) + eq.g.breakpoints("s"), tol)


def kernel_mass_extremum(p: ProblemDef, i, t_range, s_range, mode, tol=None):
    """(arg, value) of the extremum over t in t_range of the integral over s_range of k_i(t,s) g_i(s).

    Requires t_range inside s_range; both uses in the theory satisfy this.
    """
    tol = tol or p.options.tol
    eq = p.eq(i)
    (tlo, thi), (slo, shi) = t_range, s_range
    lower, upper, g = _pieces(p, i)
    if lower is not None and upper is not None and g is not None:
        t = Poly.var("t")
        mass = (lower * g).integrate("s", slo, t) + (upper * g).integrate("s", t, shi)
        return poly_extremum(mass, "t", tlo, thi, mode)
    brk = eq.g.breakpoints("s") + eq.kernel.breakpoints_s

    def mass_at(tv):
        return integrate(lambda s: kernel_array(eq.kernel, float(tv), s) * eq.g.array(s=s),
                         slo, shi, [tv, *brk], tol)

    return extremum_on_interval(mass_at, tlo, thi, mode)


# ---------------------------------------------------------------- the constant table

@dataclass(frozen=True)
class EquationConstants:
    c_kernel: object
    tilde_c: object
    inv_m: object
    m: object
    inv_M: object
    M: object
    D: object
    D_under: object
    theta: tuple
    Q: object
    S: object


@dataclass(frozen=True)
class TermConstants:
    gamma_norm: object
    c_gamma: object
    beta_gamma: tuple  # (beta_ij[gamma_i1], beta_ij[gamma_i2])
    delta_one: object
    kf_full: object
    kf_ab: object


@dataclass(frozen=True)
class TheoryConstants:
    equations: dict
    terms: dict
    c: object

    def eq(self, i) -> EquationConstants:
        return self.equations[i]

    def term(self, i, j) -> TermConstants:
        return self.terms[(i, j)]

    def bg(self, i, j, l):
        """beta_ij[gamma_il]."""
        return self.terms[(i, j)].beta_gamma[l - 1]

    def table(self) -> dict:
        """Flat name -> value mapping, ordered as a constants display would be."""
        out = {}
        for i in (1, 2):
            out[f"c_{i}"] = self.eq(i).c_kernel
        for i, j in INDICES:
            out[f"c_{i}{j}"] = self.term(i, j).c_gamma
        for i in (1, 2):
            out[f"tilde_c_{i}"] = self.eq(i).tilde_c
        out["c"] = self.c
        for i in (1, 2):
            e = self.eq(i)
            out[f"m_{i}"] = e.m
            out[f"M_{i}"] = e.M
        for i, j in INDICES:
            t = self.term(i, j)
            out[f"gamma_norm_{i}{j}"] = t.gamma_norm
            for l in (1, 2):
                out[f"beta_{i}{j}[gamma_{i}{l}]"] = t.beta_gamma[l - 1]
            out[f"delta_{i}{j}[1]"] = t.delta_one
        for i, j in INDICES:
            out[f"int_K_{i}{j}"] = self.term(i, j).kf_full
        for i, j in INDICES:
            out[f"int_ab_K_{i}{j}"] = self.term(i, j).kf_ab
        for i in (1, 2):
            e = self.eq(i)
            out[f"D_{i}"] = e.D
            out[f"D_under_{i}"] = e.D_under
            for n, th in enumerate(e.theta, start=1):
                out[f"theta_{i}{n}"] = th
            out[f"Q_{i}"] = e.Q
            out[f"S_{i}"] = e.S
        return out

    def d_matrix(self, i, h) -> Matrix2:
        """[[1 - h_i1 beta_i1[g_i1], -h_i2 beta_i1[g_i2]], [-h_i1 beta_i2[g_i1], 1 - h_i2 beta_i2[g_i2]]]."""
        h1, h2 = h
        return Matrix2(1 - h1 * self.bg(i, 1, 1), h2 * self.bg(i, 1, 2),
                       h1 * self.bg(i, 2, 1), 1 - h2 * self.bg(i, 2, 2))

    def theta_matrix(self, i):
        t = self.eq(i).theta
        return ((t[0], t[1]), (t[2], t[3]))


def compute_all(p: ProblemDef) -> TheoryConstants:
    tol = p.options.tol
    terms = {}
    for i, j in INDICES:
        eq, bt = p.eq(i), p.bt(i, j)
        terms[(i, j)] = TermConstants(
            gamma_norm=bt.gamma.sup_norm,
            c_gamma=bt.gamma.c_gamma,
            beta_gamma=(p.beta_gamma[(i, j, 1)], p.beta_gamma[(i, j, 2)]),
            delta_one=stieltjes_expr(None, bt.delta, tol),
            kf_full=kernel_functional(p, i, j, 0, 1, tol),
            kf_ab=kernel_functional(p, i, j, eq.a, eq.b, tol),
        )
    equations = {}
    for i in (1, 2):
        eq = p.eq(i)
        t1, t2 = p.bt(i, 1), p.bt(i, 2)
        _, inv_m = kernel_mass_extremum(p, i, (0, 1), (0, 1), "max", tol)
        _, inv_M = kernel_mass_extremum(p, i, (eq.a, eq.b), (eq.a, eq.b), "min", tol)
        if inv_m <= 0:
            raise ConstantsError(f"m_{i}", "sup of the kernel mass is not positive")
        if inv_M <= 0:
            raise ConstantsError(f"M_{i}", "inf of the kernel mass over [a,b] is not positive")

        def bg(jj, ll):
            return terms[(i, jj)].beta_gamma[ll - 1]

        D = (1 - t1.h_hi * bg(1, 1)) * (1 - t2.h_hi * bg(2, 2)) - t1.h_hi * t2.h_hi * bg(1, 2) * bg(2, 1)
        Du = (1 - t1.h_lo * bg(1, 1)) * (1 - t2.h_lo * bg(2, 2)) - t1.h_lo * t2.h_lo * bg(1, 2) * bg(2, 1)
        if D <= 0:
            raise ConstantsError(f"D_{i}", f"D_{i} = {D} is not positive")
        if Du <= 0:
            raise ConstantsError(f"D_under_{i}", f"lower D_{i} = {Du} is not positive")
        theta = ((1 - t2.h_hi * bg(2, 2)) / D, t2.h_hi * bg(1, 2) / D,
                 t1.h_hi * bg(2, 1) / D, (1 - t1.h_hi * bg(1, 1)) / D)
        if min(theta) < 0:
            raise ConstantsError(f"theta_{i}", f"negative entry in {theta}")
        d1, d2 = terms[(i, 1)].delta_one, terms[(i, 2)].delta_one
        Q = bg(1, 1) * t1.l_hi * d1 + bg(1, 2) * t2.l_hi * d2
        S = bg(2, 1) * t1.l_hi * d1 + bg(2, 2) * t2.l_hi * d2
        equations[i] = EquationConstants(
            c_kernel=eq.c, tilde_c=p.tilde_c(i), inv_m=inv_m, m=1 / inv_m, inv_M=inv_M, M=1 / inv_M,
            D=D, D_under=Du, theta=theta, Q=Q, S=S,
        )
        if equations[i].M < equations[i].m:
            raise ConstantsError(f"M_{i}", "M is smaller than m")
    c = p.c
    if not 0 < c <= 1:
        raise ConstantsError("c", f"c = {c} outside (0,1]")
    return TheoryConstants(equations, terms, c)
