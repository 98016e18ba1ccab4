"""Discretized operator T and damped Picard search for fixed points in the cone."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConekitError, DivergenceError
from .kernels import kernel_array
from .parallel import pmap
from .problem import INDICES, ProblemDef, SchemaError

PANEL_ORDER = 8
DEDUP_TOL = 1e-4


def chebyshev_nodes(n: int) -> np.ndarray:
    """n Chebyshev extrema mapped to [0, 1], endpoints included."""
    if n < 2:
        raise ValueError("need at least two nodes")
    return (1 - np.cos(np.pi * np.arange(n) / (n - 1))) / 2


def _merge(points, eps=1e-13):
    pts = np.unique(np.asarray(points, dtype=float))
    keep = np.concatenate(([True], np.diff(pts) > eps))
    return pts[keep]


def default_nodes(p: ProblemDef, n: int = None) -> np.ndarray:
    """Chebyshev extrema plus every atom location and every [a_i, b_i] endpoint."""
    n = n or p.options.nodes
    extra = [float(x) for x in p.atom_locations()]
    for i in (1, 2):
        extra += [float(p.eq(i).a), float(p.eq(i).b)]
    return _merge(np.concatenate([chebyshev_nodes(n), extra]))


@dataclass(frozen=True, eq=False)
class GridFunction:
    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.nodes.shape != self.values.shape:
            raise ValueError("nodes and values differ in shape")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function has non-finite values")

    def __call__(self, x):
        return self.spline(x)

    @property
    def spline(self):
        sp = self.__dict__.get("_spline")
        if sp is None:
            sp = CubicSpline(self.nodes, self.values)
            object.__setattr__(self, "_spline", sp)
        return sp

    @property
    def sup_norm(self) -> float:
        """max |w| over the nodes and a dense sample of the interpolant."""
        dense = self(np.linspace(0, 1, 2001))
        return float(max(np.max(np.abs(self.values)), np.max(np.abs(dense))))

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0))

    @classmethod
    def constant(cls, nodes, value):
        return cls(nodes, np.full(nodes.shape, float(value)))

    @classmethod
    def sample(cls, nodes, fn):
        return cls(nodes, np.asarray(fn(nodes), dtype=float) * np.ones_like(nodes))


@dataclass
class _MeasureRule:
    atom_idx: np.ndarray
    atom_w: np.ndarray
    dens_w: Optional[np.ndarray]  # weights on the quadrature points

    def __call__(self, at_nodes, at_quad):
        val = float(self.atom_w @ at_nodes[self.atom_idx]) if len(self.atom_idx) else 0.0
        if self.dens_w is not None:
            val += float(self.dens_w @ at_quad)
        return val


class Operator:
    """T on a fixed node set: kernel weights on 8-point Gauss panels between nodes."""

    def __init__(self, p: ProblemDef, nodes=None, eval_nodes=None):
        if not p.has_solver_terms():
            raise SchemaError("solver needs concrete H and L expressions for every boundary term")
        self.p = p
        self.nodes = default_nodes(p) if nodes is None else np.asarray(nodes, dtype=float)
        self.eval_nodes = self.nodes if eval_nodes is None else np.asarray(eval_nodes, dtype=float)
        breaks = [0.0, 1.0]
        for i in (1, 2):
            breaks += [float(x) for x in p.eq(i).g.breakpoints("s")]
        for term in p.boundary.values():
            breaks += [float(x) for x in term.beta.density_breakpoints() + term.delta.density_breakpoints()]
        edges = _merge(np.concatenate([self.nodes, self.eval_nodes, breaks]))
        x, w = np.polynomial.legendre.leggauss(PANEL_ORDER)
        lo, hi = edges[:-1, None], edges[1:, None]
        self.s = ((hi - lo) / 2 * x + (hi + lo) / 2).ravel()
        self.w = ((hi - lo) / 2 * w).ravel()
        T, S = np.meshgrid(self.eval_nodes, self.s, indexing="ij")
        self.weights = {}
        self.gamma = {}
        for i in (1, 2):
            eq = p.eq(i)
            g = np.broadcast_to(eq.g.array(s=self.s), self.s.shape)
            self.weights[i] = kernel_array(eq.kernel, T, S) * (g * self.w)[None, :]
        for i, j in INDICES:
            gam = p.bt(i, j).gamma.expr
            self.gamma[(i, j)] = np.broadcast_to(gam.array(t=self.eval_nodes), self.eval_nodes.shape).copy()
        self.beta = {ij: self._rule(p.bt(*ij).beta) for ij in INDICES}
        self.delta = {ij: self._rule(p.bt(*ij).delta) for ij in INDICES}

    def _rule(self, m) -> _MeasureRule:
        idx, wts = [], []
        for loc, wt in m.atoms:
            k = int(np.argmin(np.abs(self.nodes - float(loc))))
            if abs(self.nodes[k] - float(loc)) > 1e-12:
                raise ConekitError(f"atom at {loc} is not a node")
            idx.append(k)
            wts.append(float(wt))
        dens = None
        if m.density is not None:
            dens = np.broadcast_to(m.density.array(t=self.s), self.s.shape) * self.w
        return _MeasureRule(np.array(idx, dtype=int), np.array(wts), dens)

    @staticmethod
    def _scalar(e, w):
        return float(e(w=max(w, 0.0)))

    def apply(self, u: np.ndarray, v: np.ndarray):
        """Node values of T(u, v) at eval_nodes; u, v are node values on self.nodes."""
        su, sv = CubicSpline(self.nodes, u), CubicSpline(self.nodes, v)
        uq = np.maximum(su(self.s), 0.0)
        vq = np.maximum(sv(self.s), 0.0)
        p = self.p
        out = []
        for i in (1, 2):
            f = np.broadcast_to(p.eq(i).f.array(t=self.s, u=uq, v=vq), self.s.shape)
            comp = self.weights[i] @ f
            for j in (1, 2):
                bt = p.bt(i, j)
                own, other = ((u, uq), (v, vq)) if i == 1 else ((v, vq), (u, uq))
                hv = self._scalar(bt.H, self.beta[(i, j)](*own))
                lv = self._scalar(bt.L, self.delta[(i, j)](*other))
                comp = comp + self.gamma[(i, j)] * (hv + lv)
            out.append(comp)
        return out[0], out[1]


_CACHE: dict = {}


def operator_for(p: ProblemDef, nodes=None) -> Operator:
    nodes = default_nodes(p) if nodes is None else np.asarray(nodes, dtype=float)
    key = (id(p), nodes.tobytes())
    op = _CACHE.get(key)
    if op is None or op.p is not p:
        if len(_CACHE) > 32:
            _CACHE.clear()
        op = _CACHE[key] = Operator(p, nodes)
    return op


def apply_T(p: ProblemDef, u: GridFunction, v: GridFunction):
    op = operator_for(p, u.nodes)
    tu, tv = op.apply(u.values, v.values)
    return GridFunction(op.nodes, tu), GridFunction(op.nodes, tv)


# ---------------------------------------------------------------- cone and residuals

def cone_gap(p: ProblemDef, w: GridFunction, i, dense: int = 2001) -> float:
    """min over [a_i, b_i] minus tilde_c_i times the sup norm (>= 0 inside the cone)."""
    xs = np.union1d(np.linspace(0, 1, dense), w.nodes)
    vals = w(xs)
    eq = p.eq(i)
    inside = (xs >= float(eq.a)) & (xs <= float(eq.b))
    sup = max(float(np.max(np.abs(vals))), float(np.max(np.abs(w.values))))
    return float(np.min(vals[inside])) - float(p.tilde_c(i)) * sup


def in_cone(p: ProblemDef, w: GridFunction, i, slack: float = 1e-9) -> bool:
    return bool(np.min(w.values) >= -slack) and cone_gap(p, w, i) >= -slack


def residual(p: ProblemDef, u: GridFunction, v: GridFunction, nodes=None) -> float:
    """sup-norm of (u, v) - T(u, v); nodes other than u.nodes re-evaluate there."""
    if nodes is None:
        tu, tv = apply_T(p, u, v)
        return float(max(np.max(np.abs(u.values - tu.values)), np.max(np.abs(v.values - tv.values))))
    nodes = np.asarray(nodes, dtype=float)
    op = Operator(p, u.nodes, eval_nodes=nodes)
    tu, tv = op.apply(u.values, v.values)
    return float(max(np.max(np.abs(u(nodes) - tu)), np.max(np.abs(v(nodes) - tv))))


@dataclass(frozen=True)
class SolveResult:
    u: GridFunction
    v: GridFunction
    residual: float
    iterations: int
    in_cone: tuple  # (component 1, component 2)
    norm: float
    converged: bool
    seed: float = 0.0
    bracket: Optional[tuple] = None


def picard(p: ProblemDef, start, damping: float = None, max_iter: int = None, tol: float = None,
           ceiling: float = None) -> SolveResult:
    """x <- (1 - damping) x + damping T(x), clamped to >= 0 node-wise; returns the best iterate."""
    o = p.options
    damping = o.damping if damping is None else damping
    max_iter = o.max_iter if max_iter is None else max_iter
    tol = o.picard_tol if tol is None else tol
    ceiling = o.ceiling if ceiling is None else ceiling
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    u0, v0 = start
    op = operator_for(p, u0.nodes)
    u, v = np.maximum(u0.values, 0.0), np.maximum(v0.values, 0.0)
    best = (np.inf, u, v)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        tu, tv = op.apply(u, v)
        res = float(max(np.max(np.abs(u - tu)), np.max(np.abs(v - tv))))
        if not np.isfinite(res):
            raise DivergenceError("iterate became non-finite", it, float("inf"))
        if res < best[0]:
            best = (res, u, v)
        un = np.maximum((1 - damping) * u + damping * tu, 0.0)
        vn = np.maximum((1 - damping) * v + damping * tv, 0.0)
        norm = float(max(np.max(un), np.max(vn)))
        if not np.isfinite(norm) or norm > ceiling:
            raise DivergenceError(f"norm {norm:.3g} exceeded ceiling {ceiling:.3g}", it, norm)
        step = float(max(np.max(np.abs(un - u)), np.max(np.abs(vn - v))))
        u, v = un, vn
        if step < tol:
            converged = True
            break
    # the final iterate has not been scored yet
    tu, tv = op.apply(u, v)
    res = float(max(np.max(np.abs(u - tu)), np.max(np.abs(v - tv))))
    if res <= best[0]:
        best = (res, u, v)
    res, u, v = best
    gu, gv = GridFunction(op.nodes, u), GridFunction(op.nodes, v)
    return SolveResult(gu, gv, res, it, (in_cone(p, gu, 1), in_cone(p, gv, 2)),
                       max(gu.sup_norm, gv.sup_norm), converged)


def seeds_for(bracket, n: int):
    lo, hi = float(bracket[0]), float(bracket[1])
    if n == 1:
        return [float(np.sqrt(lo * hi)) if lo > 0 else hi / 2]
    if lo > 0:
        return list(np.geomspace(lo, hi, n))
    return list(np.linspace(lo, hi, n))


def multistart(p: ProblemDef, rho_brackets, seeds_per_bracket: int = 3, nodes=None, damping=None,
               max_iter=None, tol=None, accept: float = 1e-8):
    """Constant seeds spanning each bracket; distinct converged fixed points in bracket order."""
    brackets = [tuple(b) for b in rho_brackets]
    for lo, hi in brackets:
        if not 0 <= lo < hi:
            raise ValueError(f"bad bracket ({lo}, {hi})")
    ordered = sorted(set(brackets))  # exact duplicates are harmless
    for (_, h0), (l1, _) in zip(ordered, ordered[1:]):
        if l1 < h0:
            raise ValueError("brackets overlap")
    nodes = default_nodes(p) if nodes is None else np.asarray(nodes, dtype=float)
    operator_for(p, nodes)  # build once before the workers share it
    jobs = [(b, s) for b in dict.fromkeys(brackets) for s in seeds_for(b, seeds_per_bracket)]

    def run(job):
        bracket, seed = job
        start = (GridFunction.constant(nodes, seed), GridFunction.constant(nodes, seed))
        try:
            r = picard(p, start, damping, max_iter, tol)
        except DivergenceError:
            return None
        return SolveResult(r.u, r.v, r.residual, r.iterations, r.in_cone, r.norm, r.converged, seed, bracket)

    found = []
    for r in pmap(run, jobs):
        if r is None or r.residual >= accept:
            continue
        dup = any(max(np.max(np.abs(r.u.values - q.u.values)), np.max(np.abs(r.v.values - q.v.values)))
                  < DEDUP_TOL for q in found)
        if not dup:
            found.append(r)
    return found

