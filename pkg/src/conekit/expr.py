"""A small expression language for nonlinearities, weights, kernels and densities.

Grammar (see docs/grammar.md for the EBNF):

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'
             | 'piecewise' '(' branch (';' branch)* ')'
    branch  := NAME 'in' ('[' | '(') expr ',' (expr | 'inf') (']' | ')') ':' expr

Literals are kept as exact ``Fraction`` values, so ``1/8`` evaluates to
``Fraction(1, 8)`` until a float binding or an irrational function is involved.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .errors import EvalError, ExprSyntaxError

Real = Union[Fraction, float]

FUNCTIONS = {"sqrt": 1, "sin": 1, "cos": 1, "exp": 1, "log": 1, "abs": 1, "min": -2, "max": -2}
CONSTANTS = {"pi": math.pi}

# precedence levels used by the printer
_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class Num:
    value: Fraction
    text: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class Branch:
    lo: Real
    hi: Real  # math.inf allowed
    lo_closed: bool
    hi_closed: bool
    lo_node: object
    hi_node: object  # None when hi is inf
    body: object

    def contains(self, x) -> bool:
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above and below

    def mask(self, x: np.ndarray) -> np.ndarray:
        lo, hi = float(self.lo), float(self.hi)
        above = x >= lo if self.lo_closed else x > lo
        below = x <= hi if self.hi_closed else x < hi
        return above & below


@dataclass(frozen=True)
class Piecewise:
    var: str
    branches: tuple

    @property
    def breakpoints(self):
        return tuple(b.hi for b in self.branches[:-1])


# ---------------------------------------------------------------- tokenizer

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),;:\[\]]))"
)


def _tokenize(source: str):
    pos = 0
    tokens = []
    while True:
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            rest = source[pos:]
            if rest.strip() == "":
                break
            bad = pos + (len(rest) - len(rest.lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", source, bad)
        kind = m.lastgroup
        text = m.group(kind)
        start = m.start(kind)
        if kind == "op" and text == "**":
            text = "^"
        tokens.append((kind, text, start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source, variables):
        self.source = source
        self.variables = set(variables)
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ExprSyntaxError(msg, self.source, tok[2])

    def expect(self, text):
        tok = self.take()
        if tok[1] != text or tok[0] == "num":
            raise self.error(f"expected {text!r}, found {tok[1] or 'end of input'!r}", tok)
        return tok

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return Num(Fraction(text), text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if text == "piecewise":
                return self.piecewise(tok)
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(tok)
            if text in self.variables:
                return Var(text)
            if text in CONSTANTS:
                return Const(text)
            if text == "inf":
                raise self.error("'inf' is only allowed as the right end of a piecewise guard", tok)
            raise self.error(f"unknown identifier {text!r}", tok)
        if kind == "end":
            raise self.error("unexpected end of input", tok)
        raise self.error(f"unexpected {text!r}", tok)

    def call(self, name_tok):
        name = name_tok[1]
        if name not in FUNCTIONS:
            raise self.error(f"unknown function {name!r}", name_tok)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        arity = FUNCTIONS[name]
        if (arity > 0 and len(args) != arity) or (arity < 0 and len(args) < -arity):
            raise self.error(f"wrong number of arguments to {name}", name_tok)
        return Call(name, tuple(args))

    def _bound(self, allow_inf):
        tok = self.peek()
        if tok[0] == "name" and tok[1] == "inf":
            if not allow_inf:
                raise self.error("'inf' is only allowed as the right end of a piecewise guard", tok)
            self.take()
            return math.inf, None
        node = self.expr()
        if _free_vars(node):
            raise self.error("piecewise guard bounds must be constants", tok)
        return _eval(node, {}), node

    def piecewise(self, head):
        self.expect("(")
        branches = []
        var = None
        while True:
            vtok = self.take()
            if vtok[0] != "name" or vtok[1] not in self.variables:
                raise self.error("piecewise guard must name a declared variable", vtok)
            if var is None:
                var = vtok[1]
            elif vtok[1] != var:
                raise self.error("all piecewise guards must use the same variable", vtok)
            itok = self.take()
            if itok[1] != "in":
                raise self.error("expected 'in'", itok)
            open_tok = self.take()
            if open_tok[1] not in ("[", "("):
                raise self.error("expected '[' or '('", open_tok)
            lo, lo_node = self._bound(False)
            self.expect(",")
            hi, hi_node = self._bound(True)
            close_tok = self.take()
            if close_tok[1] not in ("]", ")"):
                raise self.error("expected ']' or ')'", close_tok)
            if hi == math.inf and close_tok[1] == "]":
                raise self.error("an infinite bound must be open", close_tok)
            self.expect(":")
            body = self.expr()
            br = Branch(lo, hi, open_tok[1] == "[", close_tok[1] == "]", lo_node, hi_node, body)
            if lo > hi or (lo == hi and not (br.lo_closed and br.hi_closed)):
                raise self.error("empty piecewise guard interval", open_tok)
            if branches:
                prev = branches[-1]
                if prev.hi != br.lo:
                    kind = "gap" if prev.hi < br.lo else "overlap"
                    raise self.error(f"malformed piecewise: {kind} between guards", open_tok)
                if prev.hi_closed == br.lo_closed:
                    kind = "overlap" if prev.hi_closed else "gap"
                    raise self.error(f"malformed piecewise: {kind} at {prev.hi}", open_tok)
            branches.append(br)
            if self.peek()[1] == ";":
                self.take()
                continue
            break
        self.expect(")")
        return Piecewise(var, tuple(branches))


def _free_vars(node) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return _free_vars(node.operand)
    if isinstance(node, BinOp):
        return _free_vars(node.left) | _free_vars(node.right)
    if isinstance(node, Call):
        out = set()
        for a in node.args:
            out |= _free_vars(a)
        return out
    if isinstance(node, Piecewise):
        out = {node.var}
        for b in node.branches:
            out |= _free_vars(b.body)
        return out
    return set()


# ---------------------------------------------------------------- printing

def _prec(node) -> int:
    if isinstance(node, BinOp):
        return {"+": _ADD, "-": _ADD, "*": _MUL, "/": _MUL, "^": _POW}[node.op]
    if isinstance(node, Neg):
        return _NEG
    return _ATOM


def to_source(node) -> str:
    """Pretty-print an AST with the minimal parentheses that preserve its shape."""
    if isinstance(node, Num):
        return node.text
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        return "-" + (f"({inner})" if _prec(node.operand) < _NEG else inner)
    if isinstance(node, BinOp):
        p = _prec(node)
        left, right = to_source(node.left), to_source(node.right)
        if node.op == "^":
            if _prec(node.left) <= _POW:
                left = f"({left})"
            if _prec(node.right) < _NEG:
                right = f"({right})"
            return f"{left}^{right}"
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
        if node.op in "*/":
            return f"{left}{node.op}{right}"
        return f"{left} {node.op} {right}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Piecewise):
        parts = []
        for b in node.branches:
            lo = to_source(b.lo_node)
            hi = "inf" if b.hi_node is None else to_source(b.hi_node)
            parts.append(
                f"{node.var} in {'[' if b.lo_closed else '('}{lo}, {hi}{']' if b.hi_closed else ')'}: "
                f"{to_source(b.body)}"
            )
        return f"piecewise({'; '.join(parts)})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------- evaluation

def _exact_sqrt(x: Fraction):
    if x < 0:
        return None
    n, d = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if n * n == x.numerator and d * d == x.denominator:
        return Fraction(n, d)
    return None


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0:
                raise EvalError("division by zero", to_source(node))
            return a / b
        # power
        if isinstance(b, Fraction) and b.denominator == 1:
            if a == 0 and b < 0:
                raise EvalError("zero to a negative power", to_source(node))
            return a ** int(b)
        if a < 0:
            if float(b).is_integer():
                return float(a) ** float(b)
            raise EvalError("negative base with non-integer exponent", to_source(node))
        if a == 0:
            if b < 0:
                raise EvalError("zero to a negative power", to_source(node))
            return Fraction(0) if isinstance(a, Fraction) else 0.0
        return float(a) ** float(b)
    if isinstance(node, Call):
        args = [_eval(x, env) for x in node.args]
        name = node.name
        if name == "min":
            return min(args)
        if name == "max":
            return max(args)
        x = args[0]
        if name == "abs":
            return abs(x)
        if name == "sqrt":
            if x < 0:
                raise EvalError("sqrt of a negative number", to_source(node))
            if isinstance(x, Fraction):
                exact = _exact_sqrt(x)
                if exact is not None:
                    return exact
            return math.sqrt(x)
        if name == "log":
            if x <= 0:
                raise EvalError("log of a non-positive number", to_source(node))
            return math.log(x)
        if isinstance(x, Fraction) and x == 0 and name in ("sin", "exp"):
            return Fraction(0) if name == "sin" else Fraction(1)
        if isinstance(x, Fraction) and x == 0 and name == "cos":
            return Fraction(1)
        return getattr(math, name)(x)
    if isinstance(node, Piecewise):
        x = env[node.var]
        for b in node.branches:
            if b.contains(x):
                return _eval(b.body, env)
        raise EvalError(f"{node.var}={x} outside every piecewise guard", to_source(node))
    raise TypeError(f"not an expression node: {node!r}")


def _feval(node, env):
    """IEEE double evaluation in AST order (left operand first)."""
    if isinstance(node, Num):
        return float(node.value)
    if isinstance(node, Var):
        return float(env[node.name])
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_feval(node.operand, env)
    if isinstance(node, BinOp):
        a = _feval(node.left, env)
        b = _feval(node.right, env)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0:
                raise EvalError("division by zero", to_source(node))
            return a / b
        if a == 0 and b < 0:
            raise EvalError("zero to a negative power", to_source(node))
        if a < 0 and not b.is_integer():
            raise EvalError("negative base with non-integer exponent", to_source(node))
        try:
            return a ** b
        except OverflowError:
            raise EvalError("overflow", to_source(node)) from None
    if isinstance(node, Call):
        args = [_feval(x, env) for x in node.args]
        name = node.name
        if name == "min":
            return min(args)
        if name == "max":
            return max(args)
        x = args[0]
        if name == "abs":
            return abs(x)
        if name == "sqrt" and x < 0:
            raise EvalError("sqrt of a negative number", to_source(node))
        if name == "log" and x <= 0:
            raise EvalError("log of a non-positive number", to_source(node))
        try:
            return getattr(math, name)(x)
        except OverflowError:
            raise EvalError("overflow", to_source(node)) from None
    if isinstance(node, Piecewise):
        x = env[node.var]
        for b in node.branches:
            if b.contains(x):
                return _feval(b.body, env)
        raise EvalError(f"{node.var}={x} outside every piecewise guard", to_source(node))
    raise TypeError(f"not an expression node: {node!r}")


def _veval(node, env, n):
    """Vectorised float evaluation; env maps names to 1-D float arrays of length n."""
    if isinstance(node, Num):
        return np.full(n, float(node.value))
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Const):
        return np.full(n, CONSTANTS[node.name])
    if isinstance(node, Neg):
        return -_veval(node.operand, env, n)
    if isinstance(node, BinOp):
        a = _veval(node.left, env, n)
        b = _veval(node.right, env, n)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if np.any(b == 0):
                raise EvalError("division by zero", to_source(node))
            return a / b
        integral = np.all(b == np.round(b))
        if not integral and np.any(a < 0):
            raise EvalError("negative base with non-integer exponent", to_source(node))
        if np.any((a == 0) & (b < 0)):
            raise EvalError("zero to a negative power", to_source(node))
        return np.power(a, b)
    if isinstance(node, Call):
        args = [_veval(x, env, n) for x in node.args]
        name = node.name
        if name == "min":
            return np.minimum.reduce(args)
        if name == "max":
            return np.maximum.reduce(args)
        x = args[0]
        if name == "abs":
            return np.abs(x)
        if name == "sqrt":
            if np.any(x < 0):
                raise EvalError("sqrt of a negative number", to_source(node))
            return np.sqrt(x)
        if name == "log":
            if np.any(x <= 0):
                raise EvalError("log of a non-positive number", to_source(node))
            return np.log(x)
        return getattr(np, name)(x)
    if isinstance(node, Piecewise):
        x = env[node.var]
        out = np.empty(n)
        covered = np.zeros(n, dtype=bool)
        for b in node.branches:
            mask = b.mask(x) & ~covered
            if mask.any():
                sub = {k: v[mask] for k, v in env.items()}
                out[mask] = _veval(b.body, sub, int(mask.sum()))
                covered |= mask
        if not covered.all():
            bad = x[~covered][0]
            raise EvalError(f"{node.var}={bad} outside every piecewise guard", to_source(node))
        return out
    raise TypeError(f"not an expression node: {node!r}")


@dataclass(frozen=True)
class Expression:
    source: str
    variables: tuple
    ast: object

    def __str__(self):
        return to_source(self.ast)

    def _check(self, bindings):
        missing = [v for v in _free_vars(self.ast) if v not in bindings]
        if missing:
            raise EvalError(f"unbound variable(s) {', '.join(sorted(missing))}", self.source)

    def exact(self, **bindings) -> Real:
        """Evaluate keeping Fractions exact where possible."""
        self._check(bindings)
        return _eval(self.ast, bindings)

    def __call__(self, **bindings) -> float:
        return evaluate(self, bindings)

    def array(self, **bindings) -> np.ndarray:
        """Vectorised evaluation; bindings broadcast against each other."""
        self._check(bindings)
        arrays = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in bindings.values()]) if bindings else []
        shape = arrays[0].shape if arrays else ()
        n = int(np.prod(shape)) if shape else 1
        env = {k: a.reshape(-1) for k, a in zip(bindings, arrays)}
        out = _veval(self.ast, env, n)
        if not np.all(np.isfinite(out)):
            raise EvalError("non-finite value", self.source)
        return out.reshape(shape)

    @property
    def free_variables(self) -> frozenset:
        return frozenset(_free_vars(self.ast))

    def breakpoints(self, var):
        """Guard endpoints of every piecewise node on ``var`` (finite ones only)."""
        out = set()

        def walk(node):
            if isinstance(node, Piecewise):
                if node.var == var:
                    for b in node.branches:
                        out.add(b.lo)
                        if b.hi != math.inf:
                            out.add(b.hi)
                for b in node.branches:
                    walk(b.body)
            elif isinstance(node, Neg):
                walk(node.operand)
            elif isinstance(node, BinOp):
                walk(node.left)
                walk(node.right)
            elif isinstance(node, Call):
                for a in node.args:
                    walk(a)

        walk(self.ast)
        return sorted(out)


def parse(source: str, variables) -> Expression:
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", source or "", 0)
    variables = tuple(variables)
    ast = _Parser(source, variables).parse()
    return Expression(source, variables, ast)


def evaluate(e: Expression, bindings) -> float:
    e._check(bindings)
    value = _feval(e.ast, bindings)
    if not math.isfinite(value):
        raise EvalError("non-finite value", e.source)
    return value


def evaluate_exact(e: Expression, bindings) -> Real:
    return e.exact(**bindings)


def constant(value) -> Expression:
    value = Fraction(value)
    text = str(value)
    return parse(text if value.denominator == 1 else f"{value.numerator}/{value.denominator}", ())


def is_exact(x) -> bool:
    return isinstance(x, (Fraction, int))
