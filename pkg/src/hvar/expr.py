"""A small arithmetic language for field data over (x, y, t).

    expr     := sum
    sum      := product (('+' | '-') product)*
    product  := unary (('*' | '/') unary)*
    unary    := '-' unary | '+' unary | power
    power    := atom ('^' unary)?          # right associative, -2^2 == -4
    atom     := number | name | name '(' args ')' | '(' expr ')'

Names: x1..xN, y1..yN, t, knorm, pi (and x, y when N = 1).
Functions: sin, cos, exp (one argument), min, max (two or more).

Expressions compile to vectorized callables on (m, 2N+1) coordinate arrays.
"""
import re

import numpy as np

from . import hgroup
from .errors import UsageError
from .hgroup import GroupElement

__all__ = ["ExprError", "Expression", "compile_expr", "expr_eval"]


class ExprError(UsageError):
    def __init__(self, message, pos=None, source=None):
        self.pos = pos
        self.source = source
        where = f" at position {pos}" if pos is not None else ""
        super().__init__(f"{message}{where}" + (f" in {source!r}" if source is not None else ""))


_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))")
_UNARY = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_VARIADIC = {"min": np.minimum, "max": np.maximum}


def _tokenize(src):
    out, pos = [], 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            raise ExprError(f"unexpected character {src[pos:].lstrip()[0]!r}",
                            len(src) - len(src[pos:].lstrip()), src)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", None, len(src)))
    return out


class _Parser:
    def __init__(self, src, N):
        self.src, self.N = src, N
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, val, pos = self.take()
        if val != op:
            raise ExprError(f"expected {op!r}, found {val or 'end of input'!r}", pos, self.src)

    def parse(self):
        node = self.sum()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected {val!r}", pos, self.src)
        return node

    def sum(self):
        node = self.product()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.product()
            node = (lambda a, b: lambda X: a(X) + b(X))(node, rhs) if op == "+" else \
                (lambda a, b: lambda X: a(X) - b(X))(node, rhs)
        return node

    def product(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op, pos = self.take()
            rhs = self.unary()
            if op == "*":
                node = (lambda a, b: lambda X: a(X) * b(X))(node, rhs)
            else:
                node = self._divide(node, rhs, pos)
        return node

    def _divide(self, a, b, pos):
        src = self.src

        def f(X):
            den = np.asarray(b(X), dtype=float)
            if np.any(den == 0.0):
                bad = int(np.flatnonzero(np.broadcast_to(den, (X.shape[0],)) == 0.0)[0])
                raise ExprError(f"division by zero at sample point {X[bad].tolist()}", pos, src)
            return a(X) / den
        return f

    def unary(self):
        op = self.peek()[1]
        if op in ("-", "+"):
            self.take()
            inner = self.unary()
            return inner if op == "+" else (lambda a: lambda X: -a(X))(inner)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            exp = self.unary()
            return (lambda a, b: lambda X: np.power(a(X), b(X)))(base, exp)
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            c = float(val)
            return lambda X: np.full(X.shape[0], c)
        if val == "(":
            node = self.sum()
            self.expect(")")
            return node
        if kind == "name":
            if self.peek()[1] == "(":
                return self.call(val, pos)
            return self.variable(val, pos)
        raise ExprError(f"unexpected {val or 'end of input'!r}", pos, self.src)

    def call(self, name, pos):
        if name not in _UNARY and name not in _VARIADIC:
            raise ExprError(f"unknown function {name!r}", pos, self.src)
        self.expect("(")
        args = [self.sum()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.sum())
        self.expect(")")
        if name in _UNARY:
            if len(args) != 1:
                raise ExprError(f"{name} takes one argument, got {len(args)}", pos, self.src)
            fn, a = _UNARY[name], args[0]
            return lambda X: fn(a(X))
        if len(args) < 2:
            raise ExprError(f"{name} takes at least two arguments", pos, self.src)
        fn = _VARIADIC[name]

        def f(X):
            out = args[0](X)
            for a in args[1:]:
                out = fn(out, a(X))
            return out
        return f

    def variable(self, name, pos):
        N = self.N
        if name == "t":
            return lambda X: X[:, 2 * N]
        if name == "knorm":
            return lambda X: hgroup.norm(X)
        if name == "pi":
            return lambda X: np.full(X.shape[0], np.pi)
        m = re.fullmatch(r"([xy])(\d*)", name)
        if m:
            k = int(m.group(2)) if m.group(2) else (1 if N == 1 else 0)
            if 1 <= k <= N:
                col = (k - 1) + (0 if m.group(1) == "x" else N)
                return lambda X: X[:, col]
        raise ExprError(f"unknown identifier {name!r}", pos, self.src)


class Expression:
    """A compiled expression; call it on an (m, 2N+1) array or a GroupElement."""

    def __init__(self, source, N=1):
        if not isinstance(source, str):
            source = repr(float(source))
        self.source, self.N = source, int(N)
        self._fn = _Parser(source, self.N).parse()

    def __call__(self, X):
        if isinstance(X, GroupElement):
            return float(self(X.as_array()[None, :])[0])
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[-1] != 2 * self.N + 1:
            raise UsageError(f"expression compiled for N={self.N} got points with {X.shape[-1]} coordinates")
        with np.errstate(all="ignore"):
            out = np.broadcast_to(np.asarray(self._fn(X), dtype=float), (X.shape[0],)).copy()
        if not np.all(np.isfinite(out)):
            bad = int(np.flatnonzero(~np.isfinite(out))[0])
            raise ExprError(f"non-finite value at sample point {X[bad].tolist()}", None, self.source)
        return out

    def __repr__(self):
        return f"Expression({self.source!r}, N={self.N})"


def compile_expr(source, N=1):
    return Expression(source, N)


def expr_eval(expression, p):
    return Expression(expression, p.N)(p)
