"""Small expression language for scalar coefficient functions.

Grammar, loosest binding first::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := number | name | name '(' args ')' | '(' expr ')'

Evaluation works on floats or on numpy arrays of equal shape, so one
compiled expression can be evaluated at many points at once.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "sqrt": 1, "atan2": 2}
CONSTANTS = {"pi": math.pi}
RESERVED = frozenset(FUNCTIONS) | frozenset(CONSTANTS)


class ExprError(ValueError):
    """Base class for expression errors."""


class SyntaxError(ExprError):  # noqa: A001 - mirrors the public error name
    def __init__(self, offset: int, message: str):
        self.offset = offset
        self.message = message
        super().__init__(f"offset {offset}: {message}")


class UnknownFunction(ExprError):
    def __init__(self, name: str, offset: int = -1):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown function '{name}'")


class MissingVariable(ExprError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing variable '{name}'")


class DomainError(ExprError):
    pass


# ---------------------------------------------------------------- AST nodes

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Union[Num, Var, Const, Neg, BinOp, Call]


# ---------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    raw = text.encode("utf-8")
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise SyntaxError(len(text[:bad].encode("utf-8")), f"unexpected character {text[bad]!r}")
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), len(text[:start].encode("utf-8"))))
        pos = m.end()
    tokens.append(("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value or kind != "op":
            what = "end of input" if kind == "end" else repr(val)
            raise SyntaxError(off, f"expected '{value}', found {what}")

    def parse(self) -> Expr:
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise SyntaxError(off, f"unexpected {val!r}")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if val not in FUNCTIONS:
                    raise UnknownFunction(val, off)
                self.take()
                args = [self.expr()]
                while self.peek()[:2] == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[val]:
                    raise SyntaxError(off, f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}")
                return Call(val, tuple(args))
            if val in CONSTANTS:
                return Const(val)
            if val in FUNCTIONS:
                raise SyntaxError(off, f"function '{val}' used without arguments")
            return Var(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(val)
        raise SyntaxError(off, f"expected a value, found {what}")


def parse(text: str) -> Expr:
    """Parse ``text`` into an AST. Offsets in errors are UTF-8 byte offsets."""
    if not isinstance(text, str):
        raise TypeError("expression text must be a string")
    return _Parser(text).parse()


# ---------------------------------------------------------------- rendering

def render(e: Expr) -> str:
    """Fully parenthesised text that parses back to an equivalent AST."""
    if isinstance(e, Num):
        s = repr(float(e.value))
        if s in ("inf", "-inf", "nan"):
            raise ExprError(f"cannot render non-finite literal {s}")
        return f"({s})" if s.startswith("-") else s
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Neg):
        return f"(-{render(e.operand)})"
    if isinstance(e, BinOp):
        return f"({render(e.left)} {e.op} {render(e.right)})"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(render(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")


def free_vars(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Neg):
        return free_vars(e.operand)
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, Call):
        out = frozenset()
        for a in e.args:
            out |= free_vars(a)
        return out
    return frozenset()


# ---------------------------------------------------------------- evaluation

def _sqrt(a):
    if np.any(np.asarray(a) < 0):
        raise DomainError("sqrt of a negative number")
    return np.sqrt(a)


def _div(a, b):
    if np.any(np.asarray(b) == 0):
        raise DomainError("division by zero")
    return a / b


def _pow(a, b):
    a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    bad = (a_arr < 0) & (b_arr != np.round(b_arr))
    if np.any(bad):
        raise DomainError("negative base with non-integer exponent")
    if np.any((a_arr == 0) & (b_arr < 0)):
        raise DomainError("zero raised to a negative power")
    return np.power(a_arr, b_arr) if (a_arr.ndim or b_arr.ndim) else float(a_arr ** b_arr)


_CALLS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": _sqrt, "atan2": np.arctan2}
_BINOPS = {"+": lambda a, b: a + b, "-": lambda a, b: a - b,
           "*": lambda a, b: a * b, "/": _div, "^": _pow}


def compile_expr(e: Expr) -> Callable[[Mapping[str, object]], object]:
    """Turn an AST into a closure ``env -> value`` (floats or arrays)."""
    if isinstance(e, Num):
        v = float(e.value)
        return lambda env: v
    if isinstance(e, Const):
        v = CONSTANTS[e.name]
        return lambda env: v
    if isinstance(e, Var):
        name = e.name

        def var(env):
            try:
                return env[name]
            except KeyError:
                raise MissingVariable(name) from None
        return var
    if isinstance(e, Neg):
        f = compile_expr(e.operand)
        return lambda env: -f(env)
    if isinstance(e, BinOp):
        fl, fr, op = compile_expr(e.left), compile_expr(e.right), _BINOPS[e.op]
        return lambda env: op(fl(env), fr(env))
    if isinstance(e, Call):
        fn = _CALLS.get(e.name)
        if fn is None:
            raise UnknownFunction(e.name)
        fargs = [compile_expr(a) for a in e.args]
        if len(fargs) == 1:
            f0 = fargs[0]
            return lambda env: fn(f0(env))
        return lambda env: fn(*(f(env) for f in fargs))
    raise TypeError(f"not an expression node: {e!r}")


def eval(e: Expr, env: Mapping[str, object]):  # noqa: A001
    """Evaluate ``e``; every free variable must be bound in ``env``."""
    with np.errstate(all="ignore"):
        out = compile_expr(e)(env)
    if isinstance(out, np.ndarray):
        return out
    return float(out)


def fd_diff(e: Expr, var: str, env: Mapping[str, object], h: float = 1e-5):
    """Central difference of ``e`` in ``var``: (e(x+h) - e(x-h)) / 2h."""
    if h <= 0:
        raise ValueError("step h must be positive")
    if var not in env:
        raise MissingVariable(var)
    plus = dict(env)
    minus = dict(env)
    plus[var] = env[var] + h
    minus[var] = env[var] - h
    return (eval(e, plus) - eval(e, minus)) / (2.0 * h)


class Compiled:
    """A parsed expression bundled with its compiled evaluator."""

    __slots__ = ("text", "ast", "vars", "_fn")

    def __init__(self, text: Union[str, float, int]):
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            text = repr(float(text))
        self.text = text
        self.ast = parse(text)
        self.vars = free_vars(self.ast)
        self._fn = compile_expr(self.ast)

    def __call__(self, env):
        with np.errstate(all="ignore"):
            return self._fn(env)

    def is_constant(self) -> bool:
        return not self.vars

    def __repr__(self):
        return f"Compiled({self.text!r})"
