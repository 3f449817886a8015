"""Scalar expression language: parse, evaluate, differentiate.

Every user-supplied function in a scene (the generator and directrix
components, the scaling factor of a transformation, a hodograph potential,
...) is written as an infix string over named variables::

    >>> e = parse("sqrt(2*k3)*sin(k2)")
    >>> round(evaluate(e, {"k3": 0.5, "k2": math.pi / 6}), 12)
    0.5

Grammar (highest precedence last)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?          # right associative
    atom  := NUMBER | NAME | NAME '(' expr [',' expr] ')' | '(' expr ')'

``pi`` and ``e`` are predefined constants. Evaluation is vectorized: any
binding may be a numpy array and the result broadcasts accordingly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import (
    DomainError,
    ExprSyntaxError,
    UnboundVariableError,
    UnknownFunctionError,
)

UNARY_FUNCTIONS = (
    "sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log", "sqrt", "atan",
)
BINARY_FUNCTIONS = ("atan2",)
CONSTANTS = {"pi": math.pi, "e": math.e}


class Expr:
    """Base class of the immutable expression tree."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_string(self)

    def __call__(self, **bindings):
        return evaluate(self, bindings)


@dataclass(frozen=True, eq=True, repr=False)
class Const(Expr):
    value: float
    name: Union[str, None] = None

    def __repr__(self) -> str:
        return f"Const({self.name or self.value!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Var(Expr):
    name: str

    def __repr__(self) -> str:
        return f"Var({self.name!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Unary(Expr):
    op: str  # "neg" or a name from UNARY_FUNCTIONS
    arg: Expr

    def __repr__(self) -> str:
        return f"Unary({self.op!r}, {self.arg!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Binary(Expr):
    op: str  # "+", "-", "*", "/", "^", "atan2"
    left: Expr
    right: Expr

    def __repr__(self) -> str:
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


ZERO = Const(0.0)
ONE = Const(1.0)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, tok, what=None):
        kind, value, pos = tok
        if what is None:
            what = "unexpected end of input" if kind == "end" else f"unexpected token {value!r}"
        raise ExprSyntaxError(what, pos, self.text)

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] == "end":
            self.error(tok, None if tok[0] == "end" else f"expected {value!r}, got {tok[1]!r}")
        return tok

    def parse(self) -> Expr:
        node = self.expr()
        if self.peek()[0] != "end":
            self.error(self.peek())
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.take()
        kind, value, pos = tok
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(value, pos)
            if value in UNARY_FUNCTIONS or value in BINARY_FUNCTIONS:
                self.error(tok, f"function {value!r} used without arguments")
            if value in CONSTANTS:
                return Const(CONSTANTS[value], value)
            return Var(value)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        self.error(tok)

    def call(self, name: str, pos: int) -> Expr:
        if name not in UNARY_FUNCTIONS and name not in BINARY_FUNCTIONS:
            raise UnknownFunctionError(f"unknown function {name!r}", pos, self.text)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        arity = 2 if name in BINARY_FUNCTIONS else 1
        if len(args) != arity:
            raise ExprSyntaxError(
                f"{name} takes {arity} argument(s), got {len(args)}", pos, self.text
            )
        if arity == 1:
            return Unary(name, args[0])
        return Binary(name, args[0], args[1])


def parse(text: str) -> Expr:
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0, text if isinstance(text, str) else "")
    return _Parser(text).parse()


def as_expr(e: Union[Expr, str, float, int]) -> Expr:
    """Coerce strings and numbers to ``Expr``."""
    if isinstance(e, Expr):
        return e
    if isinstance(e, (int, float)):
        return Const(float(e))
    return parse(e)


# ---------------------------------------------------------------------------
# inspection and printing

def free_variables(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Unary):
        return free_variables(e.arg)
    return free_variables(e.left) | free_variables(e.right)


def is_constant(e: Expr) -> bool:
    return not free_variables(e)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(e: Expr) -> int:
    if isinstance(e, Const):
        return 3 if (e.name is None and (e.value < 0 or math.copysign(1, e.value) < 0)) else 5
    if isinstance(e, Var):
        return 5
    if isinstance(e, Unary):
        return 3 if e.op == "neg" else 5
    return _PREC.get(e.op, 5)


def _const_str(c: Const) -> str:
    if c.name is not None:
        return c.name
    if not math.isfinite(c.value):
        raise ValueError(f"cannot print non-finite constant {c.value}")
    v = float(c.value)
    if v.is_integer() and abs(v) < 2**53 and math.copysign(1, v) > 0:
        return str(int(v))
    return repr(v)


def to_string(e: Expr) -> str:
    """Infix rendering; ``parse(to_string(e))`` evaluates identically to ``e``."""
    if isinstance(e, Const):
        return _const_str(e)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = to_string(e.arg)
            return f"-({inner})" if _prec(e.arg) < 3 else f"-{inner}"
        return f"{e.op}({to_string(e.arg)})"
    if e.op == "atan2":
        return f"atan2({to_string(e.left)}, {to_string(e.right)})"
    p = _PREC[e.op]
    left, right = to_string(e.left), to_string(e.right)
    if e.op == "^":
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < p:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(e.left) < p:
        left = f"({left})"
    # left-associative: equal precedence on the right needs parentheses
    # for the non-commutative operators and is harmless for the others
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


# ---------------------------------------------------------------------------
# evaluation

Bindings = Mapping[str, Union[float, np.ndarray]]


def evaluate(e: Expr, bindings: Bindings, strict: bool = True):
    """Evaluate ``e`` with variables taken from ``bindings``.

    With ``strict=True`` any domain violation raises ``DomainError`` naming
    the offending subexpression. With ``strict=False`` the violating
    entries come back as NaN instead, which lets vectorized solvers back
    off per point.
    """
    env = {k: np.asarray(v, dtype=float) for k, v in bindings.items()}
    with np.errstate(all="ignore"):
        out = _eval(e, env, strict)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _violation(mask, node: Expr, what: str, value, strict: bool):
    if np.any(mask):
        if strict:
            text = to_string(node)
            raise DomainError(f"{what} in {text}", text)
        value = np.where(mask, np.nan, value)
    return value


def _eval(e: Expr, env, strict: bool):
    if isinstance(e, Const):
        return np.float64(e.value)
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Unary):
        u = _eval(e.arg, env, strict)
        op = e.op
        if op == "neg":
            return -u
        if op == "sqrt":
            return _violation(u < 0, e, "sqrt of negative argument", np.sqrt(u), strict)
        if op == "log":
            return _violation(u <= 0, e, "log of non-positive argument", np.log(u), strict)
        if op == "atan":
            return np.arctan(u)
        return getattr(np, op)(u)
    a = _eval(e.left, env, strict)
    b = _eval(e.right, env, strict)
    op = e.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return _violation(b == 0, e, "division by zero", a / b, strict)
    if op == "atan2":
        return np.arctan2(a, b)
    # power
    if is_constant(e.right):
        b = float(b)
        if float(b).is_integer():
            bad = (a == 0) & (b < 0)
        else:
            bad = (a < 0) | ((a == 0) & (b < 0))
        return _violation(bad, e, "power outside its domain", np.power(a, b), strict)
    return _violation(
        a <= 0, e, "power with variable exponent needs a positive base", np.power(a, b), strict
    )


# ---------------------------------------------------------------------------
# differentiation
#
# The constructors below fold literal subtrees and drop neutral elements
# (x + 0, x * 1, x * 0); nothing else is simplified.

def _fold(node: Expr) -> Expr:
    try:
        value = evaluate(node, {})
    except (DomainError, UnboundVariableError):
        return node
    if not math.isfinite(value):
        return node
    return Const(value)


def _is(e: Expr, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


def add(a: Expr, b: Expr) -> Expr:
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(Binary("+", a, b))
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(Binary("-", a, b))
    return Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(Binary("*", a, b))
    return Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is(b, 1):
        return a
    if _is(a, 0):
        return ZERO
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(Binary("/", a, b))
    return Binary("/", a, b)


def power(a: Expr, b: Expr) -> Expr:
    if _is(b, 1):
        return a
    if _is(b, 0):
        return ONE
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(Binary("^", a, b))
    return Binary("^", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const) and a.name is None:
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def func(name: str, a: Expr) -> Expr:
    node = Unary(name, a)
    return _fold(node) if isinstance(a, Const) else node


def differentiate(e: Expr, var: str) -> Expr:
    """Exact symbolic derivative of ``e`` with respect to ``var``."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if var not in free_variables(e):
        return ZERO
    if isinstance(e, Unary):
        u = e.arg
        du = differentiate(u, var)
        op = e.op
        if op == "neg":
            return neg(du)
        if op == "sin":
            outer = func("cos", u)
        elif op == "cos":
            outer = neg(func("sin", u))
        elif op == "tan":
            outer = add(ONE, power(func("tan", u), Const(2.0)))
        elif op == "sinh":
            outer = func("cosh", u)
        elif op == "cosh":
            outer = func("sinh", u)
        elif op == "tanh":
            outer = sub(ONE, power(func("tanh", u), Const(2.0)))
        elif op == "exp":
            outer = func("exp", u)
        elif op == "log":
            return div(du, u)
        elif op == "sqrt":
            return div(du, mul(Const(2.0), func("sqrt", u)))
        elif op == "atan":
            return div(du, add(ONE, power(u, Const(2.0))))
        else:  # pragma: no cover - parser admits no other names
            raise ValueError(f"unknown unary op {op!r}")
        return mul(outer, du)

    a, b = e.left, e.right
    da, db = differentiate(a, var), differentiate(b, var)
    op = e.op
    if op == "+":
        return add(da, db)
    if op == "-":
        return sub(da, db)
    if op == "*":
        return add(mul(da, b), mul(a, db))
    if op == "/":
        return div(sub(mul(da, b), mul(a, db)), power(b, Const(2.0)))
    if op == "atan2":
        # d atan2(a, b) = (b da - a db) / (a^2 + b^2)
        return div(
            sub(mul(b, da), mul(a, db)),
            add(power(a, Const(2.0)), power(b, Const(2.0))),
        )
    # power
    if is_constant(b):
        return mul(mul(b, power(a, sub(b, ONE))), da)
    # a^b = exp(b log a)
    return mul(e, add(mul(db, func("log", a)), div(mul(b, da), a)))
