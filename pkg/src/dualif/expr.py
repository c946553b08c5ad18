"""Small arithmetic expression language for user-supplied dynamics.

Expressions have exactly one free variable (``x``, ``y`` or ``t``) and are
evaluated elementwise on floats or numpy arrays.  Grammar::

    expr    := term { ("+"|"-") term } ;
    term    := factor { ("*"|"/") factor } ;
    factor  := unary [ "^" factor ] ;          (right associative)
    unary   := "-" unary | primary ;
    primary := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")" ;

Note that unary minus binds tighter than ``^``, so ``-x^2`` is ``(-x)^2``.
"""

from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnknownIdentifier

VAR_NAMES = ("x", "y", "t")
CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = ("sin", "cos", "tan", "atan", "sinh", "cosh", "tanh",
             "exp", "log", "sqrt", "abs", "sign")

MAX_DEPTH = 80

# --------------------------------------------------------------------------
# AST


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
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Const, Neg, BinOp, Call]

# --------------------------------------------------------------------------
# Tokenizer

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?", re.ASCII)
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*", re.ASCII)
_WS = " \t\r\n"


def _tokenize(source: str) -> list[tuple[str, object, int]]:
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c in _WS:
            i += 1
            continue
        if c in "+-*/^()":
            tokens.append(("op", c, i))
            i += 1
            continue
        m = _NUMBER.match(source, i)
        if m:
            text = m.group(0)
            value = float(text)
            if not math.isfinite(value):
                raise ExprSyntaxError(i, f"numeric literal {text!r} out of range")
            tokens.append(("num", value, i))
            i = m.end()
            continue
        m = _IDENT.match(source, i)
        if m:
            tokens.append(("ident", m.group(0), i))
            i = m.end()
            continue
        raise ExprSyntaxError(i, f"unexpected character {c!r}")
    tokens.append(("end", None, n))
    return tokens


# --------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, source: str, var_name: str):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.var_name = var_name
        self.depth = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, val, at = self.take()
        if kind != "op" or val != value:
            raise ExprSyntaxError(at, f"expected {value!r}")

    def enter(self, at: int):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExprSyntaxError(at, "expression nested too deeply")

    def parse(self) -> Node:
        node = self.expr()
        kind, val, at = self.peek()
        if kind != "end":
            raise ExprSyntaxError(at, f"unexpected token {val!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                node = BinOp(val, node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                node = BinOp(val, node, self.factor())
            else:
                return node

    def factor(self) -> Node:
        base = self.unary()
        kind, val, at = self.peek()
        if kind == "op" and val == "^":
            self.take()
            self.enter(at)
            exponent = self.factor()
            self.depth -= 1
            return BinOp("^", base, exponent)
        return base

    def unary(self) -> Node:
        kind, val, at = self.peek()
        if kind == "op" and val == "-":
            self.take()
            self.enter(at)
            node = Neg(self.unary())
            self.depth -= 1
            return node
        return self.primary()

    def primary(self) -> Node:
        kind, val, at = self.take()
        if kind == "num":
            return Num(val)
        if kind == "op" and val == "(":
            self.enter(at)
            node = self.expr()
            self.expect(")")
            self.depth -= 1
            return node
        if kind == "ident":
            if val in FUNCTIONS:
                nkind, nval, nat = self.peek()
                if nkind != "op" or nval != "(":
                    raise ExprSyntaxError(nat, f"function {val!r} requires '('")
                self.take()
                self.enter(at)
                arg = self.expr()
                self.expect(")")
                self.depth -= 1
                return Call(val, arg)
            if val == self.var_name:
                return Var(val)
            if val in CONSTANTS:
                return Const(val)
            raise UnknownIdentifier(val, at)
        if kind == "end":
            raise ExprSyntaxError(at, "unexpected end of input")
        raise ExprSyntaxError(at, f"unexpected token {val!r}")


# --------------------------------------------------------------------------
# Serialization

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_UNARY_PREC = 3
_POW_PREC = 4
_ATOM_PREC = 5


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _POW_PREC if node.op == "^" else _PREC[node.op]
    if isinstance(node, Neg):
        return _UNARY_PREC
    return _ATOM_PREC


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_source(node: Node) -> str:
    """Serialize an AST back to text that re-parses to the same AST."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        if _prec(node.operand) < _UNARY_PREC or _prec(node.operand) == _POW_PREC:
            inner = f"({inner})"
        return "-" + inner
    left, right = to_source(node.left), to_source(node.right)
    if node.op == "^":
        # base must be unary or primary; exponent may be any factor
        if _prec(node.left) < _UNARY_PREC or _prec(node.left) == _POW_PREC:
            left = f"({left})"
        if _prec(node.right) < _UNARY_PREC:
            right = f"({right})"
        return f"{left}^{right}"
    p = _PREC[node.op]
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


# --------------------------------------------------------------------------
# Evaluation

Compiled = Callable[[np.ndarray, bool], np.ndarray]


def _check(value: np.ndarray, strict: bool, what: str) -> np.ndarray:
    if strict:
        if not np.all(np.isfinite(value)):
            raise DomainError(f"{what}: non-finite result")
    elif np.any(np.isnan(value)):
        raise DomainError(f"{what}: undefined result")
    return value


def _domain_log(v):
    if np.any(v <= 0):
        raise DomainError("log of non-positive value")
    return np.log(v)


def _domain_sqrt(v):
    if np.any(v < 0):
        raise DomainError("sqrt of negative value")
    return np.sqrt(v)


_UFUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "atan": np.arctan,
    "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh, "exp": np.exp,
    "log": _domain_log, "sqrt": _domain_sqrt, "abs": np.abs, "sign": np.sign,
}


def _div(a, b):
    if np.any(b == 0):
        raise DomainError("division by zero")
    return a / b


def _pow(a, b):
    bad = (a < 0) & (b != np.floor(b))
    if np.any(bad):
        raise DomainError("negative base with non-integer exponent")
    if np.any((a == 0) & (b < 0)):
        raise DomainError("zero raised to a negative power")
    return np.power(a, b)


_BINOPS = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": _div, "^": _pow}


def _compile(node: Node) -> Compiled:
    if isinstance(node, Num):
        c = node.value
        return lambda v, strict: c
    if isinstance(node, Var):
        return lambda v, strict: v
    if isinstance(node, Const):
        c = CONSTANTS[node.name]
        return lambda v, strict: c
    if isinstance(node, Neg):
        inner = _compile(node.operand)
        return lambda v, strict: -inner(v, strict)
    if isinstance(node, Call):
        fn, arg, name = _UFUNCS[node.func], _compile(node.arg), node.func
        return lambda v, strict: _check(fn(arg(v, strict)), strict, name)
    op, left, right = _BINOPS[node.op], _compile(node.left), _compile(node.right)
    sym = node.op
    return lambda v, strict: _check(op(left(v, strict), right(v, strict)), strict, sym)


# Scalar twin of the compiled evaluator: plain floats through the math
# module, avoiding numpy dispatch in the simulation inner loop.


def _s_log(v):
    if v <= 0:
        raise DomainError("log of non-positive value")
    return math.log(v)


def _s_sqrt(v):
    if v < 0:
        raise DomainError("sqrt of negative value")
    return math.sqrt(v)


def _s_sign(v):
    return v if v != v else (0.0 if v == 0 else math.copysign(1.0, v))


_SCALAR_FUNCS = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan, "atan": math.atan,
    "sinh": math.sinh, "cosh": math.cosh, "tanh": math.tanh, "exp": math.exp,
    "log": _s_log, "sqrt": _s_sqrt, "abs": abs, "sign": _s_sign,
}


def _s_div(a, b):
    if b == 0:
        raise DomainError("division by zero")
    return a / b


def _s_pow(a, b):
    if a < 0 and b != math.floor(b):
        raise DomainError("negative base with non-integer exponent")
    if a == 0 and b < 0:
        raise DomainError("zero raised to a negative power")
    return a ** b


_SCALAR_BINOPS = {"+": operator.add, "-": operator.sub, "*": operator.mul,
                  "/": _s_div, "^": _s_pow}


def _s_check(value: float, strict: bool, what: str) -> float:
    if strict:
        if not math.isfinite(value):
            raise DomainError(f"{what}: non-finite result")
    elif value != value:
        raise DomainError(f"{what}: undefined result")
    return value


def _compile_scalar(node: Node) -> Compiled:
    if isinstance(node, Num):
        c = float(node.value)
        return lambda v, strict: c
    if isinstance(node, Var):
        return lambda v, strict: v
    if isinstance(node, Const):
        c = float(CONSTANTS[node.name])
        return lambda v, strict: c
    if isinstance(node, Neg):
        inner = _compile_scalar(node.operand)
        return lambda v, strict: -inner(v, strict)
    if isinstance(node, Call):
        fn, arg, name = _SCALAR_FUNCS[node.func], _compile_scalar(node.arg), node.func
        return lambda v, strict: _s_check(float(fn(arg(v, strict))), strict, name)
    op, left, right = _SCALAR_BINOPS[node.op], _compile_scalar(node.left), _compile_scalar(node.right)
    sym = node.op
    return lambda v, strict: _s_check(op(left(v, strict), right(v, strict)), strict, sym)


@dataclass(frozen=True)
class DynamicsExpr:
    """Parsed scalar function of one variable; immutable and thread-safe."""

    ast: Node
    var_name: str
    _fn: Compiled = field(init=False, repr=False, compare=False)
    _scalar: Compiled = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_fn", _compile(self.ast))
        object.__setattr__(self, "_scalar", _compile_scalar(self.ast))

    @property
    def source(self) -> str:
        return to_source(self.ast)

    def __call__(self, value, strict: bool = True):
        if isinstance(value, float):
            try:
                return self._scalar(value, strict)
            except (OverflowError, ValueError) as exc:
                if isinstance(exc, DomainError):
                    raise
                # math overflow/edge cases: defer to numpy semantics
        v = np.asarray(value, dtype=float)
        with np.errstate(all="ignore"):
            out = self._fn(v, strict)
            out = _check(np.asarray(out, dtype=float), strict, "expression")
        if v.ndim == 0:
            return float(out)
        return np.broadcast_to(out, v.shape).copy()

    def __str__(self) -> str:
        return self.source


def parse(source: str, var_name: str = "x") -> DynamicsExpr:
    """Parse ``source`` into a :class:`DynamicsExpr` in the variable ``var_name``."""
    if var_name not in VAR_NAMES:
        raise ValueError(f"var_name must be one of {VAR_NAMES}, got {var_name!r}")
    if not source or not source.strip():
        raise ExprSyntaxError(0, "empty expression")
    return DynamicsExpr(_Parser(source, var_name).parse(), var_name)


def evaluate(expr: DynamicsExpr, value: float) -> float:
    if not math.isfinite(value):
        raise DomainError("evaluation point must be finite")
    return expr(float(value))
