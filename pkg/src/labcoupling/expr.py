"""Scalar expressions over chart coordinates.

Grammar, loosest binding first::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ("^" ["-"] INT)?
    atom  := NUMBER | "x" INT | FUNC "(" expr ")" | "(" expr ")"

``FUNC`` is one of ``sin``, ``cos``, ``exp``. Coordinates are 1-based, so
``x1`` is the first chart coordinate. ``-x1^2`` means ``-(x1^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

DIV_FLOOR = 1e-300
FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


class ExpressionSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class ExpressionEvalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError("literals are finite and non-negative; use Neg for signs")


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Pow, Call]


# -- tokens ---------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    out = []
    pos, line, line_start = 0, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            out.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    out.append(Token("end", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ExpressionSyntaxError(msg, tok.line, tok.col)

    def accept(self, text):
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            sign = -1 if self.accept("-") else 1
            tok = self.tok
            if tok.kind != "num" or not tok.text.isdigit():
                raise self.error("exponent must be an integer literal")
            self.i += 1
            return Pow(base, sign * int(tok.text))
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            m = re.fullmatch(r"x([1-9]\d*)", tok.text)
            if m:
                return Var(int(m.group(1)))
            if tok.text in FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            raise self.error(f"unknown name {tok.text!r}", tok)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")


def parse_expression(src: str) -> Expr:
    return _Parser(str(src)).parse()


# -- printing ---------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def _wrap(node, need: int) -> str:
    s = to_source(node)
    return f"({s})" if _prec(node) < need else s


def to_source(node: Expr) -> str:
    """Minimal-parenthesis source text; ``parse_expression`` inverts it."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return "-" + _wrap(node.arg, 3)
    if isinstance(node, Pow):
        return f"{_wrap(node.base, 5)}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        sep = f" {node.op} " if p == 1 else node.op
        return _wrap(node.left, p) + sep + _wrap(node.right, p + 1)
    raise TypeError(f"not an expression node: {node!r}")


# -- evaluation -------------------------------------------------------------------


def max_variable(node: Expr) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, (Neg, Call)):
        return max_variable(node.arg)
    if isinstance(node, Pow):
        return max_variable(node.base)
    if isinstance(node, BinOp):
        return max(max_variable(node.left), max_variable(node.right))
    return 0


def _check_denominator(den):
    if np.any(np.abs(den) < DIV_FLOOR):
        raise ExpressionEvalError("division by a value below 1e-300")


def evaluate(node: Expr, coords) -> np.ndarray:
    """Evaluate on coordinates of shape ``(..., n)``; returns shape ``(...)``."""
    x = np.asarray(coords, dtype=float)
    if max_variable(node) > x.shape[-1]:
        raise ExpressionEvalError(f"expression uses x{max_variable(node)} but only {x.shape[-1]} coordinates given")
    return np.broadcast_to(_eval(node, x), x.shape[:-1]).astype(float)


def _eval(node, x):
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        return x[..., node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.arg, x)
    if isinstance(node, Call):
        return FUNCS[node.func](_eval(node.arg, x))
    if isinstance(node, Pow):
        b = _eval(node.base, x)
        if node.exponent < 0:
            _check_denominator(b)
            return 1.0 / b ** (-node.exponent)
        return b**node.exponent
    a, b = _eval(node.left, x), _eval(node.right, x)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    _check_denominator(b)
    return a / b


class CompiledExpression:
    """Parsed expression bound to its source, callable on coordinate arrays."""

    def __init__(self, src):
        if isinstance(src, (int, float)) and not isinstance(src, bool):
            src = repr(float(src))
        self.source = str(src)
        self.ast = parse_expression(self.source)
        self.arity = max_variable(self.ast)

    def __call__(self, coords) -> np.ndarray:
        return evaluate(self.ast, coords)

    def __repr__(self):
        return f"CompiledExpression({self.source!r})"
