"""Tiny scalar expression language for declaring f, g and multimap selections.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" INT)?
    atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

Variables are ``x1..xn``, ``y1..ym`` and ``p1..pk``; the only function is
``abs``. Divisors must be nonzero constant subexpressions and exponents are
nonnegative integer literals, so evaluation is always a polynomial (plus
``abs``) in the free variables.

Evaluation works on Python floats and on numpy arrays alike; the same
elementwise operations are applied in both cases so a batched evaluation is
bitwise identical to the pointwise one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

__all__ = [
    "Expr",
    "Literal",
    "Var",
    "Neg",
    "BinOp",
    "Power",
    "Abs",
    "ExprError",
    "ExprSyntaxError",
    "EvalError",
    "parse",
    "evaluate",
    "free_vars",
    "to_source",
    "VAR_PATTERN",
]

VAR_PATTERN = re.compile(r"^([xyp])([1-9][0-9]*)$")
FUNCTIONS = ("abs",)


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    """Lexical or syntax error; ``pos`` is the 0-based character offset."""

    def __init__(self, message: str, source: str, pos: int):
        self.source = source
        self.pos = pos
        self.message = message
        super().__init__(f"{message} at position {pos} in {source!r}")


class EvalError(ExprError):
    pass


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Power:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Abs:
    operand: "Expr"


Expr = Union[Literal, Var, Neg, BinOp, Power, Abs]


# --------------------------------------------------------------------------
# lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number, ident, op, end
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", source, pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


# --------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: _Token | None = None) -> ExprSyntaxError:
        tok = tok or self.tok
        return ExprSyntaxError(message, self.source, tok.pos)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected token {self.tok.text!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op_tok = self.tok
            self.i += 1
            right = self.factor()
            if op_tok.text == "/":
                _check_divisor(right, self.source, op_tok.pos)
            e = BinOp(op_tok.text, e, right)
        return e

    def factor(self) -> Expr:
        if self.accept("-"):
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.i += 1
            tok = self.tok
            if tok.kind == "op" and tok.text == "-":
                raise self.error("negative exponent")
            if tok.kind != "number":
                found = tok.text or "end of input"
                raise self.error(f"exponent must be an integer literal, found {found!r}")
            if not tok.text.isdigit():
                raise self.error(f"non-integer exponent {tok.text!r}")
            self.i += 1
            return Power(base, int(tok.text))
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "number":
            self.i += 1
            return Literal(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            if self.tok.kind == "op" and self.tok.text == "(":
                if tok.text not in FUNCTIONS:
                    raise self.error(f"unknown function {tok.text!r}", tok)
                self.i += 1
                inner = self.expr()
                self.expect(")")
                return Abs(inner)
            if tok.text in FUNCTIONS:
                raise self.error(f"function {tok.text!r} needs an argument", self.tok)
            if not VAR_PATTERN.match(tok.text):
                raise self.error(f"unknown identifier {tok.text!r}", tok)
            return Var(tok.text)
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        found = tok.text or "end of input"
        raise self.error(f"unexpected token {found!r}")


def _check_divisor(e: Expr, source: str, pos: int) -> None:
    if free_vars(e):
        raise ExprSyntaxError("divisor must be a constant", source, pos)
    if evaluate(e, {}) == 0.0:
        raise ExprSyntaxError("division by zero constant", source, pos)


def parse(source: str) -> Expr:
    """Parse ``source`` into an expression tree."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", source, 0)
    return _Parser(source).parse()


# --------------------------------------------------------------------------
# evaluation


def _ipow(base, exponent: int):
    # square-and-multiply with plain products, identical for floats and arrays
    result = None
    square = base
    while exponent:
        if exponent & 1:
            result = square if result is None else result * square
        exponent >>= 1
        if exponent:
            square = square * square
    if result is None:
        return base * 0.0 + 1.0
    return result


def _eval(e: Expr, env: Mapping[str, object]):
    if isinstance(e, Literal):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -_eval(e.operand, env)
    if isinstance(e, Abs):
        return abs(_eval(e.operand, env))
    if isinstance(e, Power):
        return _ipow(_eval(e.base, env), e.exponent)
    if isinstance(e, BinOp):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return a / b
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e: Expr, env: Mapping[str, object]):
    """Evaluate ``e`` with variables bound by ``env``.

    Values may be floats or equally shaped numpy arrays. Raises
    :class:`EvalError` on unbound variables or a non-finite result.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        value = _eval(e, env)
    if np.ndim(value) == 0:
        value = float(value)
        if not np.isfinite(value):
            raise EvalError(
                f"non-finite value {value} for {to_source(e)!r} at {dict(env)!r}"
            )
        return value
    bad = ~np.isfinite(value)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        at = {k: float(np.asarray(v).flat[i]) if np.ndim(v) else v for k, v in env.items()}
        raise EvalError(f"non-finite value for {to_source(e)!r} at {at!r}")
    return value


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Literal):
        return frozenset()
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, (Neg, Abs)):
        return free_vars(e.operand)
    if isinstance(e, Power):
        return free_vars(e.base)
    return free_vars(e.left) | free_vars(e.right)


# --------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_NEG_PREC = 3
_POW_PREC = 4


def _fmt_number(value: float) -> str:
    text = repr(float(value))
    if text.endswith(".0"):
        text = text[:-2]
    return text


def _to_source(e: Expr) -> tuple[str, int]:
    if isinstance(e, Literal):
        return _fmt_number(e.value), 5
    if isinstance(e, Var):
        return e.name, 5
    if isinstance(e, Abs):
        return f"abs({_to_source(e.operand)[0]})", 5
    if isinstance(e, Power):
        text, prec = _to_source(e.base)
        if prec < 5:
            text = f"({text})"
        return f"{text}^{e.exponent}", _POW_PREC
    if isinstance(e, Neg):
        text, prec = _to_source(e.operand)
        if prec < _NEG_PREC:
            text = f"({text})"
        return f"-{text}", _NEG_PREC
    prec = _PREC[e.op]
    left, lp = _to_source(e.left)
    right, rp = _to_source(e.right)
    if lp < prec:
        left = f"({left})"
    # left-associative: an equal-precedence right operand needs parentheses
    if rp <= prec:
        right = f"({right})"
    return f"{left} {e.op} {right}", prec


def to_source(e: Expr) -> str:
    """Render ``e`` as source text that parses back to the same tree."""
    return _to_source(e)[0]
