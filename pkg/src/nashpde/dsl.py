"""Tiny arithmetic expression language for coefficient bodies.

Config files carry drift/payoff/feedback formulas as strings; this module
parses them into a small AST, checks them against the set of declared
variables, and evaluates them either as checked scalars or as broadcasting
numpy expressions.  Grammar, informally::

    expr    := term (('+'|'-') term)*
    term    := unary (('*'|'/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' exponent)?          # right-associative
    atom    := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'

Binding strength: ^  >  unary -  >  * /  >  + -.  The exponent of ^ must be
a literal integer or half-integer constant (optionally negated), so powers
stay real-valued and printable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .feedback import smoothed_heaviside

__all__ = [
    "Expr", "Num", "Var", "Neg", "BinOp", "Call",
    "DslError", "ParseError", "EvalError",
    "parse", "evaluate", "evaluate_array", "free_vars", "to_source",
]


class DslError(ValueError):
    """Base error; ``offset`` is a byte offset into the source text."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ParseError(DslError):
    pass


class EvalError(DslError):
    pass


# ─── AST ─────────────────────────────────────────────────────────────────────
# `pos` is excluded from equality so that printing and reparsing yields a
# structurally identical tree.  Num values are always nonnegative; negative
# constants are represented as Neg(Num).

@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Expr", ...]
    pos: int = field(default=0, compare=False)


Expr = Union[Num, Var, Neg, BinOp, Call]

FUNCTIONS: dict[str, int] = {
    "sin": 1, "cos": 1, "exp": 1, "abs": 1, "sqrt": 1, "tanh": 1, "sign": 1,
    "min": 2, "max": 2, "heav_eps": 2, "clamp": 3,
}

_BIN_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_UNARY_PREC = 25  # between * / and ^


# ─── tokenizer ───────────────────────────────────────────────────────────────

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad = len(text) - len(stripped)
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


# ─── parser ──────────────────────────────────────────────────────────────────

class _Parser:
    def __init__(self, text: str, declared: frozenset[str]):
        self.text = text
        self.declared = declared
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> tuple[str, str, int]:
        kind, val, pos = self.peek()
        if kind != "op" or val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", pos)
        return self.advance()

    def parse_expr(self, min_prec: int = 0) -> Expr:
        left = self.parse_prefix()
        while True:
            kind, val, pos = self.peek()
            if kind != "op" or val not in _BIN_PREC:
                break
            prec = _BIN_PREC[val]
            if prec < min_prec:
                break
            self.advance()
            if val == "^":
                right = self.parse_expr(prec)  # right-associative
                self._check_exponent(right, pos)
            else:
                right = self.parse_expr(prec + 1)
            left = BinOp(val, left, right, pos=pos)
        return left

    def parse_prefix(self) -> Expr:
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.parse_expr(_UNARY_PREC), pos=pos)
        if kind == "op" and val == "(":
            self.advance()
            inner = self.parse_expr(0)
            self.expect(")")
            return inner
        if kind == "num":
            self.advance()
            return Num(float(val), pos=pos)
        if kind == "ident":
            self.advance()
            nxt_kind, nxt_val, _ = self.peek()
            if nxt_kind == "op" and nxt_val == "(":
                return self.parse_call(val, pos)
            if val in self.declared:
                return Var(val, pos=pos)
            if val in FUNCTIONS:
                raise ParseError(f"function {val!r} needs an argument list", pos)
            raise ParseError(f"unknown identifier {val!r}", pos)
        raise ParseError(f"expected an expression, found {val or 'end of input'!r}", pos)

    def parse_call(self, name: str, pos: int) -> Expr:
        if name not in FUNCTIONS:
            raise ParseError(f"unknown function {name!r}", pos)
        self.expect("(")
        args = [self.parse_expr(0)]
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == ",":
                self.advance()
                args.append(self.parse_expr(0))
            else:
                break
        self.expect(")")
        arity = FUNCTIONS[name]
        if len(args) != arity:
            raise ParseError(
                f"{name} takes {arity} argument{'s' if arity != 1 else ''}, got {len(args)}", pos)
        return Call(name, tuple(args), pos=pos)

    @staticmethod
    def _check_exponent(node: Expr, pos: int) -> None:
        # ^ only with constant integer or half-integer exponents
        core = node.operand if isinstance(node, Neg) else node
        if not isinstance(core, Num) or 2.0 * core.value != round(2.0 * core.value):
            raise ParseError("exponent must be a literal integer or half-integer constant", pos)


def parse(text: str, declared_vars: frozenset[str] | set[str]) -> Expr:
    """Parse ``text`` against the declared variable names.

    Undeclared identifiers, unknown functions, arity mismatches and malformed
    syntax raise :class:`ParseError` with the byte offset of the offender.
    """
    parser = _Parser(text, frozenset(declared_vars))
    expr = parser.parse_expr(0)
    kind, val, pos = parser.peek()
    if kind != "end":
        raise ParseError(f"unexpected trailing input {val!r}", pos)
    return expr


# ─── evaluation ──────────────────────────────────────────────────────────────

def evaluate(expr: Expr, bindings: Mapping[str, float]) -> float:
    """Checked scalar evaluation: division by zero and domain faults raise
    :class:`EvalError` carrying the offending node's offset."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        try:
            return float(bindings[expr.name])
        except KeyError:
            raise EvalError(f"no binding for {expr.name!r}", expr.pos) from None
    if isinstance(expr, Neg):
        return -evaluate(expr.operand, bindings)
    if isinstance(expr, BinOp):
        a = evaluate(expr.left, bindings)
        b = evaluate(expr.right, bindings)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if expr.op == "/":
            if b == 0.0:
                raise EvalError("division by zero", expr.pos)
            return a / b
        # ^: exponent is a checked half-integer literal
        if a < 0.0 and b != round(b):
            raise EvalError("negative base under fractional power", expr.pos)
        if a == 0.0 and b < 0.0:
            raise EvalError("zero base under negative power", expr.pos)
        return float(math.pow(a, b))
    if isinstance(expr, Call):
        args = [evaluate(arg, bindings) for arg in expr.args]
        return _apply(expr.fn, args, expr.pos, checked=True)
    raise TypeError(f"not an Expr node: {expr!r}")


def evaluate_array(expr: Expr, bindings: Mapping[str, np.ndarray | float]) -> np.ndarray:
    """Broadcasting numpy evaluation (IEEE semantics; non-finite values
    propagate instead of raising).  Used by the solver and path-simulation
    hot loops."""
    if isinstance(expr, Num):
        return np.float64(expr.value)
    if isinstance(expr, Var):
        try:
            return np.asarray(bindings[expr.name], dtype=np.float64)
        except KeyError:
            raise EvalError(f"no binding for {expr.name!r}", expr.pos) from None
    if isinstance(expr, Neg):
        return -evaluate_array(expr.operand, bindings)
    if isinstance(expr, BinOp):
        a = evaluate_array(expr.left, bindings)
        b = evaluate_array(expr.right, bindings)
        with np.errstate(divide="ignore", invalid="ignore"):
            if expr.op == "+":
                return a + b
            if expr.op == "-":
                return a - b
            if expr.op == "*":
                return a * b
            if expr.op == "/":
                return a / b
            return np.power(a, b)
    if isinstance(expr, Call):
        args = [evaluate_array(arg, bindings) for arg in expr.args]
        return _apply(expr.fn, args, expr.pos, checked=False)
    raise TypeError(f"not an Expr node: {expr!r}")


def _apply(fn: str, args: list, pos: int, checked: bool):
    if fn == "sin":
        return np.sin(args[0]) if not checked else math.sin(args[0])
    if fn == "cos":
        return np.cos(args[0]) if not checked else math.cos(args[0])
    if fn == "exp":
        return np.exp(args[0]) if not checked else math.exp(args[0])
    if fn == "abs":
        return np.abs(args[0]) if not checked else abs(args[0])
    if fn == "tanh":
        return np.tanh(args[0]) if not checked else math.tanh(args[0])
    if fn == "sign":
        return np.sign(args[0]) if not checked else float(np.sign(args[0]))
    if fn == "sqrt":
        if checked:
            if args[0] < 0.0:
                raise EvalError("sqrt of a negative number", pos)
            return math.sqrt(args[0])
        with np.errstate(invalid="ignore"):
            return np.sqrt(args[0])
    if fn == "min":
        return np.minimum(args[0], args[1]) if not checked else min(args[0], args[1])
    if fn == "max":
        return np.maximum(args[0], args[1]) if not checked else max(args[0], args[1])
    if fn == "clamp":
        if checked:
            return min(max(args[0], args[1]), args[2])
        return np.clip(args[0], args[1], args[2])
    if fn == "heav_eps":
        try:
            out = smoothed_heaviside(args[0], args[1])
        except ValueError as exc:
            raise EvalError(str(exc), pos) from None
        return float(out) if checked else out
    raise EvalError(f"unknown function {fn!r}", pos)


# ─── introspection and printing ──────────────────────────────────────────────

def free_vars(expr: Expr) -> frozenset[str]:
    """Set of variable names the expression actually reads."""
    if isinstance(expr, Num):
        return frozenset()
    if isinstance(expr, Var):
        return frozenset((expr.name,))
    if isinstance(expr, Neg):
        return free_vars(expr.operand)
    if isinstance(expr, BinOp):
        return free_vars(expr.left) | free_vars(expr.right)
    if isinstance(expr, Call):
        out: frozenset[str] = frozenset()
        for arg in expr.args:
            out |= free_vars(arg)
        return out
    raise TypeError(f"not an Expr node: {expr!r}")


def _prec(expr: Expr) -> int:
    if isinstance(expr, BinOp):
        return _BIN_PREC[expr.op]
    if isinstance(expr, Neg):
        return _UNARY_PREC
    return 100  # atoms never need parens


def to_source(expr: Expr) -> str:
    """Print with minimal parentheses; ``parse(to_source(e), vars)`` is
    structurally equal to ``e``."""
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        inner = to_source(expr.operand)
        if _prec(expr.operand) < _UNARY_PREC:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(expr, BinOp):
        prec = _BIN_PREC[expr.op]
        left = to_source(expr.left)
        right = to_source(expr.right)
        if expr.op == "^":
            if _prec(expr.left) <= prec:
                left = f"({left})"
            if _prec(expr.right) < prec:
                right = f"({right})"
        else:
            # left-associative: equal-precedence right children keep parens so
            # the reparse rebuilds the same shape
            if _prec(expr.left) < prec:
                left = f"({left})"
            if _prec(expr.right) <= prec:
                right = f"({right})"
        return f"{left} {expr.op} {right}" if expr.op in ("+", "-") else f"{left}{expr.op}{right}"
    if isinstance(expr, Call):
        return f"{expr.fn}({', '.join(to_source(a) for a in expr.args)})"
    raise TypeError(f"not an Expr node: {expr!r}")
