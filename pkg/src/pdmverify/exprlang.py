"""A small real-valued expression language in one variable ``x``.

Grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , [ "^" , unary ] ;
    atom    = number | "x" | func , "(" , expr , ")" | "(" , expr , ")" ;
    func    = "exp" | "ln" | "sin" | "cos" | "sinh" | "cosh"
            | "sqrt" | "abs" | "atan" ;
    number  = digits , [ "." , [ digits ] ] , [ exponent ]
            | "." , digits , [ exponent ] ;
    exponent = ("e" | "E") , [ "+" | "-" ] , digits ;

Precedence from tightest to loosest is ``^``, unary minus, ``* /``, ``+ -``.
``^`` is right associative, everything else is left associative, so
``-x^2`` means ``-(x^2)`` and ``2^3^2`` means ``2^(3^2)``.

Evaluation works on scalars and on numpy arrays.  Domain violations raise
:class:`ExprDomainError` instead of producing NaN or infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "ExprDomainError",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expression",
    "FUNCTIONS",
    "parse_expr",
    "eval_expr",
    "eval_array",
    "to_source",
]

FUNCTIONS = ("exp", "ln", "sin", "cos", "sinh", "cosh", "sqrt", "abs", "atan")


class ExprError(ValueError):
    """Base class of all expression errors."""


class ExprSyntaxError(ExprError):
    """Malformed input; ``offset`` is the 0-based byte offset of the fault."""

    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.source = source


class UnknownIdentifierError(ExprSyntaxError):
    """An identifier that is neither ``x`` nor a known function."""

    def __init__(self, name: str, offset: int, source: str = ""):
        ExprError.__init__(self, f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset
        self.source = source


class ExprDomainError(ExprError):
    """Evaluation left the real domain (pole, negative root, log of x <= 0)."""


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str = "x"


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Union[Num, Var, Neg, BinOp, Call]

# --------------------------------------------------------------------------
# Lexer
# --------------------------------------------------------------------------

_PUNCT = {"+", "-", "*", "/", "^", "(", ")"}


@dataclass(frozen=True)
class _Tok:
    kind: str  # "num", "ident", "op", "end"
    text: str
    pos: int


def _lex(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c in _PUNCT:
            toks.append(_Tok("op", c, i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            start = i
            while i < n and src[i].isdigit():
                i += 1
            if i < n and src[i] == ".":
                i += 1
                while i < n and src[i].isdigit():
                    i += 1
            text = src[start:i]
            if text == ".":
                raise ExprSyntaxError("malformed number", start, src)
            if i < n and src[i] in "eE":
                j = i + 1
                if j < n and src[j] in "+-":
                    j += 1
                if j < n and src[j].isdigit():
                    while j < n and src[j].isdigit():
                        j += 1
                    i = j
                else:
                    raise ExprSyntaxError("malformed exponent", j, src)
            toks.append(_Tok("num", src[start:i], start))
            continue
        if c.isalpha() or c == "_":
            start = i
            while i < n and (src[i].isalnum() or src[i] == "_"):
                i += 1
            toks.append(_Tok("ident", src[start:i], start))
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i, src)
    toks.append(_Tok("end", "", n))
    return toks


# --------------------------------------------------------------------------
# Parser (precedence climbing)
# --------------------------------------------------------------------------

_BINARY_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_NEG_PREC = 3
_POW_PREC = 4
_ATOM_PREC = 5


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _lex(src)
        self.k = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.k]

    def advance(self) -> _Tok:
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.kind == "op" and self.tok.text == text:
            self.advance()
            return
        found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
        raise ExprSyntaxError(f"expected {text!r}, found {found}", self.tok.pos, self.src)

    def parse(self) -> Expression:
        e = self.binary(1)
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.tok.pos, self.src)
        return e

    def binary(self, min_prec: int) -> Expression:
        left = self.unary()
        while self.tok.kind == "op" and _BINARY_PREC.get(self.tok.text, 0) >= min_prec:
            op = self.advance().text
            right = self.binary(_BINARY_PREC[op] + 1)
            left = BinOp(op, left, right)
        return left

    def unary(self) -> Expression:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expression:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.kind == "ident":
            self.advance()
            if t.text == "x":
                return Var()
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.binary(1)
                self.expect(")")
                return Call(t.text, arg)
            raise UnknownIdentifierError(t.text, t.pos, self.src)
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.binary(1)
            self.expect(")")
            return e
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ExprSyntaxError(f"expected operand, found {found}", t.pos, self.src)


def parse_expr(source: str) -> Expression:
    """Parse ``source`` into an expression tree.

    Raises
    ------
    ExprSyntaxError
        Malformed input; ``offset`` locates the fault.
    UnknownIdentifierError
        Identifier other than ``x`` or a supported function.
    """
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 0, source if isinstance(source, str) else "")
    return _Parser(source).parse()


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


def _check(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise ExprDomainError(f"{what} produced a non-finite value")
    return values


def _eval(e: Expression, x: np.ndarray) -> np.ndarray:
    if isinstance(e, Num):
        return np.full_like(x, e.value)
    if isinstance(e, Var):
        return x
    if isinstance(e, Neg):
        return -_eval(e.operand, x)
    if isinstance(e, BinOp):
        a = _eval(e.left, x)
        b = _eval(e.right, x)
        with np.errstate(all="ignore"):
            if e.op == "+":
                return _check(a + b, "addition")
            if e.op == "-":
                return _check(a - b, "subtraction")
            if e.op == "*":
                return _check(a * b, "multiplication")
            if e.op == "/":
                if np.any(b == 0.0):
                    raise ExprDomainError("division by zero")
                return _check(a / b, "division")
            if np.any((a == 0.0) & (b < 0.0)):
                raise ExprDomainError("division by zero (zero to a negative power)")
            if np.any((a < 0.0) & (b != np.round(b))):
                raise ExprDomainError("negative base with non-integer exponent")
            return _check(np.power(a, b), "power")
    if isinstance(e, Call):
        v = _eval(e.arg, x)
        f = e.func
        with np.errstate(all="ignore"):
            if f == "ln":
                if np.any(v <= 0.0):
                    raise ExprDomainError("ln of a non-positive value")
                return np.log(v)
            if f == "sqrt":
                if np.any(v < 0.0):
                    raise ExprDomainError("sqrt of a negative value")
                return np.sqrt(v)
            table = {
                "exp": np.exp,
                "sin": np.sin,
                "cos": np.cos,
                "sinh": np.sinh,
                "cosh": np.cosh,
                "abs": np.abs,
                "atan": np.arctan,
            }
            return _check(table[f](v), f)
    raise TypeError(f"not an expression node: {e!r}")


def eval_array(e: Expression, x) -> np.ndarray:
    """Evaluate ``e`` elementwise on an array of abscissae (float64)."""
    xs = np.asarray(x, dtype=float)
    return np.array(_eval(e, xs), dtype=float)


def eval_expr(e: Expression, x: float) -> float:
    """Evaluate ``e`` at a real point.

    Raises
    ------
    ExprDomainError
        Division by zero, ln of a non-positive value, sqrt of a negative
        value, or any other non-finite intermediate.
    """
    return float(eval_array(e, np.array(float(x))))


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------


def _prec(e: Expression) -> int:
    if isinstance(e, BinOp):
        return _POW_PREC if e.op == "^" else _BINARY_PREC[e.op]
    if isinstance(e, Neg):
        return _NEG_PREC
    return _ATOM_PREC


def _wrap(e: Expression, need: bool) -> str:
    s = to_source(e)
    return f"({s})" if need else s


def to_source(e: Expression) -> str:
    """Print ``e`` with the minimal parentheses that re-parse to the same tree."""
    if isinstance(e, Num):
        if e.value < 0 or not math.isfinite(e.value):
            raise ExprError("literals must be finite and non-negative")
        return repr(float(e.value))
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _prec(e.operand) < _NEG_PREC)
    if isinstance(e, BinOp):
        p = _prec(e)
        if e.op == "^":
            left = _wrap(e.left, _prec(e.left) <= p)
            right = _wrap(e.right, _prec(e.right) < _NEG_PREC)
            return f"{left}^{right}"
        left = _wrap(e.left, _prec(e.left) < p)
        right = _wrap(e.right, _prec(e.right) <= p)
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression node: {e!r}")
