"""A tiny expression language for smooth scalar functions of chart coordinates.

The grammar is deliberately small (no abs, no piecewise) so that everything
it can express is smooth on its domain.  Parsed constants are kept as exact
`Fraction`s whenever the literal allows it and only widened to float at
evaluation time; flat-metric entries therefore stay exact and derivative
cancellations hit true zeros.

Grammar (see README for the full EBNF)::

    expr     := term  (("+" | "-") term)*
    term     := unary (("*" | "/") unary)*
    unary    := "-" unary | power
    power    := atom ("^" exponent)?          # exponent: integer literal
    atom     := number | coord | func "(" expr ")" | "(" expr ")"

Identifiers bind to coordinates by *position* in the coordinate-name list at
parse time; evaluation never does name lookup.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .errors import (
    DimensionMismatch,
    ExprSyntaxError,
    NonIntegerExponent,
    UnknownIdentifier,
)
from .jets import Jet, context

__all__ = [
    "Expr", "Const", "Coord", "Neg", "Add", "Sub", "Mul", "Div", "Pow",
    "Sin", "Cos", "Exp", "Sqrt", "parse_expr", "eval_jet", "to_source",
]

FUNCTIONS = ("sin", "cos", "exp", "sqrt")


@dataclass(frozen=True)
class Const:
    value: Union[Fraction, float]

    @property
    def children(self):
        return ()


@dataclass(frozen=True)
class Coord:
    index: int

    @property
    def children(self):
        return ()


def _unary(name):
    @dataclass(frozen=True)
    class Node:
        arg: "Expr"

        @property
        def children(self):
            return (self.arg,)

    Node.__name__ = Node.__qualname__ = name
    return Node


def _binary(name):
    @dataclass(frozen=True)
    class Node:
        left: "Expr"
        right: "Expr"

        @property
        def children(self):
            return (self.left, self.right)

    Node.__name__ = Node.__qualname__ = name
    return Node


Neg = _unary("Neg")
Sin = _unary("Sin")
Cos = _unary("Cos")
Exp = _unary("Exp")
Sqrt = _unary("Sqrt")
Add = _binary("Add")
Sub = _binary("Sub")
Mul = _binary("Mul")
Div = _binary("Div")


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int

    @property
    def children(self):
        return (self.base,)


Expr = Union[Const, Coord, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Sqrt]


# --------------------------------------------------------------------------
# Lexer
# --------------------------------------------------------------------------

_PUNCT = set("+-*/^()")


def _byte_offset(source, pos):
    return len(source[:pos].encode("utf-8"))


def _tokenize(source):
    """Yield (kind, text, byte_offset); kinds: num, ident, punct, end."""
    tokens = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        start = i
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            i += 1
            seen_dot = ch == "."
            while i < n and (source[i].isdigit() or (source[i] == "." and not seen_dot)):
                seen_dot = seen_dot or source[i] == "."
                i += 1
            tokens.append(("num", source[start:i], _byte_offset(source, start)))
        elif ch.isalpha() or ch == "_":
            i += 1
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            tokens.append(("ident", source[start:i], _byte_offset(source, start)))
        elif ch in _PUNCT:
            i += 1
            tokens.append(("punct", ch, _byte_offset(source, start)))
        else:
            raise ExprSyntaxError(f"unexpected character {ch!r}", _byte_offset(source, start))
    tokens.append(("end", "", _byte_offset(source, n)))
    return tokens


class _Parser:
    def __init__(self, tokens, coord_names):
        self.tokens = tokens
        self.pos = 0
        self.coords = {name: i for i, name in enumerate(coord_names)}

    @property
    def token(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_punct(self, ch):
        kind, text, off = self.token
        if kind != "punct" or text != ch:
            raise ExprSyntaxError(f"expected {ch!r}, found {text!r}", off)
        return self.advance()

    def parse(self):
        e = self.expr()
        kind, text, off = self.token
        if kind != "end":
            raise ExprSyntaxError(f"trailing input {text!r}", off)
        return e

    def expr(self):
        e = self.term()
        while self.token[:2] in (("punct", "+"), ("punct", "-")):
            op = self.advance()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.token[:2] in (("punct", "*"), ("punct", "/")):
            op = self.advance()[1]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self):
        if self.token[:2] == ("punct", "-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.token[:2] == ("punct", "^"):
            self.advance()
            return Pow(base, self.exponent())
        return base

    def exponent(self):
        sign = 1
        if self.token[:2] == ("punct", "-"):
            self.advance()
            sign = -1
        kind, text, off = self.token
        if kind != "num":
            raise ExprSyntaxError(f"expected integer exponent, found {text!r}", off)
        if "." in text:
            raise NonIntegerExponent(off)
        self.advance()
        return sign * int(text)

    def atom(self):
        kind, text, off = self.advance()
        if kind == "num":
            return Const(Fraction(text))
        if kind == "ident":
            if text in FUNCTIONS:
                self.expect_punct("(")
                arg = self.expr()
                self.expect_punct(")")
                return {"sin": Sin, "cos": Cos, "exp": Exp, "sqrt": Sqrt}[text](arg)
            if text not in self.coords:
                raise UnknownIdentifier(text, off)
            if self.token[:2] == ("punct", "("):
                raise ExprSyntaxError(f"coordinate {text!r} is not callable", self.token[2])
            return Coord(self.coords[text])
        if (kind, text) == ("punct", "("):
            e = self.expr()
            self.expect_punct(")")
            return e
        raise ExprSyntaxError(f"unexpected token {text!r}", off)


def parse_expr(source: str, coord_names) -> Expr:
    """Parse `source` into an AST; identifiers bind by position in `coord_names`."""
    names = list(coord_names)
    if len(set(names)) != len(names):
        raise DimensionMismatch("coordinate names must be distinct")
    return _Parser(_tokenize(source), names).parse()


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def eval_jet(e: Expr, coords, order: int) -> Jet:
    """Truncated Taylor expansion of `e` at the point `coords`, exact to rounding."""
    ctx = context(len(coords), order)
    return _eval(e, coords, ctx)


def _eval(e, coords, ctx):
    match e:
        case Const(value=v):
            return ctx.constant(float(v))
        case Coord(index=i):
            if i >= ctx.dim:
                raise DimensionMismatch(
                    f"expression uses coordinate {i} but the point has dim {ctx.dim}"
                )
            return ctx.coordinate(i, coords[i])
        case Neg(arg=a):
            return -_eval(a, coords, ctx)
        case Add(left=l, right=r):
            return _eval(l, coords, ctx) + _eval(r, coords, ctx)
        case Sub(left=l, right=r):
            return _eval(l, coords, ctx) - _eval(r, coords, ctx)
        case Mul(left=l, right=r):
            return _eval(l, coords, ctx) * _eval(r, coords, ctx)
        case Div(left=l, right=r):
            return _eval(l, coords, ctx) / _eval(r, coords, ctx)
        case Pow(base=b, exponent=n):
            return _eval(b, coords, ctx) ** n
        case Sin(arg=a):
            return _eval(a, coords, ctx).sin()
        case Cos(arg=a):
            return _eval(a, coords, ctx).cos()
        case Exp(arg=a):
            return _eval(a, coords, ctx).exp()
        case Sqrt(arg=a):
            return _eval(a, coords, ctx).sqrt()
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# Pretty-printing (inverse of the parser on its normal form)
# --------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _fmt_const(v):
    if isinstance(v, Fraction):
        sign = "-" if v < 0 else ""
        num, den = abs(v.numerator), v.denominator
        if den == 1:
            return f"{sign}{num}"
        # Exact decimal when the denominator is 2^a 5^b, else a quotient.
        d = den
        for p in (2, 5):
            while d % p == 0:
                d //= p
        if d == 1:
            scale = 1
            while 10 ** scale % den:
                scale += 1
            digits = num * 10 ** scale // den
            s = f"{digits:0{scale + 1}d}"
            return f"{sign}{s[:-scale]}.{s[-scale:]}"
        return f"{sign}({num}/{den})"
    return repr(v)


def to_source(e: Expr, coord_names=None) -> str:
    """Render an AST back to parseable source; see the round-trip invariant."""

    def name(i):
        return coord_names[i] if coord_names else f"x{i + 1}"

    def walk(node, parent_prec):
        match node:
            case Const(value=v):
                s, prec = _fmt_const(v), _PREC_ATOM
            case Coord(index=i):
                s, prec = name(i), _PREC_ATOM
            case Neg(arg=a):
                s, prec = "-" + walk(a, _PREC_UNARY), _PREC_UNARY
            case Add(left=l, right=r):
                s, prec = walk(l, _PREC_ADD) + " + " + walk(r, _PREC_ADD + 1), _PREC_ADD
            case Sub(left=l, right=r):
                s, prec = walk(l, _PREC_ADD) + " - " + walk(r, _PREC_ADD + 1), _PREC_ADD
            case Mul(left=l, right=r):
                s, prec = walk(l, _PREC_MUL) + "*" + walk(r, _PREC_MUL + 1), _PREC_MUL
            case Div(left=l, right=r):
                s, prec = walk(l, _PREC_MUL) + "/" + walk(r, _PREC_MUL + 1), _PREC_MUL
            case Pow(base=b, exponent=n):
                s, prec = walk(b, _PREC_ATOM) + "^" + str(n), _PREC_POW
            case Sin(arg=a):
                s, prec = "sin(" + walk(a, 0) + ")", _PREC_ATOM
            case Cos(arg=a):
                s, prec = "cos(" + walk(a, 0) + ")", _PREC_ATOM
            case Exp(arg=a):
                s, prec = "exp(" + walk(a, 0) + ")", _PREC_ATOM
            case Sqrt(arg=a):
                s, prec = "sqrt(" + walk(a, 0) + ")", _PREC_ATOM
            case _:
                raise TypeError(f"not an expression node: {node!r}")
        return "(" + s + ")" if prec < parent_prec else s

    return walk(e, 0)
