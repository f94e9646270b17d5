"""Polynomial expressions over named coordinates.

Grammar, loosest binding first::

    expr    := term (("+" | "-") term)*
    term    := unary ("*" unary)*
    unary   := "-" unary | power
    power   := atom ("^" INTEGER)?
    atom    := NUMBER | IDENT | "(" expr ")"
    NUMBER  := INTEGER | INTEGER "/" INTEGER

so ``-x1^2`` is ``-(x1^2)``.  There is no division operator; ``p/q`` is a
rational literal.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from gmpy2 import mpq

from .jetring import Jet

__all__ = ["ParseError", "Num", "Var", "Neg", "Add", "Sub", "Mul", "Pow",
           "parse_expression", "lower", "parse_jet"]


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}")


@dataclass(frozen=True)
class Num:
    value: object

    def __repr__(self):
        return f"Num({self.value})"


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Add:
    left: object
    right: object


@dataclass(frozen=True)
class Sub:
    left: object
    right: object


@dataclass(frozen=True)
class Mul:
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>\d+(?:\s*/\s*\d*)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*^()])
  | (?P<bad>.)
""", re.VERBOSE)


def _position(src: str, offset: int) -> tuple[int, int]:
    line = src.count("\n", 0, offset) + 1
    col = offset - (src.rfind("\n", 0, offset) + 1) + 1
    return line, col


def _tokenize(src: str):
    toks = []
    for m in _TOKEN.finditer(src):
        kind = m.lastgroup
        text = m.group()
        if kind == "ws":
            continue
        line, col = _position(src, m.start())
        if kind == "bad":
            raise ParseError(f"unexpected character {text!r}", line, col)
        if kind == "num":
            if "/" in text:
                p, q = (s.strip() for s in text.split("/"))
                if not q or int(q) == 0:
                    raise ParseError(f"malformed literal {text!r}", line, col)
                value = mpq(int(p), int(q))
            else:
                value = mpq(int(text))
            toks.append(("num", value, line, col))
        else:
            toks.append((kind, text, line, col))
    end = _position(src, len(src))
    toks.append(("eof", None, *end))
    return toks


class _Parser:
    def __init__(self, src: str, coords: Sequence[str] | None):
        self.toks = _tokenize(src)
        self.pos = 0
        self.coords = None if coords is None else set(coords)

    def peek(self):
        return self.toks[self.pos]

    def take(self):
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, tok[2], tok[3])

    def parse(self):
        if self.peek()[0] == "eof":
            self.fail("empty expression")
        node = self.expr()
        if self.peek()[0] != "eof":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            node = Mul(node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.peek()
            if tok[0] != "num" or tok[1].denominator != 1:
                self.fail("exponent must be a non-negative integer", tok)
            self.take()
            return Pow(base, int(tok[1]))
        return base

    def atom(self):
        tok = self.take()
        kind, value = tok[0], tok[1]
        if kind == "num":
            return Num(value)
        if kind == "ident":
            if self.coords is not None and value not in self.coords:
                raise ParseError(f"unknown identifier {value!r}", tok[2], tok[3])
            return Var(value)
        if kind == "op" and value == "(":
            node = self.expr()
            if self.peek()[0] != "op" or self.peek()[1] != ")":
                self.fail("expected ')'")
            self.take()
            return node
        if kind == "eof":
            raise ParseError("unexpected end of expression", tok[2], tok[3])
        raise ParseError(f"unexpected token {value!r}", tok[2], tok[3])


def parse_expression(src: str, coords: Sequence[str] | None = None):
    """Parse ``src``; identifiers must be among ``coords`` when given."""
    return _Parser(src, coords).parse()


def lower(node, coords: Sequence[str], order: int) -> Jet:
    """Evaluate an AST to a jet in ``len(coords)`` variables."""
    n = len(coords)
    index = {c: k for k, c in enumerate(coords)}

    def go(x):
        if isinstance(x, Num):
            return Jet.constant(x.value, n, order)
        if isinstance(x, Var):
            return Jet.variable(index[x.name], n, order)
        if isinstance(x, Neg):
            return -go(x.operand)
        if isinstance(x, Add):
            return go(x.left) + go(x.right)
        if isinstance(x, Sub):
            return go(x.left) - go(x.right)
        if isinstance(x, Mul):
            return go(x.left) * go(x.right)
        if isinstance(x, Pow):
            return go(x.base) ** x.exponent
        raise TypeError(f"not an expression node: {x!r}")

    return go(node)


def parse_jet(src: str, coords: Sequence[str], order: int) -> Jet:
    return lower(parse_expression(src, coords), coords, order)
