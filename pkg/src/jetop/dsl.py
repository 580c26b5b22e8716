"""Expression and operator sub-grammar of the workspace DSL.

::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | "+" unary | power
    power  := atom ("^" int)?
    atom   := NUMBER | NAME | NAME "[" NAME ("," NAME)* "]"
            | "D" "[" NAME ("," NAME)* "]" | "(" expr ")"
            | "[" "[" expr ("," expr)* "]" ("," "[" ... "]")* "]"

``**`` is accepted as a synonym for ``^``. Parsing yields a small AST that is
evaluated either to an :class:`~jetop.expr.Expression` or, when total
derivative atoms ``D[..]`` or matrices occur, to an operator.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from gmpy2 import mpq

from . import symbols as S
from .expr import Expression


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.line = line
        self.col = col


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^()\[\],]))"
)


@dataclass
class Tok:
    kind: str
    text: str
    col: int


def tokenize(text: str, line: int = 1, col0: int = 1) -> list[Tok]:
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        kind = m.lastgroup
        tok = m.group(kind)
        out.append(Tok(kind, "^" if tok == "**" else tok, col0 + m.start(kind)))
        pos = m.end()
    out.append(Tok("end", "", col0 + n))
    return out


# AST ---------------------------------------------------------------------


@dataclass
class Node:
    col: int


@dataclass
class Num(Node):
    value: object


@dataclass
class Name(Node):
    name: str


@dataclass
class Jet(Node):
    name: str
    index: list[tuple[str, int]]


@dataclass
class Deriv(Node):
    dirs: list[tuple[str, int]]


@dataclass
class Bin(Node):
    op: str
    left: Node
    right: Node


@dataclass
class Neg(Node):
    arg: Node


@dataclass
class Pow(Node):
    base: Node
    exp: int


@dataclass
class Matrix(Node):
    rows: list[list[Node]]


class _Parser:
    def __init__(self, text: str, line: int, col0: int):
        self.toks = tokenize(text, line, col0)
        self.i = 0
        self.line = line

    @property
    def cur(self) -> Tok:
        return self.toks[self.i]

    def err(self, msg: str, tok: Tok | None = None):
        tok = tok or self.cur
        raise ParseError(msg, self.line, tok.col)

    def eat(self, text: str) -> Tok:
        if self.cur.text != text or self.cur.kind == "end":
            self.err(f"expected {text!r}, found {self.cur.text or 'end of input'!r}")
        t = self.cur
        self.i += 1
        return t

    def parse(self) -> Node:
        node = self.expr()
        if self.cur.kind != "end":
            self.err(f"unexpected {self.cur.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.cur.text in ("+", "-") and self.cur.kind == "op":
            t = self.cur
            self.i += 1
            node = Bin(t.col, t.text, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.cur.text in ("*", "/") and self.cur.kind == "op":
            t = self.cur
            self.i += 1
            node = Bin(t.col, t.text, node, self.unary())
        return node

    def unary(self) -> Node:
        t = self.cur
        if t.text == "-" and t.kind == "op":
            self.i += 1
            return Neg(t.col, self.unary())
        if t.text == "+" and t.kind == "op":
            self.i += 1
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.cur.text == "^":
            t = self.cur
            self.i += 1
            base = Pow(t.col, base, self.integer())
        return base

    def integer(self) -> int:
        sign = 1
        paren = False
        if self.cur.text == "(":
            paren = True
            self.i += 1
        while self.cur.text in ("-", "+"):
            if self.cur.text == "-":
                sign = -sign
            self.i += 1
        t = self.cur
        if t.kind != "num" or "." in t.text:
            self.err("exponent must be an integer")
        self.i += 1
        if paren:
            if self.cur.text != ")":
                self.err("exponent must be an integer")
            self.i += 1
        return sign * int(t.text)

    def names(self) -> list[tuple[str, int]]:
        self.eat("[")
        out = []
        while True:
            t = self.cur
            if t.kind != "name":
                self.err("expected a variable name in index")
            out.append((t.text, t.col))
            self.i += 1
            if self.cur.text == ",":
                self.i += 1
                continue
            self.eat("]")
            return out

    def atom(self) -> Node:
        t = self.cur
        if t.kind == "num":
            self.i += 1
            if "." in t.text:
                a, b = t.text.split(".")
                return Num(t.col, mpq(int(a + b), 10 ** len(b)))
            return Num(t.col, mpq(int(t.text)))
        if t.kind == "name":
            self.i += 1
            if self.cur.text == "[":
                idx = self.names()
                if t.text == "D":
                    return Deriv(t.col, idx)
                return Jet(t.col, t.text, idx)
            if t.text == "D":
                self.err("total derivative needs a direction, e.g. D[x]", t)
            return Name(t.col, t.text)
        if t.text == "(":
            self.i += 1
            node = self.expr()
            self.eat(")")
            return node
        if t.text == "[":
            return self.matrix()
        self.err(f"unexpected {t.text or 'end of input'!r}")

    def matrix(self) -> Node:
        start = self.eat("[")
        rows = []
        while True:
            self.eat("[")
            row = [self.expr()]
            while self.cur.text == ",":
                self.i += 1
                row.append(self.expr())
            self.eat("]")
            rows.append(row)
            if self.cur.text == ",":
                self.i += 1
                continue
            self.eat("]")
            break
        if len({len(r) for r in rows}) != 1:
            raise ParseError("ragged matrix rows", self.line, start.col)
        return Matrix(start.col, rows)


def parse_ast(text: str, line: int = 1, col0: int = 1) -> Node:
    return _Parser(text, line, col0).parse()


def uses_operators(node: Node) -> bool:
    if isinstance(node, (Deriv, Matrix)):
        return True
    if isinstance(node, Bin):
        return uses_operators(node.left) or uses_operators(node.right)
    if isinstance(node, Neg):
        return uses_operators(node.arg)
    if isinstance(node, Pow):
        return uses_operators(node.base)
    return False


# symbols -------------------------------------------------------------------


@dataclass
class SymbolTable:
    """Declared names of a workspace, in declaration order."""

    independents: list[str] = field(default_factory=list)
    dependents: list[str] = field(default_factory=list)
    constants: list[str] = field(default_factory=list)
    nonlocals: list[str] = field(default_factory=list)

    @classmethod
    def simple(cls, indep="x y z t", dep="u", const="", nonlocal_="") -> "SymbolTable":
        return cls(indep.split(), dep.split(), const.split(), nonlocal_.split())

    def kind_of(self, name: str):
        if name == S.SPECTRAL_NAME:
            return S.Kind.SPECTRAL
        if name in self.independents:
            return S.Kind.INDEP
        if name in self.constants:
            return S.Kind.CONST
        if name in self.dependents:
            return S.Kind.JET
        if name in self.nonlocals:
            return S.Kind.NONLOCAL
        return None

    def declare(self, name: str, kind: S.Kind):
        if name in ("D", S.SPECTRAL_NAME):
            raise ValueError(f"{name!r} is reserved")
        if self.kind_of(name) is not None:
            raise ValueError(f"symbol {name!r} declared twice")
        {
            S.Kind.INDEP: self.independents,
            S.Kind.CONST: self.constants,
            S.Kind.JET: self.dependents,
            S.Kind.NONLOCAL: self.nonlocals,
        }[kind].append(name)

    def resolve(self, name: str, index=(), line: int = 1, col: int = 1) -> S.Var:
        kind = self.kind_of(name)
        if kind is None:
            raise ParseError(f"unknown symbol {name!r}", line, col)
        if index:
            if kind not in (S.Kind.JET, S.Kind.NONLOCAL):
                raise ParseError(f"derivative index on non-dependent symbol {name!r}", line, col)
            for d, c in index:
                if d not in self.independents:
                    raise ParseError(f"{d!r} is not an independent variable", line, c)
            return S.jet(name, [d for d, _ in index], nonlocal_=kind == S.Kind.NONLOCAL)
        if kind == S.Kind.INDEP:
            return S.indep(name)
        if kind == S.Kind.CONST:
            return S.const(name)
        if kind == S.Kind.SPECTRAL:
            return S.spectral()
        return S.jet(name, (), nonlocal_=kind == S.Kind.NONLOCAL)


def eval_scalar(node: Node, table: SymbolTable, line: int = 1) -> Expression:
    if isinstance(node, Num):
        return Expression.const(node.value)
    if isinstance(node, Name):
        return Expression.var(table.resolve(node.name, (), line, node.col))
    if isinstance(node, Jet):
        return Expression.var(table.resolve(node.name, node.index, line, node.col))
    if isinstance(node, Neg):
        return -eval_scalar(node.arg, table, line)
    if isinstance(node, Pow):
        base = eval_scalar(node.base, table, line)
        if node.exp < 0 and base.is_zero():
            raise ParseError("division by zero", line, node.col)
        return base ** node.exp
    if isinstance(node, Bin):
        a = eval_scalar(node.left, table, line)
        b = eval_scalar(node.right, table, line)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b.is_zero():
            raise ParseError("division by zero", line, node.col)
        return a / b
    if isinstance(node, (Deriv, Matrix)):
        raise ParseError("operator syntax in a scalar expression", line, node.col)
    raise TypeError(node)


def parse(text: str, table: SymbolTable | None = None, line: int = 1, col0: int = 1) -> Expression:
    """Parse a scalar DSL expression into canonical form."""
    table = table or SymbolTable.simple()
    return eval_scalar(parse_ast(text, line, col0), table, line)


def split_top(text: str, sep: str = ",") -> list[tuple[str, int]]:
    """Split at ``sep`` outside brackets; returns ``(piece, offset)`` pairs."""
    out = []
    depth = 0
    start = 0
    for i, ch in enumerate(text):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch == sep and depth == 0:
            out.append((text[start:i], start))
            start = i + 1
    out.append((text[start:], start))
    return out
