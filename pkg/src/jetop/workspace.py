"""Workspace files: one system plus named operators, coverings and claims.

A file is a sequence of lines; ``#`` starts a comment. Blocks::

    system NAME            op NAME = OPEXPR
      indep x y t          lax NAME = OPEXPR
      dep u                symmetry NAME = EXPR
      const a b            cosymmetry NAME = EXPR
      constraint EXPR
      eq EXPR [= EXPR]     nonlocal NAME ... end
      solve u[y,y]         ro NAME ... end
    end                    derive NAME ... end
                           ansatz NAME ... end

Names must be declared before they are used.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import symbols as S
from .covering import Covering, CoveringError, NonlocalVariable, covering_from_operators, define_nonlocal
from .dsl import ParseError, SymbolTable, eval_scalar, parse_ast, split_top
from .expr import Expression
from .jets import Context, InvalidOrientation, make_system
from .lax import AnsatzSpec, LaxPair, adjoint_lax
from .operators import TDOperator, eval_operator
from .recursion import ROSpec

CORPUS = ("pavlov", "heavenly", "mas", "fk6d", "abc", "universal")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


@dataclass
class OpDef:
    name: str
    op: TDOperator
    ast: object
    line: int


@dataclass
class NonlocalDef:
    name: str
    line: int
    rels: list = field(default_factory=list)  # (dir, ast, line)
    source: tuple | None = None  # (op names, adjoint?, solve dirs)


@dataclass
class RODef:
    name: str
    line: int
    A: tuple = ()
    B: tuple = ()
    L: tuple | None = None  # (ast, line)
    M: tuple | None = None
    solve_dirs: tuple | None = None
    mode: str = "direct"


@dataclass
class DeriveDef:
    name: str
    line: int
    phi: tuple | None = None
    dirs: list = field(default_factory=list)
    solve_dirs: tuple | None = None
    route: str = "annihilator"
    template: str | None = None
    expect: list = field(default_factory=list)


@dataclass
class Workspace:
    path: str | None
    table: SymbolTable
    system: object = None
    ops: dict = field(default_factory=dict)
    lax: list = field(default_factory=list)
    nonlocals: list = field(default_factory=list)
    covering: Covering | None = None
    ros: dict = field(default_factory=dict)
    symmetries: dict = field(default_factory=dict)  # name -> (Expression, mode, ast)
    derives: dict = field(default_factory=dict)
    ansatze: dict = field(default_factory=dict)

    def context(self, with_covering: bool = True) -> Context:
        if with_covering and self.covering is not None and self.covering.variables:
            return Context(self.system, self.covering)
        return Context(self.system)

    def lax_pair(self) -> LaxPair:
        if len(self.lax) != 2:
            raise ParseError(f"expected exactly two lax operators, found {len(self.lax)}")
        return LaxPair(tuple(d.op for d in self.lax), name=self.system.name)

    def operator(self, name: str) -> OpDef:
        for d in self.lax:
            if d.name == name:
                return d
        if name in self.ops:
            return self.ops[name]
        raise KeyError(name)

    def raw_operator(self, name: str) -> TDOperator:
        """Re-evaluate an operator from its syntax tree without reduction."""
        d = self.operator(name)
        return eval_operator(d.ast, self.table, Context.free(self.system.independents), d.line)

    def rospec(self, name: str | None = None, raw: bool = False) -> ROSpec:
        if not self.ros:
            raise KeyError("no ro block")
        r = self.ros[name] if name else next(iter(self.ros.values()))
        get = self.raw_operator if raw else (lambda n: self.operator(n).op)
        ctx = Context.free(self.system.independents) if raw else self.context()
        L = eval_operator(r.L[0], self.table, ctx, r.L[1]) if r.L else None
        M = eval_operator(r.M[0], self.table, ctx, r.M[1]) if r.M else None
        p, q = r.solve_dirs if r.solve_dirs else (None, None)
        return ROSpec(get(r.A[0]), get(r.A[1]), get(r.B[0]), get(r.B[1]), L, M, p, q, r.mode, r.name)


class _Lines:
    def __init__(self, text: str):
        self.items = []
        for n, raw in enumerate(text.splitlines(), 1):
            body = raw.split("#", 1)[0].rstrip()
            if body.strip():
                indent = len(body) - len(body.lstrip())
                self.items.append((n, indent + 1, body.strip()))
        self.pos = 0

    def next(self):
        if self.pos >= len(self.items):
            return None
        item = self.items[self.pos]
        self.pos += 1
        return item


def _words(body: str, col: int):
    """Split on whitespace, keeping 1-based columns."""
    return [(m.group(), col + m.start()) for m in re.finditer(r"\S+", body)]


def _rest(body: str, col: int, keyword: str):
    """Text after a leading keyword and its column."""
    k = len(keyword)
    tail = body[k:]
    lead = len(tail) - len(tail.lstrip())
    return tail.strip(), col + k + lead


def _ident(word, line):
    w, c = word
    if not _NAME.match(w):
        raise ParseError(f"invalid name {w!r}", line, c)
    return w


def _assignment(body: str, col: int, keyword: str, line: int):
    text, c = _rest(body, col, keyword)
    if "=" not in text:
        raise ParseError(f"expected '{keyword} NAME = ...'", line, c)
    name, expr = text.split("=", 1)
    name = name.strip()
    if not _NAME.match(name):
        raise ParseError(f"invalid name {name!r}", line, c)
    off = text.index("=") + 1
    lead = len(expr) - len(expr.lstrip())
    return name, expr.strip(), c + off + lead


def _expr(text, col, line, table):
    return eval_scalar(parse_ast(text, line, col), table, line)


def _equation(text, col, line, table):
    parts = split_top(text, "=")
    if len(parts) > 2:
        raise ParseError("more than one '=' in equation", line, col)
    lhs = _expr(parts[0][0].strip() or "0", col + parts[0][1], line, table)
    if len(parts) == 1:
        return lhs
    piece, off = parts[1]
    lead = len(piece) - len(piece.lstrip())
    return lhs - _expr(piece.strip(), col + off + lead, line, table)


def _block(lines: _Lines, start_line: int, kind: str):
    out = []
    while True:
        item = lines.next()
        if item is None:
            raise ParseError(f"{kind} block opened here is not closed with 'end'", start_line, 1)
        if item[2] == "end":
            return out
        out.append(item)


def _check_dirs(words, table, line, n=None):
    dirs = []
    for w, c in words:
        if w not in table.independents:
            raise ParseError(f"{w!r} is not an independent variable", line, c)
        dirs.append(w)
    if n is not None and len(dirs) != n:
        raise ParseError(f"expected {n} directions", line, words[0][1] if words else 1)
    return tuple(dirs)


def parse_workspace(text: str, path: str | None = None) -> Workspace:
    lines = _Lines(text)
    table = SymbolTable()
    ws = Workspace(path, table)
    item = lines.next()
    if item is None or not item[2].startswith("system"):
        raise ParseError("file must start with a system block", item[0] if item else 1, 1)
    _parse_system(ws, lines, item)
    ws.covering = Covering(ws.system)
    while (item := lines.next()) is not None:
        n, col, body = item
        kw = body.split()[0]
        if kw == "op" or kw == "lax":
            name, expr, c = _assignment(body, col, kw, n)
            _fresh(ws, name, n, col)
            ast = parse_ast(expr, n, c)
            d = OpDef(name, eval_operator(ast, table, ws.context(), n), ast, n)
            (ws.lax.append(d) if kw == "lax" else ws.ops.__setitem__(name, d))
        elif kw in ("symmetry", "cosymmetry"):
            name, expr, c = _assignment(body, col, kw, n)
            ast = parse_ast(expr, n, c)
            ws.symmetries[name] = (eval_scalar(ast, table, n), kw, expr)
        elif kw == "nonlocal":
            _parse_nonlocal(ws, lines, item)
        elif kw == "ro":
            _parse_ro(ws, lines, item)
        elif kw == "derive":
            _parse_derive(ws, lines, item)
        elif kw == "ansatz":
            _parse_ansatz(ws, lines, item)
        elif kw == "system":
            raise ParseError("only one system per file", n, col)
        else:
            raise ParseError(f"unknown keyword {kw!r}", n, col)
    return ws


def _fresh(ws, name, line, col):
    if name in ws.ops or any(d.name == name for d in ws.lax):
        raise ParseError(f"operator {name!r} defined twice", line, col)


def _parse_system(ws: Workspace, lines: _Lines, head):
    n0, col0, body = head
    words = _words(body, col0)
    if len(words) != 2:
        raise ParseError("expected 'system NAME'", n0, col0)
    name = _ident(words[1], n0)
    table = ws.table
    eqs, leads, cons, where = [], [], [], []
    for n, col, body in _block(lines, n0, "system"):
        kw = body.split()[0]
        words = _words(body, col)[1:]
        if kw in ("indep", "dep", "const"):
            kind = {"indep": S.Kind.INDEP, "dep": S.Kind.JET, "const": S.Kind.CONST}[kw]
            for w in words:
                _ident(w, n)
                try:
                    table.declare(w[0], kind)
                except ValueError as exc:
                    raise ParseError(str(exc), n, w[1]) from None
        elif kw == "eq":
            text, c = _rest(body, col, kw)
            eqs.append(_equation(text, c, n, table))
        elif kw == "constraint":
            text, c = _rest(body, col, kw)
            cons.append(_equation(text, c, n, table))
        elif kw == "solve":
            text, c = _rest(body, col, kw)
            e = _expr(text, c, n, table)
            vs = e.free_vars()
            if len(vs) != 1 or vs[0].kind != S.Kind.JET or e != Expression.var(vs[0]):
                raise ParseError("solve expects a single jet coordinate", n, c)
            leads.append(vs[0])
            where.append((vs[0].text(), n, c))
        else:
            raise ParseError(f"unknown keyword {kw!r} in system block", n, col)
    if not table.independents or not table.dependents:
        raise ParseError("system needs indep and dep declarations", n0, col0)
    if not eqs:
        raise ParseError("system has no equations", n0, col0)
    try:
        ws.system = make_system(name, table, eqs, leads, cons)
    except InvalidOrientation as exc:
        msg = str(exc)
        n, c = next(((n, c) for t, n, c in where if msg.startswith(t + " ")), where[0][1:] if where else (n0, col0))
        raise ParseError(f"invalid orientation: {msg}", n, c) from None


def _parse_nonlocal(ws: Workspace, lines: _Lines, head):
    n0, col0, body = head
    words = _words(body, col0)
    if len(words) != 2:
        raise ParseError("expected 'nonlocal NAME'", n0, col0)
    name = _ident(words[1], n0)
    try:
        ws.table.declare(name, S.Kind.NONLOCAL)
    except ValueError as exc:
        raise ParseError(str(exc), n0, words[1][1]) from None
    nd = NonlocalDef(name, n0)
    for n, col, body in _block(lines, n0, "nonlocal"):
        kw = body.split()[0]
        if kw == "rel":
            text, c = _rest(body, col, kw)
            m = re.match(r"(\w+)\s*:\s*", text)
            if not m:
                raise ParseError("expected 'rel DIR: EXPR'", n, c)
            d = m.group(1)
            if d not in ws.table.independents:
                raise ParseError(f"{d!r} is not an independent variable", n, c)
            if any(d == d0 for d0, _, _ in nd.rels):
                raise ParseError(f"relation direction {d} duplicated for {name}", n, c)
            ast = parse_ast(text[m.end():], n, c + m.end())
            nd.rels.append((d, ast, n))
        elif kw == "from":
            w = _words(body, col)[1:]
            toks = [x for x, _ in w]
            if "solve" not in toks:
                raise ParseError("expected 'from OP OP [adjoint] solve DIR DIR'", n, col)
            k = toks.index("solve")
            adj = "adjoint" in toks[:k]
            names = [t for t in w[:k] if t[0] != "adjoint"]
            for t, c in names:
                try:
                    ws.operator(t)
                except KeyError:
                    raise ParseError(f"unknown operator {t!r}", n, c) from None
            dirs = _check_dirs(w[k + 1:], ws.table, n, len(names))
            nd.source = ([t for t, _ in names], adj, dirs)
        else:
            raise ParseError(f"unknown keyword {kw!r} in nonlocal block", n, col)
    if bool(nd.rels) == bool(nd.source):
        raise ParseError("nonlocal block needs either rel lines or one from line", n0, col0)
    ctx = ws.context()
    try:
        if nd.source:
            names, adj, dirs = nd.source
            lp = LaxPair(tuple(ws.operator(t).op for t in names))
            if adj:
                lp = adjoint_lax(lp, ctx)
            ws.covering = covering_from_operators(ws.covering, name, list(lp.ops), list(dirs), ctx)
        else:
            rels = [(d, eval_scalar(ast, ws.table, ln)) for d, ast, ln in nd.rels]
            ws.covering = define_nonlocal(ws.covering, NonlocalVariable(name, {}), rels)
    except CoveringError as exc:
        raise ParseError(str(exc), n0, col0) from None
    ws.nonlocals.append(nd)


def _op_ref(ws, w, line):
    try:
        ws.operator(w[0])
    except KeyError:
        raise ParseError(f"unknown operator {w[0]!r}", line, w[1]) from None
    return w[0]


def _parse_ro(ws: Workspace, lines: _Lines, head):
    n0, col0, body = head
    words = _words(body, col0)
    if len(words) != 2:
        raise ParseError("expected 'ro NAME'", n0, col0)
    r = RODef(_ident(words[1], n0), n0)
    for n, col, body in _block(lines, n0, "ro"):
        kw = body.split()[0]
        w = _words(body, col)[1:]
        if kw in ("A", "B"):
            if len(w) != 2:
                raise ParseError(f"expected '{kw} NAME NAME'", n, col)
            setattr(r, kw, tuple(_op_ref(ws, x, n) for x in w))
        elif kw in ("L", "M"):
            text, c = _rest(body, col, kw)
            ast = parse_ast(text, n, c)
            eval_operator(ast, ws.table, ws.context(), n)
            setattr(r, kw, (ast, n))
        elif kw == "solve_dirs":
            r.solve_dirs = _check_dirs(w, ws.table, n, 2)
        elif kw == "mode":
            if len(w) != 1 or w[0][0] not in ("direct", "adjoint"):
                raise ParseError("mode must be 'direct' or 'adjoint'", n, col)
            r.mode = w[0][0]
        else:
            raise ParseError(f"unknown keyword {kw!r} in ro block", n, col)
    if not r.A or not r.B:
        raise ParseError("ro block needs A and B lines", n0, col0)
    ws.ros[r.name] = r


def _parse_derive(ws: Workspace, lines: _Lines, head):
    n0, col0, body = head
    words = _words(body, col0)
    if len(words) != 2:
        raise ParseError("expected 'derive NAME'", n0, col0)
    d = DeriveDef(_ident(words[1], n0), n0)
    for n, col, body in _block(lines, n0, "derive"):
        kw = body.split()[0]
        w = _words(body, col)[1:]
        if kw == "phi":
            text, c = _rest(body, col, kw)
            eval_scalar(parse_ast(text, n, c), ws.table, n)
            d.phi = (text, c, n)
        elif kw == "dirs":
            d.dirs.append(_check_dirs(w, ws.table, n))
        elif kw == "solve_dirs":
            d.solve_dirs = _check_dirs(w, ws.table, n, 2)
        elif kw == "route":
            if len(w) != 1 or w[0][0] not in ("annihilator", "ad"):
                raise ParseError("route must be 'annihilator' or 'ad'", n, col)
            d.route = w[0][0]
        elif kw == "template":
            d.template = _check_dirs(w, ws.table, n, 1)[0]
        elif kw == "expect":
            text, c = _rest(body, col, kw)
            m = re.match(r"(\w+)\s*:\s*", text)
            if not m or m.group(1) not in ws.table.independents:
                raise ParseError("expected 'expect DIR: EXPR'", n, c)
            d.expect.append((m.group(1), text[m.end():], c + m.end(), n))
        else:
            raise ParseError(f"unknown keyword {kw!r} in derive block", n, col)
    if d.route == "annihilator" and len(d.dirs) != 2:
        raise ParseError("annihilator route needs two dirs lines", n0, col0)
    ws.derives[d.name] = d


def _parse_ansatz(ws: Workspace, lines: _Lines, head):
    n0, col0, body = head
    words = _words(body, col0)
    if len(words) != 2:
        raise ParseError("expected 'ansatz NAME'", n0, col0)
    spec = AnsatzSpec("psi1", [])
    for n, col, body in _block(lines, n0, "ansatz"):
        kw = body.split()[0]
        text, c = _rest(body, col, kw)
        if kw == "form":
            if text not in ("psi1", "psi2", "psi3", "reciprocal"):
                raise ParseError(f"unknown ansatz form {text!r}", n, c)
            spec.form = text
        elif kw == "basis":
            spec.basis = [eval_scalar(parse_ast(p.strip(), n, c + off), ws.table, n) for p, off in split_top(text)]
        elif kw == "order":
            if not text.isdigit():
                raise ParseError("order must be a nonnegative integer", n, c)
            spec.order = int(text)
        elif kw == "nonlocal":
            for w, cc in _words(text, c):
                if w not in ws.table.nonlocals:
                    raise ParseError(f"unknown nonlocal {w!r}", n, cc)
                spec.nonlocal_.append(w)
        elif kw == "reciprocal":
            if text not in ("on", "off"):
                raise ParseError("reciprocal must be 'on' or 'off'", n, c)
            spec.reciprocal = text == "on"
        else:
            raise ParseError(f"unknown keyword {kw!r} in ansatz block", n, col)
    ws.ansatze[words[1][0]] = spec


# files and corpus ------------------------------------------------------------


def corpus_path(name: str):
    if name not in CORPUS:
        raise KeyError(f"unknown corpus entry {name!r}; available: {', '.join(CORPUS)}")
    return resources.files("jetop") / "corpus" / f"{name}.its"


def load_corpus(name: str) -> Workspace:
    p = corpus_path(name)
    return parse_workspace(p.read_text(), f"corpus/{name}.its")


def resolve_path(path: str):
    """``corpus/NAME.its`` falls back to the bundled file when absent on disk."""
    p = Path(path)
    if p.exists():
        return p
    m = re.fullmatch(r"corpus/(\w+)\.its", path)
    if m:
        bundled = resources.files("jetop") / "corpus" / f"{m.group(1)}.its"
        if bundled.is_file():
            return bundled
    raise FileNotFoundError(path)


def load(path: str) -> Workspace:
    p = resolve_path(path)
    return parse_workspace(p.read_text(), str(path))
