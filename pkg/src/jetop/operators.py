"""Matrix-coefficient operators in total derivatives.

An operator is stored fully expanded as ``sum_alpha Q_alpha D^alpha`` where
``alpha`` is a multi-index of counts over the context's independent variables
and ``Q_alpha`` is a ``rows x cols`` matrix of expressions. Coefficients sit
to the left of the derivatives.

Every operation that needs total derivatives takes a context object providing
``indeps``, ``D(expr, direction)`` and ``Dpow(expr, counts)``; see
:mod:`jetop.jets`.
"""

from __future__ import annotations

from itertools import product
from math import comb

from . import dsl
from .expr import ONE, ZERO, Expression, as_expression, esum
from .symbols import spectral


class DimensionError(ValueError):
    pass


Matrix = tuple  # tuple of tuples of Expression


def _zero_matrix(r: int, c: int) -> Matrix:
    return tuple(tuple(ZERO for _ in range(c)) for _ in range(r))


def _is_zero_matrix(m: Matrix) -> bool:
    return all(e.is_zero() for row in m for e in row)


def _madd(a: Matrix, b: Matrix) -> Matrix:
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def _msum(ms) -> Matrix:
    if len(ms) == 1:
        return ms[0]
    r, c = len(ms[0]), len(ms[0][0])
    return tuple(tuple(esum(m[i][j] for m in ms) for j in range(c)) for i in range(r))


def _mmul(a: Matrix, b: Matrix) -> Matrix:
    cols = len(b[0])
    out = []
    for row in a:
        new = []
        for j in range(cols):
            new.append(esum(x * b[k][j] for k, x in enumerate(row)
                            if not x.is_zero() and not b[k][j].is_zero()))
        out.append(tuple(new))
    return tuple(out)


def _mscale(m: Matrix, s: Expression) -> Matrix:
    return tuple(tuple(s * e for e in row) for row in m)


def _transpose(m: Matrix) -> Matrix:
    return tuple(zip(*m)) if m else m


def _sub_multi(alpha: tuple) -> list[tuple]:
    return list(product(*(range(a + 1) for a in alpha)))


def _multi_binom(alpha, gamma) -> int:
    r = 1
    for a, g in zip(alpha, gamma):
        r *= comb(a, g)
    return r


class TDOperator:
    __slots__ = ("indeps", "rows", "cols", "terms")

    def __init__(self, indeps, rows: int, cols: int, terms: dict | None = None):
        self.indeps = tuple(indeps)
        self.rows = rows
        self.cols = cols
        clean = {}
        for k, m in (terms or {}).items():
            if not _is_zero_matrix(m):
                clean[tuple(k)] = tuple(tuple(as_expression(e) for e in row) for row in m)
        self.terms = clean

    # constructors ---------------------------------------------------------
    @classmethod
    def zero(cls, indeps, rows=1, cols=1) -> "TDOperator":
        return cls(indeps, rows, cols)

    @classmethod
    def identity(cls, indeps, n=1) -> "TDOperator":
        m = tuple(tuple(ONE if i == j else ZERO for j in range(n)) for i in range(n))
        return cls(indeps, n, n, {(0,) * len(tuple(indeps)): m})

    @classmethod
    def scalar(cls, indeps, e, n=1) -> "TDOperator":
        e = as_expression(e)
        m = tuple(tuple(e if i == j else ZERO for j in range(n)) for i in range(n))
        return cls(indeps, n, n, {(0,) * len(tuple(indeps)): m})

    @classmethod
    def matrix(cls, indeps, entries) -> "TDOperator":
        rows = [tuple(as_expression(e) for e in r) for r in entries]
        return cls(indeps, len(rows), len(rows[0]), {(0,) * len(tuple(indeps)): tuple(rows)})

    @classmethod
    def D(cls, indeps, *dirs, n=1) -> "TDOperator":
        indeps = tuple(indeps)
        alpha = [0] * len(indeps)
        for d in dirs:
            alpha[indeps.index(d)] += 1
        m = tuple(tuple(ONE if i == j else ZERO for j in range(n)) for i in range(n))
        return cls(indeps, n, n, {tuple(alpha): m})

    @classmethod
    def first_order(cls, indeps, coeffs: dict, zero_order=None) -> "TDOperator":
        """Scalar operator ``zero_order + sum coeffs[d] D_d``."""
        op = cls(indeps, 1, 1)
        for d, c in coeffs.items():
            op = op + cls.D(indeps, d).left(c)
        if zero_order is not None:
            op = op + cls.scalar(indeps, zero_order)
        return op

    # structure ------------------------------------------------------------
    @property
    def order(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TDOperator)
            and self.indeps == other.indeps
            and (self.rows, self.cols) == (other.rows, other.cols)
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.indeps, self.rows, self.cols, frozenset(self.terms.items())))

    def counts(self, *dirs) -> tuple:
        alpha = [0] * len(self.indeps)
        for d in dirs:
            alpha[self.indeps.index(d)] += 1
        return tuple(alpha)

    def coeff(self, *dirs) -> Matrix:
        return self.terms.get(self.counts(*dirs), _zero_matrix(self.rows, self.cols))

    def scalar_coeff(self, *dirs) -> Expression:
        return self.coeff(*dirs)[0][0]

    def zero_order(self) -> Matrix:
        return self.coeff()

    def first_order_coeffs(self) -> dict:
        """``{direction: matrix}`` of the first-order part."""
        out = {}
        for k, m in self.terms.items():
            if sum(k) == 1:
                out[self.indeps[k.index(1)]] = m
        return out

    def map(self, f) -> "TDOperator":
        return TDOperator(
            self.indeps, self.rows, self.cols,
            {k: tuple(tuple(f(e) for e in row) for row in m) for k, m in self.terms.items()},
        )

    def normal_form(self, ctx) -> "TDOperator":
        return self.map(ctx.nf)

    def transpose(self) -> "TDOperator":
        return TDOperator(self.indeps, self.cols, self.rows, {k: _transpose(m) for k, m in self.terms.items()})

    # linear structure ----------------------------------------------------
    def _check_same(self, other):
        if self.indeps != other.indeps:
            raise DimensionError("operators over different independent variables")
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise DimensionError(f"shape {self.rows}x{self.cols} vs {other.rows}x{other.cols}")

    def __add__(self, other: "TDOperator") -> "TDOperator":
        self._check_same(other)
        t = dict(self.terms)
        for k, m in other.terms.items():
            t[k] = _madd(t[k], m) if k in t else m
        return TDOperator(self.indeps, self.rows, self.cols, t)

    def __neg__(self) -> "TDOperator":
        return self.map(lambda e: -e)

    def __sub__(self, other: "TDOperator") -> "TDOperator":
        return self + (-other)

    def left(self, s) -> "TDOperator":
        """Left multiplication by a scalar function."""
        s = as_expression(s)
        return self.map(lambda e: s * e)

    def left_matrix(self, m: Matrix) -> "TDOperator":
        return TDOperator(self.indeps, len(m), self.cols, {k: _mmul(m, c) for k, c in self.terms.items()})

    # algebra -------------------------------------------------------------
    def compose(self, other: "TDOperator", ctx) -> "TDOperator":
        return compose(self, other, ctx)

    def apply(self, v, ctx) -> list[Expression]:
        return apply_to(self, v, ctx)

    def lambda_degree(self) -> int:
        lam = spectral()
        deg = 0
        for m in self.terms.values():
            for row in m:
                for e in row:
                    for f, _ in e.den:
                        if lam.id in f.vars():
                            raise ValueError("spectral parameter in a denominator")
                    deg = max(deg, e.degree(lam))
        return deg

    def lambda_coeff(self, k: int) -> "TDOperator":
        lam = spectral()
        return self.map(lambda e: e.coefficients(lam).get(k, ZERO))

    def to_text(self) -> str:
        return op_text(self)

    __str__ = to_text

    def __repr__(self) -> str:
        return f"TDOperator({self.to_text()!r})"


def compose(P: TDOperator, Q: TDOperator, ctx) -> TDOperator:
    """``P o Q`` expanded by the Leibniz rule."""
    if P.cols != Q.rows:
        raise DimensionError(f"cannot compose {P.rows}x{P.cols} with {Q.rows}x{Q.cols}")
    if P.indeps != Q.indeps:
        raise DimensionError("operators over different independent variables")
    out: dict = {}
    for alpha, pm in P.terms.items():
        subs = _sub_multi(alpha)
        for beta, qm in Q.terms.items():
            for gamma in subs:
                if any(gamma):
                    dq = tuple(tuple(ctx.Dpow(e, gamma) for e in row) for row in qm)
                    if _is_zero_matrix(dq):
                        continue
                else:
                    dq = qm
                c = _multi_binom(alpha, gamma)
                prod_m = _mmul(pm, dq)
                if c != 1:
                    prod_m = _mscale(prod_m, Expression.const(c))
                key = tuple(a - g + b for a, g, b in zip(alpha, gamma, beta))
                out.setdefault(key, []).append(prod_m)
    return TDOperator(P.indeps, P.rows, Q.cols, {k: _msum(ms) for k, ms in out.items()})


def commutator(P: TDOperator, Q: TDOperator, ctx) -> TDOperator:
    return compose(P, Q, ctx) - compose(Q, P, ctx)


def adjoint(Q: TDOperator, ctx) -> TDOperator:
    """Formal adjoint: transpose coefficients, reverse and sign the derivatives."""
    out: dict = {}
    for alpha, m in Q.terms.items():
        mt = _transpose(m)
        sign = -1 if sum(alpha) % 2 else 1
        for gamma in _sub_multi(alpha):
            dm = tuple(tuple(ctx.Dpow(e, gamma) for e in row) for row in mt) if any(gamma) else mt
            if _is_zero_matrix(dm):
                continue
            c = sign * _multi_binom(alpha, gamma)
            dm = _mscale(dm, Expression.const(c))
            key = tuple(a - g for a, g in zip(alpha, gamma))
            out.setdefault(key, []).append(dm)
    return TDOperator(Q.indeps, Q.cols, Q.rows, {k: _msum(ms) for k, ms in out.items()})


def apply_to(Q: TDOperator, v, ctx) -> list[Expression]:
    """Let ``Q`` act on the vector ``v`` by iterated total derivatives."""
    v = [as_expression(e) for e in v]
    if len(v) != Q.cols:
        raise DimensionError(f"vector of length {len(v)} for an operator with {Q.cols} columns")
    acc = [[] for _ in range(Q.rows)]
    for alpha, m in Q.terms.items():
        dv = [ctx.Dpow(e, alpha) if any(alpha) else e for e in v]
        for i, row in enumerate(m):
            for j, c in enumerate(row):
                if not c.is_zero() and not dv[j].is_zero():
                    acc[i].append(c * dv[j])
    return [esum(t) for t in acc]


def lambda_split(Q: TDOperator) -> tuple[TDOperator, TDOperator]:
    """Return ``(A, B)`` with ``Q = lambda*A - B``."""
    if Q.lambda_degree() > 1:
        raise ValueError("operator is not linear in the spectral parameter; reduce its degree first")
    return Q.lambda_coeff(1), -Q.lambda_coeff(0)


# printing and parsing ----------------------------------------------------------


def _dmono_text(indeps, alpha) -> str:
    parts = []
    for d, a in zip(indeps, alpha):
        parts.extend([f"D[{d}]"] * a)
    return "*".join(parts)


def _coeff_text(e: Expression) -> str:
    s = e.to_text()
    if len(e.num) > 1 and not e.den:
        return f"({s})"
    if e.den:
        return f"({s})"
    return s


def op_text(Q: TDOperator) -> str:
    if Q.is_zero():
        return "0"
    keys = sorted(Q.terms, key=lambda k: (-sum(k), tuple(-a for a in k)))
    out = []
    for k in keys:
        m = Q.terms[k]
        dm = _dmono_text(Q.indeps, k)
        if Q.rows == Q.cols == 1:
            e = m[0][0]
            if not dm:
                body = e.to_text()
                if len(e.num) > 1 and not e.den:
                    body = f"({body})"
                out.append(body)
                continue
            if e == 1:
                out.append(dm)
            elif e == -1:
                out.append(f"-{dm}")
            else:
                out.append(f"{_coeff_text(e)}*{dm}")
        else:
            mt = "[" + ", ".join("[" + ", ".join(x.to_text() for x in row) + "]" for row in m) + "]"
            out.append(f"{mt}*{dm}" if dm else mt)
    text = out[0]
    for s in out[1:]:
        text += f" - {s[1:]}" if s.startswith("-") else f" + {s}"
    return text


def eval_operator(node, table: "dsl.SymbolTable", ctx, line: int = 1) -> TDOperator:
    """Evaluate a DSL AST as an operator; products are compositions."""
    ind = ctx.indeps
    if isinstance(node, dsl.Deriv):
        for d, c in node.dirs:
            if d not in ind:
                raise dsl.ParseError(f"{d!r} is not an independent variable", line, c)
        return TDOperator.D(ind, *[d for d, _ in node.dirs])
    if isinstance(node, dsl.Matrix):
        entries = [[eval_operator(x, table, ctx, line) for x in row] for row in node.rows]
        r, c = len(entries), len(entries[0])
        terms: dict = {}
        for i, row in enumerate(entries):
            for j, op in enumerate(row):
                if (op.rows, op.cols) != (1, 1):
                    raise dsl.ParseError("matrix entries must be scalar", line, node.col)
                for k, m in op.terms.items():
                    cur = terms.setdefault(k, [[ZERO] * c for _ in range(r)])
                    cur[i][j] = m[0][0]
        return TDOperator(ind, r, c, {k: tuple(tuple(row) for row in m) for k, m in terms.items()})
    if not dsl.uses_operators(node):
        return TDOperator.scalar(ind, ctx.nf(dsl.eval_scalar(node, table, line)))
    if isinstance(node, dsl.Neg):
        return -eval_operator(node.arg, table, ctx, line)
    if isinstance(node, dsl.Pow):
        if node.exp < 0:
            raise dsl.ParseError("negative power of an operator", line, node.col)
        base = eval_operator(node.base, table, ctx, line)
        out = TDOperator.identity(ind, base.rows)
        for _ in range(node.exp):
            out = compose(out, base, ctx)
        return out
    if isinstance(node, dsl.Bin):
        a = eval_operator(node.left, table, ctx, line)
        if node.op == "/":
            if dsl.uses_operators(node.right):
                raise dsl.ParseError("division by an operator", line, node.col)
            s = ctx.nf(dsl.eval_scalar(node.right, table, line))
            if s.is_zero():
                raise dsl.ParseError("division by zero", line, node.col)
            return compose(a, TDOperator.scalar(ind, 1 / s, a.cols), ctx)
        b = eval_operator(node.right, table, ctx, line)
        try:
            if node.op == "*":
                if (a.rows, a.cols) == (1, 1) and b.rows != 1 and not any(any(k) for k in a.terms):
                    return b.left(a.terms.get((0,) * len(ind), ((ZERO,),))[0][0])
                return compose(a, b, ctx)
            if node.op == "+":
                return a + b
            return a - b
        except DimensionError as exc:
            raise dsl.ParseError(str(exc), line, node.col) from None
    raise dsl.ParseError("malformed operator expression", line, node.col)


def parse_operator(text: str, table, ctx, line: int = 1, col0: int = 1) -> TDOperator:
    return eval_operator(dsl.parse_ast(text, line, col0), table, ctx, line)
