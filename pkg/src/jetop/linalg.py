"""Linear systems with undetermined coefficients.

Unknowns are :class:`~jetop.symbols.Var` objects of kind UNKNOWN. Expressions
linear in the unknowns are turned into equations by collecting their
numerators on monomials in a chosen set of variables; the resulting systems
are solved by Gauss-Jordan elimination over the field of rational functions.
"""

from __future__ import annotations

from .expr import ONE, ZERO, Expression
from .poly import Poly
from .symbols import Kind, var_of


class Inconsistent(ValueError):
    pass


def linear_rows(exprs, unknowns, collect=None) -> list[list[Expression]]:
    """Rows ``[c_1, ..., c_n, rhs]`` with ``sum c_k u_k = rhs``.

    ``collect(var)`` selects the variables whose monomials separate the
    equations; with ``collect=None`` each expression gives one equation.
    The (nonzero) denominator of each expression is dropped.
    """
    uid = {u.id: k for k, u in enumerate(unknowns)}
    n = len(unknowns)
    rows = []
    for e in exprs:
        if e.is_zero():
            continue
        for f, _ in e.den:
            if f.vars() & uid.keys():
                raise ValueError("unknown coefficient in a denominator")
        sel = (lambda v: v in uid) if collect is None else (lambda v: v in uid or collect(var_of(v)))
        groups = e.num.split(sel)
        buckets: dict = {}
        for mono, rest in groups.items():
            u = [(v, x) for v, x in mono if v in uid]
            key = tuple((v, x) for v, x in mono if v not in uid)
            if len(u) > 1 or (u and u[0][1] != 1):
                raise ValueError("expression is not linear in the unknowns")
            row = buckets.setdefault(key, [Poly() for _ in range(n + 1)])
            if u:
                row[uid[u[0][0]]] = row[uid[u[0][0]]] + rest
            else:
                row[n] = row[n] - rest
        for row in buckets.values():
            if any(not p.is_zero() for p in row):
                rows.append([Expression.from_poly(p) for p in row])
    return rows


def rref(rows: list[list[Expression]], ncols: int):
    """Reduced row echelon form of the coefficient part; returns ``(rows, pivots)``."""
    m = [list(r) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        best = None
        for i in range(r, len(m)):
            e = m[i][c]
            if not e.is_zero():
                s = e.size()
                if best is None or s < best[0]:
                    best = (s, i)
                    if e.is_const():
                        break
        if best is None:
            continue
        i = best[1]
        m[r], m[i] = m[i], m[r]
        piv = m[r][c]
        if piv != ONE:
            inv = 1 / piv
            m[r] = [x * inv if not x.is_zero() else x for x in m[r]]
        for k in range(len(m)):
            if k != r and not m[k][c].is_zero():
                f = m[k][c]
                m[k] = [a - f * b if not b.is_zero() else a for a, b in zip(m[k], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r] + [row for row in m[r:] if any(not x.is_zero() for x in row)], pivots


def solve(rows, unknowns):
    """Return ``(particular, basis)`` as lists of dicts ``{Var: Expression}``.

    The particular solution sets every free unknown to zero; ``basis`` spans
    the homogeneous solutions. Raises :class:`Inconsistent` if there is none.
    """
    n = len(unknowns)
    m, pivots = rref(rows, n)
    for row in m[len(pivots):]:
        if not row[n].is_zero():
            raise Inconsistent("linear system has no solution")
    part = {u: ZERO for u in unknowns}
    for k, c in enumerate(pivots):
        part[unknowns[c]] = m[k][n]
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        vec = {u: ZERO for u in unknowns}
        vec[unknowns[f]] = ONE
        for k, c in enumerate(pivots):
            if not m[k][f].is_zero():
                vec[unknowns[c]] = -m[k][f]
        basis.append(vec)
    return part, basis


def nullspace(rows, unknowns) -> list[dict]:
    homog = [r[:-1] + [ZERO] for r in rows]
    return solve(homog, unknowns)[1]


def non_constant(v) -> bool:
    return v.kind not in (Kind.CONST, Kind.UNKNOWN)


def differential(v) -> bool:
    """Nonlocal jets and the spectral parameter."""
    return v.kind in (Kind.NONLOCAL, Kind.SPECTRAL)
