"""Differential coverings: nonlocal variables and their compatibility."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from . import symbols as S
from .expr import ZERO, Expression, as_expression
from .jets import Context, lambda_coefficients
from .symbols import Kind


class CoveringError(ValueError):
    pass


@dataclass
class NonlocalVariable:
    name: str
    relations: dict  # direction -> Expression
    components: list = field(default_factory=list)  # vector variables only

    def free_directions(self, indeps) -> list[str]:
        return [d for d in indeps if d not in self.relations]

    @property
    def symbol(self):
        return S.jet(self.name, (), nonlocal_=True)

    def text(self) -> str:
        return "; ".join(f"{self.name}[{d}] = {e.to_text()}" for d, e in self.relations.items())


@dataclass
class Covering:
    system: object
    variables: dict = field(default_factory=dict)
    status: str = "unchecked"
    witness: list = field(default_factory=list)

    def context(self) -> Context:
        return Context(self.system, self)

    def copy(self) -> "Covering":
        return Covering(self.system, dict(self.variables), self.status, list(self.witness))


def _check_refs(e: Expression, cov: Covering, v: NonlocalVariable, indeps):
    known = set(cov.system.dependents) if cov.system else set()
    for w in e.free_vars():
        if w.kind == Kind.NONLOCAL and w.name != v.name and w.name not in cov.variables:
            raise CoveringError(f"relation for {v.name} references undefined nonlocal {w.name}")
        if w.kind == Kind.JET and w.name not in known:
            raise CoveringError(f"relation for {v.name} references undefined symbol {w.name}")
        if w.kind == Kind.INDEP and w.name not in indeps:
            raise CoveringError(f"relation for {v.name} references undefined symbol {w.name}")


def define_nonlocal(cov: Covering, v: NonlocalVariable, relations=None) -> Covering:
    """Extend ``cov`` by ``v``.

    ``relations`` may be given as a list of ``(direction, expr)`` pairs so
    that duplicated directions can be detected.
    """
    indeps = cov.system.independents
    if v.components:
        out = cov
        for c in v.components:
            out = define_nonlocal(out, c)
        return out
    pairs = list(relations) if relations is not None else list(v.relations.items())
    rel = {}
    for d, e in pairs:
        if d not in indeps:
            raise CoveringError(f"{d!r} is not an independent variable")
        if d in rel:
            raise CoveringError(f"relation direction {d} duplicated for {v.name}")
        e = as_expression(e)
        _check_refs(e, cov, v, indeps)
        rel[d] = e
    if v.name in cov.variables:
        raise CoveringError(f"nonlocal variable {v.name} defined twice")
    new = cov.copy()
    new.variables[v.name] = NonlocalVariable(v.name, rel)
    new.status = "unchecked"
    new.witness = []
    return new


@dataclass
class CompatibilityReport:
    passed: bool
    residuals: list  # (variable, dir_i, dir_j, Expression)

    def __bool__(self) -> bool:
        return self.passed


def compatibility_check(cov: Covering, names=None) -> CompatibilityReport:
    """Cross-derivative test ``D_i(rel_j) = D_j(rel_i)`` for every related pair."""
    ctx = cov.context()
    residuals = []
    for name in sorted(cov.variables) if names is None else names:
        v = cov.variables[name]
        dirs = [d for d in ctx.indeps if d in v.relations]
        for i, j in combinations(dirs, 2):
            r = ctx.nf(ctx.D(ctx.nf(v.relations[j]), i) - ctx.D(ctx.nf(v.relations[i]), j))
            residuals.append((name, i, j, r))
    ok = all(r.is_zero() for *_, r in residuals)
    cov.status = "compatible" if ok else "incompatible"
    cov.witness = [(n, i, j, r) for n, i, j, r in residuals if not r.is_zero()]
    return CompatibilityReport(ok, residuals)


def residual_text(r: Expression) -> str:
    if r.is_zero():
        return "0"
    parts = lambda_coefficients(r)
    if len(parts) <= 1:
        return r.to_text()
    return "; ".join(f"lambda^{k}: {c.to_text()}" for k, c in sorted(parts.items()))


# coverings from operators ----------------------------------------------------


def solve_first_order(ops, var, dirs, ctx: Context) -> dict:
    """Solve ``ops[k](var) = 0`` for the ``var`` derivatives in ``dirs``.

    Every operator must be first order and scalar. Returns ``{dir: expr}``
    with right sides in the free jets of ``var``.
    """
    if len(ops) != len(dirs):
        raise CoveringError("need one solved direction per operator")
    for op in ops:
        if op.order > 1 or (op.rows, op.cols) != (1, 1):
            raise CoveringError("covering relations need scalar first-order operators")
    mat = [[op.scalar_coeff(d) for d in dirs] for op in ops]
    rhs = []
    base = Expression.var(var)
    for op in ops:
        r = -(op.scalar_coeff() * base)
        for d in ctx.indeps:
            if d in dirs:
                continue
            c = op.scalar_coeff(d)
            if not c.is_zero():
                r = r - c * Expression.var(var.shifted(d))
        rhs.append(r)
    sol = _cramer(mat, rhs)
    if sol is None:
        raise CoveringError(f"operators cannot be solved for directions {', '.join(dirs)}")
    return {d: ctx.nf(s) for d, s in zip(dirs, sol)}


def _det(m):
    if len(m) == 1:
        return m[0][0]
    if len(m) == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    total = ZERO
    for j in range(len(m)):
        if m[0][j].is_zero():
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = m[0][j] * _det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def _cramer(mat, rhs):
    d = _det(mat)
    if d.is_zero():
        return None
    out = []
    for j in range(len(mat)):
        mj = [row[:j] + [rhs[i]] + row[j + 1:] for i, row in enumerate(mat)]
        out.append(_det(mj) / d)
    return out


def covering_from_operators(cov: Covering, name: str, ops, dirs, ctx: Context | None = None) -> Covering:
    ctx = ctx or Context(cov.system)
    var = S.jet(name, (), nonlocal_=True)
    rel = solve_first_order(ops, var, dirs, ctx)
    return define_nonlocal(cov, NonlocalVariable(name, rel))


def build_vector_covering(lax, ctx: Context, name: str = "zeta", dirs=None) -> NonlocalVariable:
    """Components of a field ``Z`` commuting with both Lax vector fields.

    ``[X_i, Z] = 0`` reads ``X_i(zeta^j) = Z(X_i^j)`` for every component.
    """
    ops = list(lax.ops) if hasattr(lax, "ops") else list(lax)
    for op in ops:
        if op.order > 1 or (op.rows, op.cols) != (1, 1):
            raise CoveringError("vector covering needs scalar vector fields")
        if not op.scalar_coeff().is_zero():
            raise CoveringError("Lax operator has a zero-order term")
    ind = ctx.indeps
    zeta = {d: S.jet(f"{name}_{d}", (), nonlocal_=True) for d in ind}
    if dirs is None:
        dirs = _solvable_pair(ops, ind)
        if dirs is None:
            raise CoveringError("no pair of directions can be solved")
    comps = []
    unresolved = []
    for j in ind:
        mat = [[op.scalar_coeff(d) for d in dirs] for op in ops]
        rhs_list = []
        for op in ops:
            r = ZERO
            for k in ind:
                r = r + Expression.var(zeta[k]) * ctx.D(op.scalar_coeff(j), k)
            for d in ind:
                if d in dirs:
                    continue
                c = op.scalar_coeff(d)
                if not c.is_zero():
                    r = r - c * Expression.var(zeta[j].shifted(d))
            rhs_list.append(r)
        sol = _cramer(mat, rhs_list)
        if sol is None:
            unresolved.append(j)
            continue
        comps.append(NonlocalVariable(zeta[j].name, {d: ctx.nf(s) for d, s in zip(dirs, sol)}))
    if unresolved:
        raise CoveringError(f"components {', '.join(unresolved)} cannot be resolved")
    return NonlocalVariable(name, {}, comps)


def _solvable_pair(ops, ind):
    for a, b in combinations(ind, 2):
        m = [[op.scalar_coeff(a), op.scalar_coeff(b)] for op in ops]
        if not _det(m).is_zero():
            return (a, b)
    return None
