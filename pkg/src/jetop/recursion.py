"""Recursion operators given as Baecklund transformations of the linearization.

An :class:`ROSpec` holds first-order operators ``A_i, B_i`` and factors
``L, M``; the relations ``A_i(V) = B_i(U)``, ``i = 1, 2``, map a symmetry ``U``
(or a cosymmetry, in adjoint mode) to a new one ``V``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement

from gmpy2 import mpq

from . import symbols as S
from .covering import Covering, NonlocalVariable, _cramer, _det, compatibility_check, define_nonlocal
from .expr import ZERO, Expression
from .jets import Context, check_invariance, linearize
from .linalg import Inconsistent, linear_rows, solve
from .operators import TDOperator, adjoint, apply_to, commutator, compose
from .report import Check, check, info
from .symbols import Kind, var_of

MAX_TEXT = 4000


class ROError(ValueError):
    pass


def _short(s: str) -> str:
    return s if len(s) <= MAX_TEXT else s[:MAX_TEXT] + " ..."


def op_residual(op: TDOperator) -> str:
    return _short(op.to_text())


@dataclass
class ROSpec:
    A1: TDOperator
    A2: TDOperator
    B1: TDOperator
    B2: TDOperator
    L: TDOperator | None = None
    M: TDOperator | None = None
    p: str | None = None
    q: str | None = None
    mode: str = "direct"
    name: str = "ro"

    def with_factors(self, L, M) -> "ROSpec":
        return ROSpec(self.A1, self.A2, self.B1, self.B2, L, M, self.p, self.q, self.mode, self.name)

    def swapped(self) -> "ROSpec":
        """Relabel ``(A1, B1) <-> (A2, B2)``; factors change sign."""
        neg = lambda X: None if X is None else -X  # noqa: E731
        return ROSpec(self.A2, self.A1, self.B2, self.B1, neg(self.L), neg(self.M), self.q, self.p, self.mode, self.name)


@dataclass
class VerificationReport:
    checks: list
    L: TDOperator | None
    M: TDOperator | None
    p: str | None
    q: str | None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.name in ("i", "ii", "iii", "iv"))

    def status(self, name: str) -> str:
        for c in self.checks:
            if c.name == name:
                return c.status
        raise KeyError(name)

    def __bool__(self) -> bool:
        return self.passed


def find_factor(target: TDOperator, K: TDOperator, ctx: Context, max_order: int = 1):
    """Find ``Y`` of order <= 1 with ``Y o K = target`` modulo the system."""
    if target.cols != K.cols:
        raise ROError("factor search: column mismatch")
    target = target.normal_form(ctx)
    if target.is_zero():
        return TDOperator.zero(K.indeps, target.rows, K.rows)
    if K.is_zero():
        return None
    if (K.rows, K.cols, target.rows) == (1, 1, 1):
        key = max(K.terms, key=lambda k: (sum(k), k))
        t = target.terms.get(key)
        if t is not None:
            Y = TDOperator.scalar(K.indeps, ctx.nf(t[0][0] / K.terms[key][0][0]))
            if (compose(Y, K, ctx).normal_form(ctx) - target).is_zero():
                return Y
    keys = [(0,) * len(K.indeps)]
    if max_order >= 1:
        keys += [tuple(1 if i == j else 0 for i in range(len(K.indeps))) for j in range(len(K.indeps))]
    unknowns = S.fresh_unknowns("y", len(keys) * target.rows * K.rows)
    it = iter(unknowns)
    terms = {k: tuple(tuple(Expression.var(next(it)) for _ in range(K.rows)) for _ in range(target.rows)) for k in keys}
    Y = TDOperator(K.indeps, target.rows, K.rows, terms)
    diff = (compose(Y, K, ctx) - target).normal_form(ctx)
    exprs = [e for m in diff.terms.values() for row in m for e in row]
    try:
        part, _ = solve(linear_rows(exprs, unknowns), unknowns)
    except Inconsistent:
        return None
    sub = {u.id: v for u, v in part.items()}
    Y = Y.map(lambda e: ctx.nf(e.subs(sub)))
    if (compose(Y, K, ctx).normal_form(ctx) - target).is_zero():
        return Y
    return None


def _first_order_scalar(op: TDOperator, d: str) -> Expression:
    m = op.coeff(d)
    c = m[0][0]
    for i, row in enumerate(m):
        for j, e in enumerate(row):
            if e != (c if i == j else ZERO):
                raise ROError("first-order coefficients must be scalar")
    return c


def condition_iv_matrix(spec: ROSpec, p: str, q: str):
    return [[_first_order_scalar(spec.A1, p), _first_order_scalar(spec.A1, q)],
            [_first_order_scalar(spec.A2, p), _first_order_scalar(spec.A2, q)]]


def choose_dirs(spec: ROSpec, ctx: Context):
    for a, b in combinations(ctx.indeps, 2):
        if not _det(condition_iv_matrix(spec, a, b)).is_zero():
            return a, b
    return None


def verify(spec: ROSpec, ctx: Context, find: bool = True) -> VerificationReport:
    """Check conditions i-iv modulo the system (and covering, if any)."""
    for X in (spec.A1, spec.A2, spec.B1, spec.B2):
        if X.order > 1:
            raise ROError("A_i and B_i must be of order at most one")
    F = ctx.system.equations
    lF = linearize(F, ctx)
    n = lF.cols if spec.mode == "direct" else lF.rows
    for X in (spec.A1, spec.A2, spec.B1, spec.B2):
        if (X.rows, X.cols) != (n, n):
            raise ROError(f"{spec.mode} mode needs {n}x{n} operators, got {X.rows}x{X.cols}")
    checks: list[Check] = []
    c1 = commutator(spec.A1, spec.A2, ctx).normal_form(ctx)
    checks.append(check("i", c1.is_zero(), op_residual(c1)))
    AB = (compose(spec.A1, spec.B2, ctx) - compose(spec.A2, spec.B1, ctx)).normal_form(ctx)
    BA = (compose(spec.B1, spec.A2, ctx) - compose(spec.B2, spec.A1, ctx)).normal_form(ctx)
    if spec.mode == "direct":
        pairs = (("ii", "L", AB, lF, spec.L), ("iii", "M", lF, BA, spec.M))
    elif spec.mode == "adjoint":
        lFa = adjoint(lF, ctx).normal_form(ctx)
        pairs = (("ii", "L", lFa, BA, spec.L), ("iii", "M", AB, lFa, spec.M))
    else:
        raise ROError(f"unknown mode {spec.mode!r}")
    found = {}
    for cname, fname, target, K, given in pairs:
        Y = given.normal_form(ctx) if given is not None else (find_factor(target, K, ctx) if find else None)
        if Y is None:
            checks.append(check(cname, False, _short(f"no factor {fname} of order <= 1; target: {target.to_text()}")))
            found[fname] = None
            continue
        res = (target - compose(Y, K, ctx)).normal_form(ctx)
        checks.append(check(cname, res.is_zero(), op_residual(res),
                            value=f"{fname} = {Y.to_text()}" + ("" if given is not None else " (found)")))
        found[fname] = Y
    p, q = spec.p, spec.q
    if p is None or q is None:
        pq = choose_dirs(spec, ctx)
        if pq is None:
            checks.append(check("iv", False, "no pair of directions has a nonzero determinant"))
        else:
            p, q = pq
    if p is not None and q is not None:
        if p == q:
            raise ROError("solve directions must differ")
        det = ctx.nf(_det(condition_iv_matrix(spec, p, q)))
        checks.append(check("iv", not det.is_zero(), "determinant is 0", value=f"det[{p},{q}] = {det.to_text()}"))
    return VerificationReport(checks, found.get("L"), found.get("M"), p, q)


@dataclass
class LaxFromRO:
    ops: tuple
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def lax_operators(spec: ROSpec) -> tuple:
    lam = Expression.var(S.spectral())
    return (spec.A1.left(lam) - spec.B1, spec.A2.left(lam) - spec.B2)


def build_lax_from_ro(spec: ROSpec, ctx: Context) -> LaxFromRO:
    """``(lambda*A_1 - B_1, lambda*A_2 - B_2)`` and their commutator by powers of lambda."""
    L1, L2 = lax_operators(spec)
    C = commutator(L1, L2, ctx).normal_form(ctx)
    lam = S.spectral()
    checks = []
    for k in (0, 1, 2):
        part = C.map(lambda e: Expression.from_poly(e.num).coefficients(lam).get(k, ZERO) if not e.is_zero() else e)
        checks.append(check(f"lambda^{k}", part.is_zero(), op_residual(part)))
    checks.append(check("commutator", C.is_zero(), op_residual(C)))
    return LaxFromRO((L1, L2), checks)


# relations ---------------------------------------------------------------

OLD, NEW = "U", "V"


def _scalar_apply(op: TDOperator, e: Expression, ctx: Context) -> Expression:
    return ctx.nf(apply_to(op, [e], ctx)[0])


def solve_relations(A1, A2, rhs1, rhs2, var: S.Var, p: str, q: str, ctx: Context) -> dict:
    """Solve ``A_i(var) = rhs_i`` for the ``p`` and ``q`` derivatives of ``var``."""
    mat = [[_first_order_scalar(A1, p), _first_order_scalar(A1, q)],
           [_first_order_scalar(A2, p), _first_order_scalar(A2, q)]]
    rhs = []
    v = Expression.var(var)
    for A, r in ((A1, rhs1), (A2, rhs2)):
        rest = r - A.scalar_coeff() * v
        for d in ctx.indeps:
            if d in (p, q):
                continue
            c = A.scalar_coeff(d)
            if not c.is_zero():
                rest = rest - c * Expression.var(var.shifted(d))
        rhs.append(rest)
    sol = _cramer(mat, rhs)
    if sol is None:
        raise ROError(f"condition iv fails: the {p},{q} coefficient matrix is singular")
    return {p: ctx.nf(sol[0]), q: ctx.nf(sol[1])}


def ro_relations(spec: ROSpec, ctx: Context, p=None, q=None) -> dict:
    """Relations of the transformation in terms of old ``U`` and new ``V``."""
    if (spec.A1.rows, spec.A1.cols) != (1, 1):
        raise ROError("relations are printed for scalar operators only")
    if p is None or q is None:
        p, q = spec.p, spec.q
    if p is None or q is None:
        pq = choose_dirs(spec, ctx)
        if pq is None:
            raise ROError("no solvable pair of directions")
        p, q = pq
    U = Expression.var(S.jet(OLD))
    return solve_relations(spec.A1, spec.A2, _scalar_apply(spec.B1, U, ctx), _scalar_apply(spec.B2, U, ctx),
                           S.jet(NEW), p, q, ctx)


def relations_text(rel: dict, name: str = NEW) -> list[str]:
    return [f"{name}[{d}] = {e.to_text()}" for d, e in rel.items()]


# application --------------------------------------------------------------


@dataclass
class ApplyResult:
    local: Expression
    remainder: NonlocalVariable | None
    covering: Covering | None
    result: Expression
    relations: dict
    checks: list = field(default_factory=list)
    gauge: str = ""


def _jet_basis(ctx: Context, order: int, dep: str) -> list:
    out = []
    dirs = ctx.indeps
    for k in range(order + 1):
        for idx in combinations_with_replacement(dirs, k):
            v = S.jet(dep, idx)
            if not ctx.reducible(v) and v not in out:
                out.append(v)
    return out


def _max_jet_order(exprs, dep: str) -> int:
    o = 0
    for e in exprs:
        for v in e.free_vars():
            if v.kind == Kind.JET and v.name == dep:
                o = max(o, v.order)
    return o


def _priority(mono: tuple) -> tuple:
    jets = [(var_of(v), x) for v, x in mono if var_of(v).is_jet]
    order = max((v.order for v, _ in jets), default=0)
    deg = sum(x for _, x in jets)
    return (-order, -deg, [(var_of(v).sort_key, x) for v, x in mono])


def _vectors(comps, lcms):
    """Numerators over common denominators as ``{(i, mono): mpq}``."""
    out = {}
    for i, e in enumerate(comps):
        num = e.num
        have = dict(e.den)
        for f, k in lcms[i].items():
            extra = k - have.get(f, 0)
            if extra:
                num = num * f ** extra
        for m, c in num.terms.items():
            out[(i, m)] = c
    return out


def integrate(S_parts, A_ops, basis_monos, ctx: Context):
    """Pick ``G`` in the span of ``basis_monos`` so that ``S - A(G)`` is reduced.

    Columns ``A(g)`` are eliminated against the source in priority order
    (higher jet order, then higher degree first). Returns ``(G, remainder,
    kernel_dim)``.
    """
    cols_expr = [[_scalar_apply(A, g, ctx) for A in A_ops] for g in basis_monos]
    lcms = []
    for i in range(len(A_ops)):
        l: dict = {}
        for e in [S_parts[i]] + [c[i] for c in cols_expr]:
            for f, k in e.den:
                if k > l.get(f, 0):
                    l[f] = k
        lcms.append(l)
    cols = [(_vectors(c, lcms), {k: mpq(1)}) for k, c in enumerate(cols_expr)]
    src = _vectors(S_parts, lcms)
    keys = sorted({k for v, _ in cols for k in v} | set(src), key=lambda k: (_priority(k[1]), k[0]))
    remaining = list(range(len(cols)))
    combo: dict = {}
    for key in keys:
        piv = next((j for j in remaining if cols[j][0].get(key)), None)
        if piv is None:
            continue
        remaining.remove(piv)
        pv, pc = cols[piv]
        a = pv[key]
        for j in remaining:
            v, c = cols[j]
            f = v.get(key)
            if f:
                r = f / a
                for kk, x in pv.items():
                    y = v.get(kk, 0) - r * x
                    if y:
                        v[kk] = y
                    else:
                        v.pop(kk, None)
                for kk, x in pc.items():
                    y = c.get(kk, 0) - r * x
                    if y:
                        c[kk] = y
                    else:
                        c.pop(kk, None)
        s = src.get(key)
        if s:
            r = s / a
            for kk, x in pv.items():
                y = src.get(kk, 0) - r * x
                if y:
                    src[kk] = y
                else:
                    src.pop(kk, None)
            for kk, x in pc.items():
                combo[kk] = combo.get(kk, 0) + r * x
    kernel = len(remaining) - sum(1 for j in remaining if cols[j][0])
    G = ZERO
    for k, c in combo.items():
        if c:
            G = G + Expression.const(c) * basis_monos[k]
    G = ctx.nf(G)
    rem = [ctx.nf(S_parts[i] - _scalar_apply(A, G, ctx)) for i, A in enumerate(A_ops)]
    return G, rem, kernel


def _matching_nonlocal(cov: Covering, rel: dict, ctx: Context):
    """Name of a defined nonlocal whose relations equal ``rel`` (which must not mention it)."""
    for n, v in cov.variables.items():
        if set(v.relations) == set(rel) and all(ctx.nf(v.relations[d] - rel[d]).is_zero() for d in rel):
            return n
    return None


def apply(spec: ROSpec, seed, ctx: Context, name: str = "w", check_seed: bool = True) -> ApplyResult:
    """One step ``U -> V`` of the transformation, integrated as far as possible."""
    if (spec.A1.rows, spec.A1.cols) != (1, 1):
        raise ROError("apply supports scalar operators only")
    seed = ctx.nf(seed)
    mode = "symmetry" if spec.mode == "direct" else "cosymmetry"
    checks = []
    if check_seed:
        inv = check_invariance([seed], ctx, mode)
        checks.append(check(f"seed {mode}", inv.passed, _short(inv.residuals[0].to_text())))
        if not inv.passed:
            raise ROError(f"seed is not a {mode}: residual {inv.residuals[0].to_text()}")
    p, q = spec.p, spec.q
    if p is None or q is None:
        pq = choose_dirs(spec, ctx)
        if pq is None:
            raise ROError("condition iv fails for every pair of directions")
        p, q = pq
    Sp = [_scalar_apply(spec.B1, seed, ctx), _scalar_apply(spec.B2, seed, ctx)]
    dep = ctx.system.dependents[0]
    order = max(_max_jet_order(Sp, dep) - 1, 0)
    jets = [Expression.var(v) for v in _jet_basis(ctx, order, dep)]
    monos = list(jets)
    for a, b in combinations_with_replacement(range(len(jets)), 2):
        monos.append(jets[a] * jets[b])
    G, rem, kernel = integrate(Sp, [spec.A1, spec.A2], monos, ctx)
    cov = ctx.covering.copy() if ctx.covering is not None else Covering(ctx.system)
    new_var = None
    result = G
    if any(not r.is_zero() for r in rem):
        probe = S.jet("_w", (), nonlocal_=True)
        rel = solve_relations(spec.A1, spec.A2, rem[0], rem[1], probe, p, q, ctx)
        existing = _matching_nonlocal(cov, rel, ctx)
        if existing is None:
            base, k = name, 1
            while name in cov.variables:
                k += 1
                name = f"{base}{k}"
        else:
            name = existing
        w = S.jet(name, (), nonlocal_=True)
        rel = solve_relations(spec.A1, spec.A2, rem[0], rem[1], w, p, q, ctx)
        if existing is None:
            cov = define_nonlocal(cov, NonlocalVariable(name, {}), list(rel.items()))
        else:
            checks.append(info("nonlocal", f"{name} already defined with these relations"))
        new_var = cov.variables[name]
        comp = compatibility_check(cov, [name])
        checks.append(check(f"covering {name} compatible", comp.passed,
                            "; ".join(f"D_{i}({name}[{j}]) - D_{j}({name}[{i}]) = {r.to_text()}" for _, i, j, r in comp.residuals if not r.is_zero())))
        result = G + Expression.var(w)
    new_ctx = Context(ctx.system, cov)
    inv = check_invariance([result], new_ctx, mode)
    checks.append(check(f"result {mode}", inv.passed, _short(inv.residuals[0].to_text())))
    rel_v = solve_relations(spec.A1, spec.A2, Sp[0], Sp[1], S.jet(NEW), p, q, ctx)
    gauge = f"kernel of the {p},{q} system within the ansatz has dimension {kernel}; set to zero"
    return ApplyResult(G, new_var, cov, result, rel_v, checks, gauge)
