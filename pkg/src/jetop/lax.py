"""Lax pairs and the construction of recursion operators from them."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import symbols as S
from .expr import ZERO, Expression, as_expression
from .jets import Context, check_invariance
from .linalg import differential, linear_rows, non_constant, nullspace, rref
from .operators import TDOperator, adjoint, apply_to, commutator, lambda_split
from .recursion import ROError, ROSpec, VerificationReport, op_residual, ro_relations, verify
from .report import Check, check, info


class LaxError(ValueError):
    pass


class PipelineError(ValueError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class LaxPair:
    ops: tuple
    eliminated: tuple = (None, None)
    name: str = "lax"

    def __iter__(self):
        return iter(self.ops)

    def text(self) -> list[str]:
        return [op.to_text() for op in self.ops]


def _lam():
    return S.spectral()


def lambda_degree(op: TDOperator) -> int:
    return op.lambda_degree()


def split_by_lambda(op: TDOperator) -> dict:
    """``{k: operator}`` with ``op = sum lambda^k op_k`` (numerator-wise)."""
    lam = _lam()
    out: dict = {}
    for key, m in op.terms.items():
        for i, row in enumerate(m):
            for j, e in enumerate(row):
                if e.is_zero():
                    continue
                num = Expression.from_poly(e.num)
                den = Expression._raw(e.num.const(1), e.den)
                for k, c in num.coefficients(lam).items():
                    if c.is_zero():
                        continue
                    t = out.setdefault(k, {})
                    mm = t.setdefault(key, [[ZERO] * op.cols for _ in range(op.rows)])
                    mm[i][j] = c * den
    return {k: TDOperator(op.indeps, op.rows, op.cols, {kk: tuple(tuple(r) for r in mm) for kk, mm in t.items()})
            for k, t in sorted(out.items())}


def check_lax(lax: LaxPair, ctx: Context) -> list[Check]:
    """``[L1, L2]`` modulo the system, by powers of lambda and derivative monomials."""
    L1, L2 = lax.ops
    raw = commutator(L1, L2, Context.free(ctx.indeps))
    C = commutator(L1, L2, ctx).normal_form(ctx)
    checks = []
    parts = split_by_lambda(C) if not C.is_zero() else {}
    for k, part in parts.items():
        checks.append(check(f"lambda^{k}", part.is_zero(), op_residual(part)))
    checks.append(check("commutator", C.is_zero(), op_residual(C)))
    if C.is_zero():
        how = "identically" if raw.is_zero() else "modulo the equations"
        checks.append(info("vanishes", how))
    return checks


def lambda_degree_reduce(lax: LaxPair, ctx: Context) -> LaxPair:
    """Lower the lambda-degree by subtracting multiples of the companion operator.

    If ``X_2 = lambda^k C + ...`` with ``k >= 2`` and the companion is
    ``X_1 = lambda E + E_0``, and ``C = r E``, then ``X_2 - lambda^(k-1) r X_1``
    has lambda-degree ``k - 1``.
    """
    ops = [op.normal_form(ctx) for op in lax.ops]
    degs = [op.lambda_degree() for op in ops]
    if all(d <= 1 for d in degs):
        return LaxPair(tuple(ops), lax.eliminated, lax.name)
    if sum(1 for d in degs if d > 1) > 1:
        raise LaxError("both operators are nonlinear in lambda")
    hi = 0 if degs[0] > 1 else 1
    lo = 1 - hi
    comp = split_by_lambda(ops[lo])
    E = comp.get(1)
    if E is None or E.is_zero():
        raise LaxError("companion operator does not involve lambda")
    lam = Expression.var(_lam())
    X = ops[hi]
    guard = 0
    while X.lambda_degree() > 1:
        guard += 1
        if guard > 20:
            raise LaxError("lambda-degree reduction does not terminate")
        k = X.lambda_degree()
        C = split_by_lambda(X)[k]
        key = max(E.terms, key=lambda t: (sum(t), t))
        e0 = E.terms[key][0][0]
        c0 = C.terms.get(key, ((ZERO,),))[0][0]
        r = ctx.nf(c0 / e0)
        if not (C - E.left(r)).normal_form(ctx).is_zero():
            raise LaxError("leading lambda-coefficient is not proportional to the companion's lambda part")
        X = (X - ops[lo].left(r * lam ** (k - 1))).normal_form(ctx)
    out = list(ops)
    out[hi] = X
    return LaxPair(tuple(out), lax.eliminated, lax.name)


def adjoint_lax(lax: LaxPair, ctx: Context) -> LaxPair:
    return LaxPair(tuple(adjoint(op, ctx).normal_form(ctx) for op in lax.ops), lax.eliminated, lax.name + "_adj")


def _positive_lead(A: TDOperator, B: TDOperator):
    """Fix the overall sign so that A's first first-order coefficient has positive lead."""
    for d in A.indeps:
        c = A.coeff(d)[0][0]
        if not c.is_zero():
            _, lc = c.num.canonical_leading()
            return (A, B) if lc > 0 else (-A, -B)
    return A, B


def ad_action_split(lax: LaxPair, direction: str, ctx: Context):
    """Split ``ad_{L_i}(w D_dir) = (Q_i w) D_dir`` as ``Q_i = lambda B_i - A_i``.

    The overall sign of each ``(A_i, B_i)`` is normalised (it does not affect
    the conditions on the pair).
    """
    out = []
    for op in lax.ops:
        if op.order > 1 or (op.rows, op.cols) != (1, 1) or not op.scalar_coeff().is_zero():
            raise LaxError("ad-action needs scalar vector fields")
        coeffs = op.first_order_coeffs()
        off = []
        for d, m in coeffs.items():
            if d == direction:
                continue
            dd = ctx.nf(ctx.D(m[0][0], direction))
            if not dd.is_zero():
                off.append(f"D[{d}]: {dd.to_text()}")
        if off:
            raise LaxError("ad-action does not close on multiples of D[%s]; surviving terms %s" % (direction, ", ".join(off)))
        lead = coeffs.get(direction, ((ZERO,),))[0][0]
        Q = (op - TDOperator.scalar(op.indeps, ctx.D(lead, direction))).normal_form(ctx)
        A_, B_ = lambda_split(Q)  # Q = lambda*A_ - B_
        A, B = _positive_lead(B_, A_)  # Q = lambda*B - A
        out.append((A, B))
    (A1, B1), (A2, B2) = out
    return A1, A2, B1, B2


# annihilators --------------------------------------------------------------


@dataclass
class Annihilator:
    op: TDOperator
    dims: int
    dirs: tuple


def derive_annihilator(phi, ctx: Context, dirs, max_order: int = 1) -> Annihilator:
    """Operator ``sum (lambda a_j + b_j) D_j + lambda a_0 + b_0`` killing ``phi``.

    Coefficients are undetermined local functions. After reduction the
    expression is collected on nonlocal jets and powers of lambda; the first
    null vector is normalised so that its first nonzero coefficient (in the
    order a_d1, b_d1, a_d2, ..., a_0, b_0) equals 1.
    """
    if max_order != 1:
        raise LaxError("only first-order annihilators are supported")
    phi = ctx.nf(as_expression(phi))
    lam = Expression.var(_lam())
    dirs = tuple(dirs)
    unk = S.fresh_unknowns("c", 2 * len(dirs) + 2)
    total = ZERO
    derivs = [ctx.D(phi, d) for d in dirs] + [phi]
    for k, dphi in enumerate(derivs):
        a, b = Expression.var(unk[2 * k]), Expression.var(unk[2 * k + 1])
        total = total + (lam * a + b) * dphi
    rows = linear_rows([total], unk, differential)
    basis = nullspace(rows, unk)
    if not basis:
        raise LaxError("only the zero operator annihilates phi in this ansatz")
    vals = [ctx.nf(x) for x in _leading_null_vector(basis, unk)]
    op = TDOperator.zero(ctx.indeps)
    for k, d in enumerate(dirs):
        c = lam * vals[2 * k] + vals[2 * k + 1]
        if not c.is_zero():
            op = op + TDOperator.D(ctx.indeps, d).left(c)
    c0 = lam * vals[-2] + vals[-1]
    if not c0.is_zero():
        op = op + TDOperator.scalar(ctx.indeps, c0)
    return Annihilator(op, len(basis), dirs)


def _leading_null_vector(basis, unk) -> list:
    """First row of the reduced echelon form of the null-space basis."""
    rows = [[v[u] for u in unk] for v in basis]
    m, _ = rref([r + [ZERO] for r in rows], len(unk))
    return m[0][:-1]


# ansatz search -------------------------------------------------------------


@dataclass
class AnsatzSpec:
    form: str
    basis: list
    order: int = 1
    nonlocal_: list = field(default_factory=list)
    reciprocal: bool = True


def _nonlocal_terms(names, ctx: Context, order: int) -> list[Expression]:
    out = []
    for n in names:
        v = Expression.var(S.jet(n, (), nonlocal_=True))
        out.append(v)
        if order >= 1:
            for d in ctx.indeps:
                e = ctx.D(v, d)
                if not e.is_zero() and e not in out:
                    out.append(e)
    return out


def ansatz_search(ctx: Context, spec: AnsatzSpec) -> list[Expression]:
    """Candidate nonlocal symmetries passing the invariance test identically in lambda."""
    if not spec.basis:
        raise LaxError("ansatz basis is empty")
    if spec.order < 0:
        raise LaxError("ansatz order must be nonnegative")
    basis = [ctx.nf(as_expression(b)) for b in spec.basis]
    names = list(spec.nonlocal_)
    if not names:
        for n in (ctx.covering.variables if ctx.covering else {}):
            names.append(n)
    found: list[Expression] = []
    if spec.form in ("psi1", "psi2", "psi3"):
        terms = _nonlocal_terms(names, ctx, spec.order)
        unk = S.fresh_unknowns("a", len(terms) * len(basis))
        phi = ZERO
        k = 0
        for t in terms:
            for b in basis:
                phi = phi + Expression.var(unk[k]) * b * t
                k += 1
        lF_phi = check_invariance([phi], ctx).residuals[0]
        rows = linear_rows([lF_phi], unk, non_constant)
        for vec in nullspace(rows, unk):
            cand = ZERO
            k = 0
            for t in terms:
                for b in basis:
                    cand = cand + vec[unk[k]] * b * t
                    k += 1
            cand = ctx.nf(cand)
            if not cand.is_zero() and cand not in found:
                found.append(cand)
    if spec.reciprocal or spec.form == "reciprocal":
        cands = []
        for n in names:
            v = Expression.var(S.jet(n, (), nonlocal_=True))
            for d in ctx.indeps:
                dv = ctx.D(v, d)
                if not dv.is_zero():
                    cands.append(1 / dv)
            for b in basis:
                cands.append(b / v)
        for c in cands:
            c = ctx.nf(c)
            if c in found:
                continue
            if check_invariance([c], ctx).passed:
                found.append(c)
    return found


# pipeline ------------------------------------------------------------------


@dataclass
class PipelineResult:
    phi: Expression | None
    annihilators: tuple
    rospec: ROSpec | None
    report: VerificationReport | None
    relations: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    convention: str = ""

    @property
    def passed(self) -> bool:
        return self.report is not None and self.report.passed


def _candidates(ops):
    """Both sign conventions: ``Q = lambda A - B`` and ``Q = lambda B - A``."""
    (A1, B1), (A2, B2) = [lambda_split(op) for op in ops]
    yield "lambda*A - B", (A1, A2, B1, B2)
    yield "lambda*B - A", (B1, B2, A1, A2)


def derive_ro_pipeline(ctx: Context, lax: LaxPair | None, phi, dirs1=None, dirs2=None, solve_dirs=None,
                       route: str = "annihilator", template: str | None = None) -> PipelineResult:
    """Derive and verify a recursion operator from a Lax pair and a nonlocal symmetry."""
    checks: list[Check] = []
    if lax is not None:
        try:
            lax = lambda_degree_reduce(lax, ctx)
        except LaxError as exc:
            raise PipelineError("reduce", str(exc)) from None
        lc = check_lax(lax, ctx)
        ok = all(c.passed for c in lc)
        checks.append(check("lax commutes", ok, next((c.residual for c in lc if not c.passed), "0")))
        if not ok:
            raise PipelineError("check_lax", "Lax operators do not commute")
    if route == "ad":
        if lax is None or template is None:
            raise PipelineError("ad", "ad route needs a Lax pair and a template direction")
        try:
            parts = ad_action_split(lax, template, ctx)
        except LaxError as exc:
            raise PipelineError("ad", str(exc)) from None
        candidates = [("lambda*B - A", parts)]
        anns = ()
    else:
        phi = ctx.nf(as_expression(phi))
        inv = check_invariance([phi], ctx)
        checks.append(check("phi symmetry", inv.passed, inv.residuals[0].to_text()))
        if not inv.passed:
            raise PipelineError("phi", "phi is not a (nonlocal) symmetry")
        try:
            a1 = derive_annihilator(phi, ctx, dirs1)
            a2 = derive_annihilator(phi, ctx, dirs2)
        except LaxError as exc:
            raise PipelineError("annihilator", str(exc)) from None
        anns = (a1.op, a2.op)
        for k, a in enumerate((a1, a2), 1):
            res = ctx.nf(apply_to(a.op, [phi], ctx)[0])
            checks.append(check(f"annihilator {k}", res.is_zero(), res.to_text(), value=a.op.to_text()))
            if a.dims > 1:
                checks.append(info(f"annihilator {k} solution space", str(a.dims)))
        try:
            candidates = list(_candidates(anns))
        except ValueError as exc:
            raise PipelineError("split", str(exc)) from None
    last = None
    for conv, (A1, A2, B1, B2) in candidates:
        p, q = solve_dirs if solve_dirs else (None, None)
        spec = ROSpec(A1, A2, B1, B2, p=p, q=q)
        try:
            rep = verify(spec, ctx)
        except ROError as exc:
            raise PipelineError("verify", str(exc)) from None
        spec = ROSpec(A1, A2, B1, B2, rep.L, rep.M, rep.p, rep.q)
        last = (conv, spec, rep)
        if rep.passed:
            break
    conv, spec, rep = last
    rel = ro_relations(spec, ctx) if rep.passed else {}
    return PipelineResult(phi, anns, spec, rep, rel, checks, conv)
