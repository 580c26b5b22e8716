"""Floating-point cross-checks at random points of the solution manifold.

Points are built lazily: every free coordinate gets a value drawn from a
stream keyed by ``(seed, trial, coordinate)``; solved coordinates are computed
from the raw prolonged equations, using that each prolongation is affine in
its top derivative; nonlocal coordinates come from the raw relations. Claims
are evaluated with raw (un-reduced) total derivatives and nested operator
applications, so none of the normal-form or composition code is involved.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from . import symbols as S
from .expr import Expression, GuardedDenominator, as_expression
from .jets import Context, directional_derivative
from .operators import TDOperator, apply_to
from .symbols import Kind, var_of

GUARD = 1e-6
RESAMPLE = 100
TEST_FN = "_g"
LAMBDAS = 3


class OracleError(RuntimeError):
    pass


class _Derivations:
    """Raw prolongations shared by all points of one context."""

    def __init__(self, ctx: Context):
        self.ctx = ctx
        self.raw = Context.free(ctx.indeps)
        self.system = ctx.system
        self._eq: dict = {}
        self._nl: dict = {}
        self._const: dict = {}
        self.leads = []
        if self.system is not None:
            for i, lead in enumerate(self.system.leads):
                self.leads.append((lead.name, lead.counts(ctx.indeps), i))
            self._raw_eqs, self._raw_constraints = self._raw_equations()

    def _raw_equations(self):
        # equations before the constant constraints were substituted
        sysm = self.system
        return (sysm.raw_equations or sysm.equations), list(sysm.constraints)

    def eq_for(self, v):
        """``(E|_{v=0}, dE/dv)`` for the prolonged equation with top ``v``."""
        hit = self._eq.get(v.id)
        if hit is not None:
            return hit
        c = v.counts(self.ctx.indeps)
        for name, lc, i in self.leads:
            if name == v.name and all(a >= b for a, b in zip(c, lc)):
                dirs = []
                for d, a, b in zip(self.ctx.indeps, c, lc):
                    dirs.extend([d] * (a - b))
                E = self.raw.Dseq(self._raw_eqs[i], dirs)
                out = (E.subs({v.id: 0}), E.diff(v))
                self._eq[v.id] = out
                return out
        return None

    def nonlocal_for(self, v):
        hit = self._nl.get(v.id)
        if hit is not None:
            return hit
        cov = self.ctx.covering
        nl = cov.variables.get(v.name) if cov is not None else None
        if nl is None:
            return None
        for d in self.ctx.indeps:
            if d in v.index and d in nl.relations:
                rest = list(v.index)
                rest.remove(d)
                E = self.raw.Dseq(as_expression(nl.relations[d]), rest)
                self._nl[v.id] = E
                return E
        return None

    def constant_for(self, v):
        if self.system is None or v.id not in self.system.const_rules:
            return None
        hit = self._const.get(v.id)
        if hit is not None:
            return hit
        for C in self._raw_constraints:
            if v.id in C.num.vars() and C.degree(v) == 1 and not any(v.id in f.vars() for f, _ in C.den):
                out = (C.subs({v.id: 0}), C.diff(v))
                self._const[v.id] = out
                return out
        raise OracleError(f"no constraint determines {v}")


class JetPoint:
    """A lazily evaluated point of the (covered) solution manifold."""

    def __init__(self, deriv: _Derivations, seed: int, trial, lam: float | None = None):
        self.deriv = deriv
        self.seed = seed
        self.trial = trial
        self.lam = lam
        self.values: dict = {}
        self._busy: set = set()

    def _draw(self, v) -> float:
        rng = random.Random(f"{self.seed}|{self.trial}|{v.kind.name}|{v.text()}")
        return rng.uniform(-2.0, 2.0)

    def __call__(self, vid: int) -> float:
        val = self.values.get(vid)
        if val is not None:
            return val
        v = var_of(vid)
        if vid in self._busy:
            raise OracleError(f"cyclic definition of {v}")
        self._busy.add(vid)
        try:
            val = self._compute(v)
        finally:
            self._busy.discard(vid)
        self.values[vid] = val
        return val

    def _solve_affine(self, pair) -> float:
        e0, a = pair
        av, _ = a.evaluate(self, GUARD)
        if abs(av) <= GUARD:
            raise GuardedDenominator("solved coefficient near zero")
        ev, _ = e0.evaluate(self, GUARD)
        return -ev / av

    def _compute(self, v) -> float:
        if v.kind == Kind.SPECTRAL and self.lam is not None:
            return self.lam
        if v.kind == Kind.CONST:
            pair = self.deriv.constant_for(v)
            if pair is not None:
                return self._solve_affine(pair)
        if v.kind == Kind.JET:
            pair = self.deriv.eq_for(v)
            if pair is not None:
                return self._solve_affine(pair)
        if v.kind == Kind.NONLOCAL:
            E = self.deriv.nonlocal_for(v)
            if E is not None:
                val, _ = E.evaluate(self, GUARD)
                return val
        if v.kind == Kind.UNKNOWN:
            raise OracleError(f"undetermined coefficient {v} in a claim")
        return self._draw(v)

    def eval(self, e) -> tuple[float, float]:
        return as_expression(e).evaluate(self, GUARD)

    def at_lambda(self, lam: float) -> "JetPoint":
        return JetPoint(self.deriv, self.seed, self.trial, lam)


def sample_point(ctx: Context, order: int = 3, seed: int = 0, trial=0) -> JetPoint:
    """A point whose free coordinates up to ``order`` are drawn and guarded.

    Every jet of order <= ``order`` of each dependent is evaluated eagerly so
    that a degenerate draw is rejected here rather than later.
    """
    from itertools import combinations_with_replacement

    deriv = _Derivations(ctx)
    deps = ctx.system.dependents if ctx.system else ()
    for attempt in range(RESAMPLE):
        pt = JetPoint(deriv, seed, (trial, attempt))
        try:
            for dep in deps:
                for k in range(order + 1):
                    for idx in combinations_with_replacement(ctx.indeps, k):
                        pt(S.jet(dep, idx).id)
            return pt
        except GuardedDenominator:
            continue
    raise OracleError("resampling exhausted")


# claims ------------------------------------------------------------------


@dataclass
class OracleResult:
    passed: bool
    max_residual: float
    max_ratio: float
    points: int
    details: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed


def oracle_verify(claim, ctx: Context, trials: int = 20, tol: float = 1e-9, seed: int = 0,
                  expect_nonzero: bool = False) -> OracleResult:
    """Evaluate ``claim(point) -> [(value, scale), ...]`` at random points.

    A trial passes when every ``|value| < tol * (1 + scale)``. With
    ``expect_nonzero`` the claim is that the values do not vanish (used for
    determinants): it passes when some value exceeds that bound.
    """
    deriv = _Derivations(ctx)
    worst = 0.0
    worst_ratio = 0.0
    ok = True
    big = False
    done = 0
    for t in range(trials):
        for attempt in range(RESAMPLE):
            pt = JetPoint(deriv, seed, (t, attempt))
            try:
                vals = claim(pt)
                break
            except GuardedDenominator:
                continue
        else:
            raise OracleError("evaluation hits a guarded denominator after resampling")
        done += 1
        for v, s in vals:
            if not math.isfinite(v):
                ok = False
                continue
            worst = max(worst, abs(v))
            r = abs(v) / (1.0 + s)
            worst_ratio = max(worst_ratio, r)
            if r >= tol:
                ok = False
                big = True
    if expect_nonzero:
        return OracleResult(big, worst, worst_ratio, done)
    return OracleResult(ok, worst, worst_ratio, done)


def _lambda_values(pt: JetPoint) -> list[float]:
    base = random.Random(f"{pt.seed}|{pt.trial}|lambda-set")
    return [base.uniform(-2.0, 2.0) for _ in range(LAMBDAS)]


def test_vector(n: int) -> list[Expression]:
    if n == 1:
        return [Expression.var(S.jet(TEST_FN))]
    return [Expression.var(S.jet(f"{TEST_FN}{k}")) for k in range(n)]


def _apply_raw(op: TDOperator, vec, raw: Context):
    return apply_to(op, vec, raw)


def chain(raw: Context, ops, vec):
    """Apply ``ops[-1]`` first, then ``ops[-2]``, ...; no composition is formed."""
    for op in reversed(ops):
        vec = _apply_raw(op, vec, raw)
    return vec


def _eval_vec(pt, vec):
    return [pt.eval(e) for e in vec]


def _over_lambdas(pt, fn):
    out = []
    for lam in _lambda_values(pt):
        out.extend(fn(pt.at_lambda(lam)))
    return out


def commutator_claim(ctx: Context, P: TDOperator, Q: TDOperator, lambdas: bool = True):
    raw = Context.free(ctx.indeps)
    g = test_vector(Q.cols)
    PQ = chain(raw, [P, Q], g)
    QP = chain(raw, [Q, P], g)
    res = [a - b for a, b in zip(PQ, QP)]

    def claim(pt):
        if lambdas:
            return _over_lambdas(pt, lambda p: _eval_vec(p, res))
        return _eval_vec(pt, res)

    return claim


def linearization_apply(ctx: Context, vec, adjoint_: bool = False):
    """``l_F(vec)`` by the chain rule (raw), or ``l_F^+(vec)`` via the raw adjoint."""
    raw = Context.free(ctx.indeps)
    F = ctx.system.raw_equations or ctx.system.equations
    deps = ctx.system.dependents
    if not adjoint_:
        return [directional_derivative(f, vec, raw, deps) for f in F]
    from .jets import linearize
    from .operators import adjoint

    return apply_to(adjoint(linearize(F, raw, deps), raw), vec, raw)


def factor_claim(ctx: Context, lhs_parts, K_parts, Y: TDOperator | None):
    """``lhs(g) = Y(K(g))`` where ``lhs_parts`` / ``K_parts`` give the sides on ``g``.

    Without a known factor, the claim is that a zero-order scalar factor
    exists: the ratio ``lhs(g)/K(g)`` does not depend on the test vector.
    """
    raw = Context.free(ctx.indeps)

    if Y is not None:
        def claim(pt):
            g = test_vector(1)
            lhs = lhs_parts(raw, g)
            rhs = chain(raw, [Y], K_parts(raw, g))
            return _over_lambdas(pt, lambda p: _eval_vec(p, [a - b for a, b in zip(lhs, rhs)]))
        return claim

    def claim(pt):
        g = test_vector(1)
        lhs = lhs_parts(raw, g)[0]
        K = K_parts(raw, g)[0]
        out = []
        ratios = []
        for k in range(3):
            sub = JetPoint(pt.deriv, pt.seed, (pt.trial, "g", k))
            sub.values = dict(pt.values)
            for vid in list(sub.values):
                if var_of(vid).name == TEST_FN:
                    del sub.values[vid]
            a, sa = sub.eval(lhs)
            b, sb = sub.eval(K)
            ratios.append((a, b, sa, sb))
        a0, b0, sa0, sb0 = ratios[0]
        for a, b, sa, sb in ratios[1:]:
            # a/b = a0/b0  <=>  a*b0 - a0*b = 0
            out.append((a * b0 - a0 * b, (1 + sa) * (1 + sb0) + (1 + sa0) * (1 + sb)))
        return out

    return claim


def expression_claim(ctx: Context, exprs):
    exprs = [as_expression(e) for e in exprs]

    def claim(pt):
        return _over_lambdas(pt, lambda p: _eval_vec(p, exprs))

    return claim
