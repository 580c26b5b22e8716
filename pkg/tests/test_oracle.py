import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jetop import oracle as O
from jetop import symbols as S
from jetop.cli import oracle_claims
from jetop.dsl import parse
from jetop.operators import parse_operator
from jetop.workspace import load

EQ_TOL = 1e-9


def _residual(pt, e):
    v, s = pt.eval(e)
    return abs(v) / (1 + s)


def test_pavlov_point_satisfies_equation(corpus):
    ws = corpus("pavlov")
    ctx = ws.context(False)
    pt = O.sample_point(ctx, order=3, seed=1)
    rhs = ws.system.orientation[ws.system.leads[0]]
    uyy = pt(S.jet("u", ["y", "y"]).id)
    val, _ = pt.eval(rhs)
    assert uyy == pytest.approx(val, rel=1e-12)
    free = ctx.__class__.free(ctx.indeps)
    F = ws.system.equations[0]
    for dirs in ([], ["x"], ["y"], ["t"], ["x", "y"]):
        assert _residual(pt, free.Dseq(F, dirs)) < EQ_TOL


def test_heavenly_point(corpus):
    ws = corpus("heavenly")
    ctx = ws.context(False)
    pt = O.sample_point(ctx, order=3, seed=5)
    assert _residual(pt, ws.system.raw_equations[0]) < EQ_TOL
    assert _residual(pt, parse("a + b + c", ws.table)) < EQ_TOL


def test_sampling_is_deterministic(corpus):
    ctx = corpus("heavenly").context(False)
    a = O.sample_point(ctx, order=2, seed=7)
    b = O.sample_point(ctx, order=2, seed=7)
    c = O.sample_point(ctx, order=2, seed=8)
    assert a.values == b.values
    assert a.values != c.values


def test_draws_in_range(corpus):
    ctx = corpus("pavlov").context(False)
    pt = O.sample_point(ctx, order=1, seed=3)
    for vid in (S.jet("u", ["x"]).id, S.jet("u", ["t"]).id):
        assert -2.0 <= pt(vid) <= 2.0


def test_heavenly_a_commutator(corpus):
    ws = corpus("heavenly")
    ctx = ws.context()
    claim = O.commutator_claim(ctx, ws.raw_operator("A1"), ws.raw_operator("A2"), lambdas=False)
    res = O.oracle_verify(claim, ctx, trials=20)
    assert res.passed and res.max_ratio < 1e-9 and res.points == 20


def test_flipped_b1_is_far_from_zero(fixture_path):
    ws = load(fixture_path("pavlov_flipped_b1.its"))
    ((label, claim, ctx, _, sym),) = oracle_claims(ws, "ro:pavlov_ro:ii")
    assert not sym
    deriv = O._Derivations(ctx)
    for t in range(20):
        vals = claim(O.JetPoint(deriv, 0, (t, 0)))
        assert max(abs(v) for v, _ in vals) > 1e-2
    assert not O.oracle_verify(claim, ctx)


def test_zero_claim(corpus):
    ws = corpus("pavlov")
    ((_, claim, ctx, _, sym),) = oracle_claims(ws, "0 = 0")
    res = O.oracle_verify(claim, ctx)
    assert sym and res.passed and res.max_residual == 0.0


def test_expect_nonzero(corpus):
    ws = corpus("pavlov")
    ctx = ws.context()
    one = O.expression_claim(ctx, [parse("1", ws.table)])
    zero = O.expression_claim(ctx, [parse("0", ws.table)])
    assert O.oracle_verify(one, ctx, expect_nonzero=True)
    assert not O.oracle_verify(zero, ctx, expect_nonzero=True)


def test_guard_resamples_away_from_poles(corpus):
    ws = corpus("pavlov")
    ctx = ws.context()
    claim = O.expression_claim(ctx, [parse("u[x]/u[x] - 1", ws.table)])
    assert O.oracle_verify(claim, ctx).passed


def test_undetermined_coefficient_is_an_error(corpus):
    ws = corpus("pavlov")
    ctx = ws.context()
    (c,) = S.fresh_unknowns("q", 1)
    from jetop.expr import Expression

    claim = O.expression_claim(ctx, [Expression.var(c)])
    with pytest.raises(O.OracleError):
        O.oracle_verify(claim, ctx)


def test_nonlocal_values_follow_relations(corpus):
    ws = corpus("pavlov")
    ctx = ws.context()
    pt = O.sample_point(ctx, seed=2).at_lambda(0.75)
    psi_y = pt(S.jet("psi", ["y"], nonlocal_=True).id)
    want, _ = pt.eval(parse("(lambda - u[x])*psi[x]", ws.table))
    assert math.isclose(psi_y, want, rel_tol=1e-12)


def test_raw_chain_matches_symbolic_application(corpus):
    ws = corpus("pavlov")
    ctx = ws.context()
    B1 = ws.raw_operator("B1")
    g = O.test_vector(1)
    free = ctx.__class__.free(ctx.indeps)
    (direct,) = O.chain(free, [B1], g)
    want = parse_operator("D[y] + u[x]*D[x] - u[x,x]", ws.table, free)
    assert direct == want.apply(g, free)[0]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), trials=st.integers(1, 12))
def test_more_trials_keep_a_pass(corpus, seed, trials):
    ws = corpus("heavenly")
    claims = oracle_claims(ws, "ro:heavenly_ro:ii")
    ((_, claim, ctx, _, _),) = claims
    assert O.oracle_verify(claim, ctx, trials=trials, seed=seed).passed
    assert O.oracle_verify(claim, ctx, trials=2 * trials, seed=seed).passed
