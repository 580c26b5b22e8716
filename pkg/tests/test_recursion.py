import pytest

from jetop.dsl import parse
from jetop.jets import Context, check_invariance
from jetop.operators import TDOperator, parse_operator
from jetop.recursion import ROError, ROSpec, apply, build_lax_from_ro, find_factor, ro_relations, verify
from jetop.workspace import load


def status(rep):
    return {c.name: c.status for c in rep.checks}


def test_pavlov_verify(corpus):
    ws = corpus("pavlov")
    ctx = ws.context(False)
    rep = verify(ws.rospec(), ctx)
    assert rep.passed
    assert rep.L == TDOperator.scalar(ctx.indeps, -1)
    assert rep.M == TDOperator.scalar(ctx.indeps, 1)


def test_flipped_b1_fails_ii(fixture_path):
    ws = load(fixture_path("pavlov_flipped_b1.its"))
    rep = verify(ws.rospec(), ws.context(False))
    assert not rep.passed
    assert status(rep)["ii"] == "fail"
    ii = next(c for c in rep.checks if c.name == "ii")
    assert ii.residual != "0"


def test_given_factor_is_checked(corpus):
    ws = corpus("pavlov")
    ctx = ws.context(False)
    spec = ws.rospec()
    good = spec.with_factors(TDOperator.scalar(ctx.indeps, -1), TDOperator.scalar(ctx.indeps, 1))
    assert verify(good, ctx).passed
    bad = spec.with_factors(TDOperator.scalar(ctx.indeps, 1), None)
    assert status(verify(bad, ctx))["ii"] == "fail"


def test_heavenly_factor_is_minus_uzt(corpus):
    ws = corpus("heavenly")
    ctx = ws.context(False)
    spec = ws.rospec()
    rep = verify(spec, ctx)
    assert rep.passed
    uzt = parse_operator("u[z,t]", ws.table, ctx)
    assert (rep.M + uzt).normal_form(ctx).is_zero()
    assert status(verify(spec.with_factors(None, uzt), ctx))["iii"] == "fail"


def test_swapping_labels_negates_factors(corpus):
    ws = corpus("mas")
    ctx = ws.context(False)
    spec = ws.rospec()
    rep = verify(spec, ctx)
    rep2 = verify(spec.swapped(), ctx)
    assert rep2.passed
    assert (rep.L + rep2.L).is_zero() and (rep.M + rep2.M).is_zero()


def test_find_factor_none_for_incompatible(corpus):
    ws = corpus("pavlov")
    ctx = ws.context(False)
    T = ws.table
    K = parse_operator("D[x]", T, ctx)
    target = parse_operator("D[y]*D[y]*D[y]", T, ctx)
    assert find_factor(target, K, ctx) is None


def test_order_limit(corpus):
    ws = corpus("pavlov")
    ctx = ws.context(False)
    spec = ws.rospec()
    spec = ROSpec(parse_operator("D[x]*D[x]", ws.table, ctx), spec.A2, spec.B1, spec.B2)
    with pytest.raises(ROError):
        verify(spec, ctx)


def test_pavlov_lax_from_ro(corpus):
    ws = corpus("pavlov")
    ctx = ws.context(False)
    lax = build_lax_from_ro(ws.rospec(), ctx)
    assert lax.passed
    L1, L2 = lax.ops
    assert L1 == parse_operator("-D[y] + (lambda - u[x])*D[x] + u[x,x]", ws.table, ctx)
    assert L2 == parse_operator("D[t] + lambda*D[y] - u[y]*D[x] + u[x,y]", ws.table, ctx)


def test_trivial_lax_from_ro(corpus):
    ws = corpus("mas")
    ctx = ws.context(False)
    z = TDOperator.zero(ctx.indeps)
    spec = ROSpec(parse_operator("D[x]", ws.table, ctx), parse_operator("D[y]", ws.table, ctx), z, z)
    assert build_lax_from_ro(spec, ctx).passed


def test_pavlov_relations(corpus):
    ws = corpus("pavlov")
    ctx = ws.context(False)
    rel = ro_relations(ws.rospec(), ctx)
    T = ws.table.__class__(list(ws.table.independents), ["u", "U", "V"])
    assert rel["x"] == parse("U[y] + u[x]*U[x] - u[x,x]*U", T)


def test_pavlov_apply_constant_seed(corpus):
    ws = corpus("pavlov")
    ctx = ws.context(False)
    res = apply(ws.rospec(), parse("1", ws.table), ctx)
    assert res.remainder is None
    assert res.local == parse("-u[x]", ws.table)
    T = ws.table.__class__(list(ws.table.independents), ["u", "V"])
    assert res.relations == {"x": parse("-u[x,x]", T), "y": parse("-u[x,y]", T)}
    assert check_invariance(res.result, ctx)


def test_mas_apply(corpus):
    ws = corpus("mas")
    ctx = Context(ws.system)
    res = apply(ws.rospec(), parse("u[x]", ws.table), ctx)
    T = ws.table
    assert res.local == parse("-1/2*u[x]^2", T)
    assert res.remainder is not None
    rel = res.remainder.relations
    w = res.remainder.name
    assert rel["y"] == parse("u[y]*u[x,x]", T)
    assert rel["z"] == parse("u[z]*u[x,x] - u[x,t]", T)
    assert res.result == parse("-1/2*u[x]^2", T) + parse(w, T.__class__(T.independents, T.dependents,
                                                                          nonlocals=[w]))


def test_apply_reuses_defined_potential(corpus):
    ws = corpus("mas")
    res = apply(ws.rospec(), parse("u[x]", ws.table), ws.context())
    assert res.remainder.name == "w"
    assert any(c.name == "nonlocal" for c in res.checks)
    res2 = apply(ws.rospec(), res.result, Context(ws.system, res.covering))
    assert res2.remainder is not None and res2.remainder.name == "w2"


def test_apply_rejects_non_symmetry(corpus):
    ws = corpus("mas")
    with pytest.raises(ROError, match="not a symmetry"):
        apply(ws.rospec(), parse("u[x]^2", ws.table), Context(ws.system))


RECT = """system r
  indep x y
  dep u
  eq u[x,x]
  eq u[y,y]
  solve u[x,x]
  solve u[y,y]
end
op A1 = D[x]
op A2 = D[y]
op B1 = D[y]
op B2 = D[x]
ro r
  A A1 A2
  B B1 B2
end
"""


def test_rectangular_system_factor_shapes():
    from jetop.workspace import parse_workspace

    ws = parse_workspace(RECT, "r.its")
    rep = verify(ws.rospec(), ws.context(False))
    st = status(rep)
    assert st["i"] == "pass" and st["ii"] == "pass"
    assert (rep.L.rows, rep.L.cols) == (1, 2)
    assert rep.L.to_text() == "[[1, -1]]"
    # no first-order M recovers both equations from D_y^2 - D_x^2
    assert st["iii"] == "fail"
    iv = next(c for c in rep.checks if c.name == "iv")
    assert iv.residual == "0"
