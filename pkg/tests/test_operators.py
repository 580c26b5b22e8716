import pytest

from jetop.dsl import SymbolTable
from jetop.jets import Context, linearize
from jetop.operators import (DimensionError, TDOperator, adjoint, apply_to, commutator, compose, lambda_split,
                             parse_operator)

T = SymbolTable.simple(indep="x y t", dep="u")
FREE = Context.free(("x", "y", "t"))


def op(text):
    return parse_operator(text, T, FREE)


def test_compose_leibniz():
    assert compose(op("D[x]"), op("u"), FREE) == op("u*D[x] + u[x]")
    assert compose(op("D[x]"), op("D[y]"), FREE) == op("D[x]*D[y]")


def test_commutators():
    assert commutator(op("D[x]"), op("D[y]"), FREE).is_zero()
    assert commutator(op("D[x]"), op("u*D[y]"), FREE) == op("u[x]*D[y]")


def test_adjoints():
    assert adjoint(op("D[x]"), FREE) == op("-D[x]")
    assert adjoint(op("u*D[x]"), FREE) == op("-u*D[x] - u[x]")
    assert adjoint(op("D[x]*D[y]"), FREE) == op("D[x]*D[y]")
    Q = op("u[x]*D[x]*D[x]*D[y] + u*D[t] + u[y]")
    assert adjoint(adjoint(Q, FREE), FREE) == Q


def test_apply_pavlov_b1():
    B1 = op("D[y] + u[x]*D[x] - u[x,x]")
    (r,) = apply_to(B1, [op("u[x]").scalar_coeff()], FREE)
    assert r == op("u[x,y]").scalar_coeff()


def test_apply_identity():
    v = op("u[x]*u[y]").scalar_coeff()
    assert apply_to(TDOperator.identity(FREE.indeps), [v], FREE) == [v]


def test_lambda_split_pavlov():
    A, B = lambda_split(op("-D[y] + (lambda - u[x])*D[x] + u[x,x]"))
    assert A == op("D[x]")
    assert B == op("D[y] + u[x]*D[x] - u[x,x]")


def test_lambda_split_free_operator():
    Q = op("u*D[x] + 1")
    A, B = lambda_split(Q)
    assert A.is_zero()
    assert B == -Q


def test_lambda_split_rejects_quadratic():
    with pytest.raises(ValueError):
        lambda_split(op("lambda^2*D[x]"))


def test_heavenly_factor_identity(corpus):
    ws = corpus("heavenly")
    ctx = ws.context(False)
    T4 = ws.table
    lF = linearize(ws.system.equations, ctx)
    uzt = parse_operator("u[z,t]", T4, ctx)
    inv = parse_operator("1/u[z,t]", T4, ctx)
    assert (compose(uzt, compose(inv, lF, ctx), ctx) - lF).normal_form(ctx).is_zero()


def test_heavenly_a_operators_commute(corpus):
    ws = corpus("heavenly")
    ctx = ws.context(False)
    assert commutator(ws.operator("A1").op, ws.operator("A2").op, ctx).normal_form(ctx).is_zero()


def test_matrix_operators():
    M = TDOperator.matrix(FREE.indeps, [[op("D[x]").scalar_coeff(), op("u").scalar_coeff()],
                                        [op("0").scalar_coeff(), op("1").scalar_coeff()]])
    assert (M.rows, M.cols) == (2, 2)
    with pytest.raises(DimensionError):
        compose(M, op("D[x]"), FREE)


def test_dimension_mismatch_on_add():
    with pytest.raises(DimensionError):
        op("D[x]") + TDOperator.identity(FREE.indeps, 2)
