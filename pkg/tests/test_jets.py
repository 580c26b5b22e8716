import pytest

from jetop import symbols as S
from jetop.dsl import SymbolTable, parse
from jetop.jets import (Context, InvalidOrientation, check_invariance, directional_derivative, linearize,
                        make_system, normal_form, total_derivative)
from jetop.operators import apply_to, parse_operator

PT = SymbolTable.simple(indep="x y t", dep="u")
PAVLOV = "u[y,y] + u[x,t] + u[x]*u[x,y] - u[y]*u[x,x]"


@pytest.fixture(scope="module")
def pavlov():
    sysm = make_system("pavlov", PT, [parse(PAVLOV, PT)], [S.jet("u", ["y", "y"])])
    return Context(sysm)


def p(text, t=PT):
    return parse(text, t)


def test_total_derivative_free():
    ctx = Context.free(("x", "y", "t"))
    assert total_derivative(p("u*u[y]"), "x", ctx) == p("u[x]*u[y] + u*u[x,y]")
    assert total_derivative(p("x"), "x", ctx) == p("1")
    assert total_derivative(p("y"), "x", ctx) == p("0")


def test_pavlov_solved_derivative(pavlov):
    assert normal_form(p("u[y,y]"), pavlov) == p("-u[x,t] - u[x]*u[x,y] + u[y]*u[x,x]")


def test_prolonged_normal_form(pavlov):
    free = Context.free(("x", "y", "t"))
    rhs = p("-u[x,t] - u[x]*u[x,y] + u[y]*u[x,x]")
    assert normal_form(p("u[x,y,y]"), pavlov) == normal_form(free.D(rhs, "x"), pavlov)


def test_equation_vanishes(pavlov):
    F = pavlov.system.equations[0]
    assert normal_form(F, pavlov).is_zero()
    for d in ("x", "y", "t"):
        assert normal_form(pavlov.D(F, d), pavlov).is_zero()


def test_pavlov_linearization(pavlov):
    free = Context.free(("x", "y", "t"))
    lF = linearize(pavlov.system.equations, free)
    want = parse_operator("D[y]*D[y] + D[x]*D[t] + u[x]*D[x]*D[y] - u[y]*D[x]*D[x] + u[x,y]*D[x] - u[x,x]*D[y]",
                          PT, free)
    assert lF == want


def test_identity_linearization():
    free = Context.free(("x",))
    assert linearize([p("u")], free) == parse_operator("1", PT, free)


def test_heavenly_linearization(corpus):
    ws = corpus("heavenly")
    free = Context.free(ws.system.independents)
    T = ws.table
    lF = linearize(ws.system.raw_equations, free)
    want = parse_operator(
        "a*u[x,y]*D[z]*D[t] + a*u[z,t]*D[x]*D[y] + b*u[x,z]*D[y]*D[t] + b*u[y,t]*D[x]*D[z]"
        " + c*u[x,t]*D[y]*D[z] + c*u[y,z]*D[x]*D[t]", T, free)
    assert lF == want


def test_directional_derivative_examples():
    free = Context.free(("x", "y"))
    U = p("w", SymbolTable.simple(indep="x y", dep="u w"))
    T = SymbolTable.simple(indep="x y", dep="u w")
    assert directional_derivative(p("u[x]", T), [U], free, deps=("u",)) == p("w[x]", T)
    assert directional_derivative(p("u[x]*u[y]", T), [U], free, deps=("u",)) == p("w[x]*u[y] + u[x]*w[y]", T)


def test_linearization_matches_directional_derivative(pavlov):
    T = SymbolTable.simple(indep="x y t", dep="u w")
    free = Context.free(("x", "y", "t"))
    U = [p("w*u[x] + w[y]", T)]
    F = pavlov.system.equations
    lf = linearize(F, free, deps=("u",))
    assert apply_to(lf, U, free)[0] == directional_derivative(F[0], U, free, deps=("u",))


def test_translation_symmetry(pavlov):
    assert check_invariance(p("u[x]"), pavlov)
    assert check_invariance(p("u[t]"), pavlov)
    assert not check_invariance(p("u[x]^2"), pavlov)


def test_orientation_errors():
    T = SymbolTable.simple(indep="x y", dep="u")
    with pytest.raises(InvalidOrientation, match="does not occur"):
        make_system("s", T, [p("u[x,y] + u", T)], [S.jet("u", ["x", "x"])])
    with pytest.raises(InvalidOrientation, match="not linear"):
        make_system("s", T, [p("u[x,y]^2 + u", T)], [S.jet("u", ["x", "y"])])
    with pytest.raises(InvalidOrientation, match="contains"):
        make_system("s", T, [p("u[x] + u[x,x]", T)], [S.jet("u", ["x"])])


def test_constants_from_constraints(corpus):
    ws = corpus("heavenly")
    ctx = ws.context(False)
    assert ctx.nf(parse("a + b + c", ws.table)).is_zero()
    assert ctx.nf(parse("a", ws.table)) == parse("-b - c", ws.table)
