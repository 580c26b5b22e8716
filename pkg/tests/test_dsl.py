import pytest

from jetop import symbols as S
from jetop.dsl import ParseError, SymbolTable, parse, split_top, tokenize
from jetop.jets import Context
from jetop.operators import TDOperator, parse_operator

T = SymbolTable.simple(indep="x y", dep="u", const="a", nonlocal_="psi")
CTX = Context.free(("x", "y"))


def test_grammar_reading():
    e = parse("u[y,y] + u[x]*u[x,y]", T)
    names = {v.text() for v in e.free_vars()}
    assert names == {"u[y,y]", "u[x]", "u[x,y]"}


@pytest.mark.parametrize("text", [
    "u[x]*u[y]", "-1/2*u[x]^2 + psi", "(u[x] + a)/(u[y] - 1)", "lambda^2*u[x,x]", "x*y + 3",
])
def test_print_parse_identity(text):
    e = parse(text, T)
    assert parse(e.to_text(), T) == e
    assert parse(e.to_text(), T).to_text() == e.to_text()


def test_nonlocal_jets():
    e = parse("psi[x]", T)
    (v,) = e.free_vars()
    assert v.kind == S.Kind.NONLOCAL and v.index == ("x",)


@pytest.mark.parametrize("text, col, msg", [
    ("u[x] + w", 8, "unknown symbol"),
    ("a[x]", 1, "non-dependent"),
    ("u[q]", 3, "not an independent"),
    ("u[x] +", 7, ""),
    ("(u[x]", 6, ""),
    ("u[x] $ 1", 6, ""),
])
def test_errors_carry_position(text, col, msg):
    with pytest.raises(ParseError) as info:
        parse(text, T, line=4)
    assert info.value.line == 4
    assert info.value.col == col
    assert msg in str(info.value)


def test_column_offset():
    with pytest.raises(ParseError) as info:
        parse("u[x] + w", T, line=2, col0=10)
    assert info.value.col == 17


def test_reserved_names():
    t = SymbolTable.simple(indep="x", dep="u")
    with pytest.raises(ValueError):
        t.declare("lambda", S.Kind.CONST)
    with pytest.raises(ValueError):
        t.declare("u", S.Kind.CONST)


def test_operator_text():
    op = parse_operator("D[y] + u[x]*D[x] - u[x,x]", T, CTX)
    assert isinstance(op, TDOperator)
    assert op.order == 1
    again = parse_operator(op.to_text(), T, CTX)
    assert again == op


def test_operator_products_expand():
    op = parse_operator("D[x]*D[y] - D[y]*D[x]", T, CTX)
    assert op.is_zero()
    op = parse_operator("D[x]*u[x]", T, CTX)
    assert op == parse_operator("u[x]*D[x] + u[x,x]", T, CTX)


def test_split_top_respects_brackets():
    parts = [s for s, _ in split_top("u[x,y], (a, b), c")]
    assert [p.strip() for p in parts] == ["u[x,y]", "(a, b)", "c"]


def test_tokenize_positions():
    toks = tokenize("u[x] + 2", line=3)
    assert [t.col for t in toks if t.kind != "end"][:2] == [1, 2]


@pytest.mark.parametrize("text", ["u[x]^(1/2)", "u[x]^1.5", "exp(u)"])
def test_non_rational_input_is_rejected(text):
    with pytest.raises(ParseError):
        parse(text, T)


def test_parenthesised_exponent():
    assert parse("u[x]^(-2)", T) == parse("1/u[x]^2", T)
