import pytest

from jetop.covering import compatibility_check
from jetop.dsl import ParseError, parse
from jetop.workspace import CORPUS, load, load_corpus, parse_workspace, resolve_path

HEAD = "system s\n  indep x y\n  dep u\n  eq u[x,y]\n  solve u[x,y]\nend\n"


def err(text):
    with pytest.raises(ParseError) as info:
        parse_workspace(text, "t.its")
    return info.value


def test_corpus_names():
    assert CORPUS == ("pavlov", "heavenly", "mas", "fk6d", "abc", "universal")
    for name in CORPUS:
        ws = load_corpus(name)
        assert ws.system is not None


def test_unknown_corpus_entry():
    with pytest.raises(KeyError, match="nonesuch"):
        load_corpus("nonesuch")


def test_heavenly_constraint(corpus):
    ws = corpus("heavenly")
    assert list(ws.table.constants) == ["a", "b", "c"]
    assert len(ws.system.constraints) == 1
    ctx = ws.context(False)
    assert ctx.nf(parse("a + b + c", ws.table)).is_zero()


def test_fk6d_dimensions(corpus):
    ws = corpus("fk6d")
    assert len(ws.system.independents) == 6
    assert "chi" in ws.covering.variables


def test_contents(corpus):
    assert set(corpus("pavlov").ros) == {"pavlov_ro"}
    assert "w" in corpus("mas").covering.variables
    assert len(corpus("heavenly").lax) == 2
    assert not corpus("abc").ros and not corpus("universal").ros


def test_minimal_file():
    ws = parse_workspace(HEAD, "t.its")
    assert ws.system.name == "s"
    assert ws.covering is None or not ws.covering.variables


def test_comments_and_blank_lines():
    ws = parse_workspace("# header\n\n" + HEAD.replace("dep u", "dep u   # field"), "t.its")
    assert list(ws.system.dependents) == ["u"]


@pytest.mark.parametrize("text, line, col, msg", [
    (HEAD + "op A = D[q]\n", 7, 10, "not an independent"),
    (HEAD.replace("solve u[x,y]", "solve u[x,x]"), 5, 9, "does not occur"),
    (HEAD[:-4], 1, 1, "not closed"),
    ("op A = D[x]\n", 1, 1, "system block"),
    (HEAD + "ro r\n  A P Q\nend\n", 8, 5, "unknown operator"),
    (HEAD + "blah\n", 7, 1, "unknown keyword"),
    (HEAD + "op A = D[x]\nop A = D[y]\n", 8, None, "twice"),
    (HEAD + "nonlocal p\n  rel x: p[y]\n  rel x: p\nend\n", 9, None, "duplicated"),
])
def test_errors(text, line, col, msg):
    e = err(text)
    assert msg in str(e)
    assert e.line == line
    if col is not None:
        assert e.col == col


def test_broken_fixture(fixture_path):
    with pytest.raises(ParseError) as info:
        load(fixture_path("broken.its"))
    assert (info.value.line, info.value.col) == (5, 21)


def test_incompatible_covering_loads(fixture_path):
    ws = load(fixture_path("pavlov_bad_covering.its"))
    assert ws.covering.status == "unchecked"
    assert not compatibility_check(ws.covering)
    assert ws.covering.status == "incompatible"
    assert ws.covering.witness


def test_resolve_bundled_path(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert resolve_path("corpus/pavlov.its").exists()
    assert resolve_path("corpus/broken.its").exists()
