import pytest
from hypothesis import given, settings

from volta_mini import serialize
from volta_mini import symexpr as sx

from strategies import exprs

x, y = sx.var("x"), sx.var("y")


def test_grammar_is_bit_exact():
    e = sx.add(sx.exp(x), sx.const(1))
    text = serialize.dumps(e)
    lines = text.strip().splitlines()
    assert lines[-1].startswith("ROOT ")
    for line in lines[:-1]:
        idx, op, *rest = line.split()
        assert idx.isdigit()
        assert op in {"VAR", "CONST", "ADD", "MUL", "NEG", "DIV", "EXP", "MAX", "NEGINF"}
    assert "CONST 1/1" in text


def test_sharing_is_preserved():
    s = sx.exp(sx.add(x, y))
    e = sx.mk(sx.MAX, sx.mul(s, x), sx.add(s, y))
    text = serialize.dumps(e)
    assert sum(" EXP " in f" {l} " for l in text.splitlines()) == 1


@settings(max_examples=200, deadline=None)
@given(exprs())
def test_roundtrip_canonical(e):
    c = sx.canonicalize(e)
    assert serialize.loads(serialize.dumps(c)) is c


def test_env_roundtrip_and_empty():
    env = {"y[0]": sx.exp(x), "y[1]": sx.div(sx.exp(x), sx.add(sx.exp(x), sx.exp(y)))}
    assert serialize.loads_env(serialize.dumps_env(env)) == env
    empty = serialize.dumps_env({})
    assert serialize.loads_env(empty) == {}
    assert not [l for l in empty.splitlines() if l and not l.startswith("ROOT")]


def test_neg_inf_roundtrip():
    e = sx.mk(sx.MAX, sx.NEG_INF, x, y)
    assert serialize.loads(serialize.dumps(sx.maximum(x, y))) is sx.maximum(x, y)
    assert serialize.loads("0 NEGINF\nROOT 0\n") is sx.NEG_INF
    assert e is sx.maximum(x, y)


@pytest.mark.parametrize(
    "text",
    [
        "0 VAR x\n",  # no root
        "0 FOO x\nROOT 0\n",
        "0 ADD 1\nROOT 0\n",  # forward reference
        "0 CONST 1/0\nROOT 0\n",
        "0 VAR x\nROOT 3\n",
        "0 DIV 0\nROOT 0\n",
    ],
)
def test_malformed_input(text):
    with pytest.raises(serialize.FormatError):
        serialize.loads(text)
