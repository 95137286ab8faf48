from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rxinfer.core import TypeConfiguration, enumerate_type_configs, lattice
from rxinfer.hypothesis import (
    EmptyHypothesis, HypothesisSyntaxError, parse_expression, parse_hypothesis,
)
from rxinfer.quantities import INF, compare_value, get_quantity, parse_operand, value_range


def test_member_counts_at_100():
    assert len(parse_hypothesis("killed == 0", 100)) == 5151
    assert len(parse_hypothesis("killed == 0 and saved >= 1", 100)) == 5050
    assert len(parse_hypothesis("fisher_null", 100)) == 101


def test_ratio_conventions():
    h = parse_hypothesis("saved / killed >= 5", 100)
    assert TypeConfiguration(0, 0, 100, 0) in h
    assert TypeConfiguration(100, 0, 0, 0) not in h
    assert TypeConfiguration(0, 10, 50, 40) in h
    assert TypeConfiguration(0, 10, 49, 41) not in h
    q = parse_operand("saved / killed")
    assert q.value(TypeConfiguration(0, 0, 3, 1)) == INF
    assert q.value(TypeConfiguration(4, 0, 0, 0)) is None


def test_presets():
    lat = lattice(6)
    fisher = parse_hypothesis("fisher_null", 6)
    neyman = parse_hypothesis("neyman_null", 6)
    for r in range(lat.size):
        t = lat.theta(r)
        assert (t in fisher) == (t.defier == 0 and t.complier == 0)
        assert (t in neyman) == (t.defier == t.complier)


def test_precedence_and_parentheses():
    a = parse_hypothesis("killed == 0 or saved == 0 and always >= 2", 6)
    b = parse_hypothesis("killed == 0 or (saved == 0 and always >= 2)", 6)
    c = parse_hypothesis("(killed == 0 or saved == 0) and always >= 2", 6)
    assert np.array_equal(a.mask, b.mask)
    assert not np.array_equal(a.mask, c.mask)


def test_avg_effect_is_exact():
    h = parse_hypothesis("avg_effect >= 0.3", 10)
    for t in enumerate_type_configs(10):
        assert (t in h) == (Fraction(t.complier - t.defier, 10) >= Fraction(3, 10))
    assert len(parse_hypothesis("avg_effect < -0.5", 10)) > 0


@pytest.mark.parametrize("text,pos", [
    ("killed = 0", 7),
    ("killed == ", 10),
    ("kiled == 0", 0),
    ("killed == 0 and", 15),
    ("(killed == 0", 12),
    ("killed == 0 )", 12),
    ("killed == 0 # 1", 12),
])
def test_syntax_errors_are_located(text, pos):
    with pytest.raises(HypothesisSyntaxError) as err:
        parse_expression(text)
    assert err.value.pos == pos
    assert f"position {pos}" in str(err.value)


def test_empty_set_rejected():
    with pytest.raises(EmptyHypothesis):
        parse_hypothesis("killed > 5", 4)


QUANTITY_NAMES = ["never", "killed", "defiers", "saved", "compliers", "always", "affected", "avg_effect"]


def _number():
    return st.one_of(
        st.integers(0, 9).map(str),
        st.tuples(st.integers(0, 3), st.integers(0, 99)).map(lambda t: f"{t[0]}.{t[1]:02d}"),
    )


def _comparison():
    operand = st.one_of(
        st.sampled_from(QUANTITY_NAMES),
        st.tuples(st.sampled_from(QUANTITY_NAMES[:6]), st.sampled_from(QUANTITY_NAMES[:6])).map(" / ".join),
    )
    return st.tuples(operand, st.sampled_from(["==", "<=", ">=", "<", ">"]), _number()).map(" ".join)


def _expr():
    atom = st.one_of(_comparison(), st.sampled_from(["fisher_null", "neyman_null"]))
    return st.recursive(atom, lambda inner: st.one_of(
        st.tuples(inner, inner).map(lambda t: f"{t[0]} and {t[1]}"),
        st.tuples(inner, inner).map(lambda t: f"{t[0]} or {t[1]}"),
        inner.map(lambda t: f"({t})"),
    ), max_leaves=5)


def _evaluate(text, theta):
    """Independent scalar evaluation through Python's own boolean grammar."""
    node = parse_expression(text)

    def ev(n):
        kind = type(n).__name__
        if kind == "Compare":
            return compare_value(n.operand.value(theta), n.op, n.value)
        if kind == "And":
            return all(ev(i) for i in n.items)
        if kind == "Or":
            return any(ev(i) for i in n.items)
        if n.name == "fisher_null":
            return theta.defier == 0 and theta.complier == 0
        return theta.defier == theta.complier
    return ev(node)


@settings(max_examples=80, deadline=None)
@given(_expr(), st.integers(1, 8))
def test_roundtrip_and_membership(text, s):
    node = parse_expression(text)
    mask = node.mask(s)
    again = parse_expression(node.format())
    assert np.array_equal(again.mask(s), mask)
    lat = lattice(s)
    for r in range(lat.size):
        assert bool(mask[r]) == _evaluate(text, lat.theta(r))


def test_value_range():
    assert value_range(get_quantity("killed"), 5) == [Fraction(k) for k in range(6)]
    vals = value_range(parse_operand("saved / killed"), 3)
    assert vals[-1] == INF and vals[0] == 0
    assert Fraction(1, 2) in vals
