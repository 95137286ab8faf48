import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from rxinfer.core import IID, DataConfiguration, InvalidInput, TypeConfiguration, Urn, enumerate_type_configs, log_fraction
from rxinfer.likelihood import (
    assignment_count, compatible_count, compatible_count_naive, exact_likelihood, general_likelihood,
    iid_likelihood, likelihood, urn_likelihood,
)
from rxinfer.oracle import exhaustive_distribution

VITA = DataConfiguration(25, 25, 5, 45)
MORTEM = DataConfiguration(35, 15, 15, 35)


def configs(s_max=7):
    return st.integers(1, s_max).flatmap(
        lambda s: st.tuples(
            st.lists(st.integers(0, s), min_size=3, max_size=3).filter(lambda v: sum(v) <= s).map(
                lambda v: TypeConfiguration(v[0], v[1], v[2], s - sum(v))),
            st.lists(st.integers(0, s), min_size=3, max_size=3).filter(lambda v: sum(v) <= s).map(
                lambda v: DataConfiguration(v[0], v[1], v[2], s - sum(v))),
        ))


@settings(max_examples=150, deadline=None)
@given(configs(), st.sampled_from([Fraction(1, 2), Fraction(1, 4), Fraction(2, 3)]))
def test_iid_matches_oracle(pair, p):
    theta, g = pair
    spec = IID(p)
    want = exhaustive_distribution(theta, spec).get(g, Fraction(0))
    assert iid_likelihood(theta, g, p, exact=True).exact == want
    assert exact_likelihood(theta, g, spec) == want
    lg = iid_likelihood(theta, g, p).log_value
    if want == 0:
        assert lg == -math.inf
    else:
        assert math.isclose(lg, log_fraction(want), rel_tol=1e-12, abs_tol=1e-13)


@settings(max_examples=150, deadline=None)
@given(configs(), st.data())
def test_urn_matches_oracle(pair, data):
    theta, g = pair
    if theta.s < 2:
        return
    m = data.draw(st.integers(1, theta.s - 1))
    spec = Urn(m)
    want = exhaustive_distribution(theta, spec).get(g, Fraction(0))
    assert urn_likelihood(theta, g, m, exact=True).exact == want
    assert exact_likelihood(theta, g, spec) == want


@settings(max_examples=100, deadline=None)
@given(configs(10))
def test_pruning_does_not_change_value(pair):
    theta, g = pair
    spec = IID(Fraction(1, 3))
    a = general_likelihood(theta, g, spec, exact=True).exact
    b = general_likelihood(theta, g, spec, exact=True, pruned=False).exact
    assert a == b


def test_likelihood_sums_to_one_over_g():
    theta = TypeConfiguration(2, 1, 2, 1)
    for spec in (IID(Fraction(1, 3)), Urn(2)):
        total = sum(exact_likelihood(theta, DataConfiguration(*g.as_tuple()), spec)
                    for g in enumerate_type_configs(6))
        assert total == 1


def test_figure_values_closed_form():
    # single-split cases, counted by hand
    assert assignment_count(TypeConfiguration(70, 0, 0, 30), VITA) == math.comb(70, 25) * math.comb(30, 25)
    assert assignment_count(TypeConfiguration(50, 0, 0, 50), MORTEM) == math.comb(50, 15) * math.comb(50, 35)
    assert assignment_count(TypeConfiguration(0, 30, 70, 0), MORTEM) == math.comb(70, 35) * math.comb(30, 15)
    val = likelihood(TypeConfiguration(30, 0, 40, 30), MORTEM, IID(Fraction(1, 2)), exact=True)
    assert val.exact == Fraction(math.comb(30, 15) ** 2 * math.comb(40, 20), 2 ** 100)


def test_urn_wrong_arm_size_is_zero():
    theta = TypeConfiguration(1, 1, 1, 1)
    assert urn_likelihood(theta, DataConfiguration(1, 0, 2, 1), 2).value == 0.0
    assert compatible_count(DataConfiguration(1, 0, 2, 1), Urn(2)) == 0


def test_size_mismatch_rejected():
    with pytest.raises(InvalidInput):
        likelihood(TypeConfiguration(1, 1, 1, 1), DataConfiguration(1, 1, 1, 0), IID(Fraction(1, 2)))


@pytest.mark.parametrize("g", [DataConfiguration(2, 1, 3, 2), DataConfiguration(0, 5, 0, 3), DataConfiguration(4, 0, 0, 4)])
def test_compatible_count_matches_naive(g):
    spec = IID(Fraction(1, 2))
    assert compatible_count(g, spec) == compatible_count_naive(g, spec)


def test_compatible_counts_examples():
    spec = IID(Fraction(1, 2))
    assert compatible_count(VITA, spec) == 45_951
    assert compatible_count(MORTEM, spec) == 56_151
