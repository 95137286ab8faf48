import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rxinfer.core import (
    IID, DataConfiguration, InvalidInput, LikelihoodValue, TypeConfiguration, Urn, binom_pmf_exact,
    enumerate_data_configs, enumerate_type_configs, feasible, lattice, lattice_size, ln_factorials,
    log_binom_pmf, log_fraction, logsumexp, parse_spec, split_range,
)


def test_lattice_size_matches_enumeration():
    for s in range(1, 9):
        assert lattice_size(s) == len(list(enumerate_type_configs(s))) == math.comb(s + 3, 3)
    assert lattice_size(100) == 176_851


def test_enumeration_is_lexicographic_and_ranked():
    lat = lattice(6)
    thetas = list(enumerate_type_configs(6))
    assert [t.as_tuple() for t in thetas] == sorted(t.as_tuple() for t in thetas)
    for r, t in enumerate(thetas):
        assert lat.theta_rank(t) == r
        assert lat.theta(r) == t
    assert [g.as_tuple() for g in enumerate_data_configs(6)] == [t.as_tuple() for t in thetas]


@given(st.integers(1, 60).flatmap(lambda s: st.tuples(st.just(s), st.integers(0, lattice_size(s) - 1))))
def test_rank_roundtrip(args):
    s, r = args
    lat = lattice(s)
    assert lat.theta_rank(lat.theta(r)) == r


def test_configuration_validation():
    with pytest.raises(InvalidInput):
        TypeConfiguration(-1, 0, 0, 1)
    assert DataConfiguration.parse("35,15,15,35") == DataConfiguration(35, 15, 15, 35)
    assert DataConfiguration(35, 15, 15, 35).s == 100
    with pytest.raises(InvalidInput):
        DataConfiguration.parse("1,2,x,4")


def test_specs():
    assert IID("1/2").p == Fraction(1, 2)
    with pytest.raises(InvalidInput):
        IID(0.5)
    with pytest.raises(InvalidInput):
        IID(1)
    with pytest.raises(InvalidInput):
        Urn(0)
    with pytest.raises(InvalidInput):
        Urn(5).check(5)
    assert parse_spec("iid:p=2/3") == IID(Fraction(2, 3))
    assert parse_spec("urn:m=50") == Urn(50)
    with pytest.raises(InvalidInput):
        parse_spec("coin:p=1/2")


def test_log_helpers():
    huge = Fraction(3 ** 2000, 7 ** 1500)
    assert math.isclose(log_fraction(huge), 2000 * math.log(3) - 1500 * math.log(7), rel_tol=1e-12)
    assert log_fraction(Fraction(0)) == -math.inf
    assert logsumexp([-math.inf, -math.inf]) == -math.inf
    assert math.isclose(logsumexp([math.log(0.25), math.log(0.5)]), math.log(0.75))
    assert LikelihoodValue.zero().value == 0.0


@given(st.integers(0, 40), st.integers(0, 40), st.sampled_from([Fraction(1, 2), Fraction(1, 3), Fraction(5, 7)]))
def test_binomial_pmf_log_matches_exact(a, b, p):
    exact = binom_pmf_exact(a, b, p)
    lg = log_binom_pmf(a, b, p)
    if exact == 0:
        assert lg == -math.inf
    else:
        assert math.isclose(lg, log_fraction(exact), rel_tol=1e-12, abs_tol=1e-12)


def test_ln_factorials():
    lf = ln_factorials()
    assert lf[0] == lf[1] == 0.0
    assert math.isclose(lf[100], math.lgamma(101))
    assert math.isclose(math.exp(lf.log_comb(10, 3)), 120)


def test_split_range_and_feasibility():
    theta = TypeConfiguration(30, 0, 40, 30)
    g = DataConfiguration(35, 15, 15, 35)
    lo, hi = split_range(theta, g)
    assert lo == hi == 15
    assert feasible(theta, g, IID(Fraction(1, 2)))
    assert not feasible(theta, g, Urn(40))
    assert not feasible(TypeConfiguration(100, 0, 0, 0), g, IID(Fraction(1, 2)))


def test_lattice_arrays_read_only():
    lat = lattice(5)
    with pytest.raises(ValueError):
        lat.c1[0] = 3
    assert np.all(lat.c1 + lat.c2 + lat.c3 + lat.c4 == 5)
