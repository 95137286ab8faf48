from fractions import Fraction

import pytest

from rxinfer.core import IID, DataConfiguration, TypeConfiguration, Urn
from rxinfer.oracle import OracleTooLarge, exhaustive_distribution, oracle_probability


@pytest.mark.parametrize("spec", [IID(Fraction(1, 3)), Urn(2)])
def test_distribution_is_normalized(spec):
    dist = exhaustive_distribution(TypeConfiguration(1, 2, 1, 1), spec)
    assert sum(dist.values()) == 1
    assert all(g.s == 5 for g in dist)


def test_single_individual():
    # a complier is treated exactly when assigned to intervention
    dist = exhaustive_distribution(TypeConfiguration(0, 0, 1, 0), IID(Fraction(1, 4)))
    assert dist == {DataConfiguration(1, 0, 0, 0): Fraction(1, 4), DataConfiguration(0, 0, 0, 1): Fraction(3, 4)}


def test_urn_respects_arm_size():
    dist = exhaustive_distribution(TypeConfiguration(2, 1, 1, 1), Urn(3))
    assert all(g.g1 + g.g2 == 3 for g in dist)
    assert oracle_probability(TypeConfiguration(2, 1, 1, 1), DataConfiguration(0, 1, 0, 4), Urn(3)) == 0


def test_caps():
    with pytest.raises(OracleTooLarge):
        exhaustive_distribution(TypeConfiguration(13, 0, 0, 0), IID(Fraction(1, 2)))
