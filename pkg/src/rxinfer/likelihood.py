"""Likelihood of a type configuration given observed data.

The likelihood sums the joint assignment pmf over every arm split that
reconciles ``theta`` with ``g``.  Splits are indexed by the number of never
takers in the intervention arm; the range is tightened to the indices where
every implied count is in support, and terms are accumulated in ascending
order.

For both built-in randomization processes the sum factors as a per-``g``
constant times an integer, the number of intervention subsets that produce
``g`` (:func:`assignment_count`).  The compiled kernels work with that integer.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Protocol

from .core import (
    IID,
    NEG_INF,
    ArmSplit,
    DataConfiguration,
    InvalidInput,
    LikelihoodValue,
    RandomizationSpec,
    TypeConfiguration,
    Urn,
    binom_pmf_exact,
    enumerate_type_configs,
    implied_split,
    ln_factorials,
    log_binom_pmf,
    log_fraction,
    logsumexp,
    split_range,
)


class AssignmentPmf(Protocol):
    """Joint pmf of the per-type intervention counts."""

    def log_pmf(self, split: ArmSplit, theta: TypeConfiguration) -> float: ...

    def exact_pmf(self, split: ArmSplit, theta: TypeConfiguration) -> Fraction: ...


class BinomialProductPmf:
    """Four independent binomials, one per type."""

    def __init__(self, p):
        self.spec = p if isinstance(p, IID) else IID(p)

    def log_pmf(self, split, theta):
        p = self.spec.p
        table = ln_factorials()
        return sum(log_binom_pmf(n, t, p, table) for n, t in zip(split.as_tuple(), theta.as_tuple()))

    def exact_pmf(self, split, theta):
        p = self.spec.p
        out = Fraction(1)
        for n, t in zip(split.as_tuple(), theta.as_tuple()):
            out *= binom_pmf_exact(n, t, p)
        return out


class HypergeometricPmf:
    """Multivariate hypergeometric draw of ``m`` individuals."""

    def __init__(self, m):
        self.spec = m if isinstance(m, Urn) else Urn(m)

    def log_pmf(self, split, theta):
        m = self.spec.m
        if sum(split.as_tuple()) != m or not split.within(theta):
            return NEG_INF
        table = ln_factorials()
        out = -table.log_comb(theta.s, m)
        for n, t in zip(split.as_tuple(), theta.as_tuple()):
            out += table.log_comb(t, n)
        return out

    def exact_pmf(self, split, theta):
        m = self.spec.m
        if sum(split.as_tuple()) != m or not split.within(theta):
            return Fraction(0)
        num = 1
        for n, t in zip(split.as_tuple(), theta.as_tuple()):
            num *= math.comb(t, n)
        return Fraction(num, math.comb(theta.s, m))


def assignment_pmf(spec: RandomizationSpec) -> AssignmentPmf:
    if isinstance(spec, IID):
        return BinomialProductPmf(spec)
    if isinstance(spec, Urn):
        return HypergeometricPmf(spec)
    raise InvalidInput(f"unknown randomization spec {spec!r}")


def _check_pair(theta: TypeConfiguration, g: DataConfiguration) -> None:
    if theta.s != g.s:
        raise InvalidInput(f"theta has s={theta.s} but g has s={g.s}")


def general_likelihood(theta: TypeConfiguration, g: DataConfiguration, spec: RandomizationSpec,
                       f: AssignmentPmf | None = None, *, exact: bool = False,
                       pruned: bool = True) -> LikelihoodValue:
    """Sum the assignment pmf over all arm splits consistent with ``g``.

    ``pruned=False`` walks the untightened index range ``0..theta.never`` and
    exists only so the tightening can be checked against it.
    """
    _check_pair(theta, g)
    spec.check(g.s)
    f = f or assignment_pmf(spec)
    if pruned:
        lo, hi = split_range(theta, g)
    else:
        lo, hi = 0, theta.never
    if exact:
        total = Fraction(0)
        for ell in range(lo, hi + 1):
            split = implied_split(theta, g, ell)
            if split.within(theta):
                total += f.exact_pmf(split, theta)
        return LikelihoodValue.from_exact(total)
    terms = []
    for ell in range(lo, hi + 1):
        split = implied_split(theta, g, ell)
        if split.within(theta):
            terms.append(f.log_pmf(split, theta))
    return LikelihoodValue(min(logsumexp(terms), 0.0))


def iid_likelihood(theta: TypeConfiguration, g: DataConfiguration, p, *, exact: bool = False) -> LikelihoodValue:
    spec = p if isinstance(p, IID) else IID(p)
    return general_likelihood(theta, g, spec, BinomialProductPmf(spec), exact=exact)


def urn_likelihood(theta: TypeConfiguration, g: DataConfiguration, m, *, exact: bool = False) -> LikelihoodValue:
    spec = m if isinstance(m, Urn) else Urn(m)
    spec.check(g.s)
    if g.intervention_size != spec.m:
        _check_pair(theta, g)
        return LikelihoodValue.zero(exact)
    return general_likelihood(theta, g, spec, HypergeometricPmf(spec), exact=exact)


def likelihood(theta: TypeConfiguration, g: DataConfiguration, spec: RandomizationSpec, *,
               exact: bool = False) -> LikelihoodValue:
    if isinstance(spec, IID):
        return iid_likelihood(theta, g, spec, exact=exact)
    return urn_likelihood(theta, g, spec, exact=exact)


# ---------------------------------------------------------------------------
# integer form


def assignment_count(theta: TypeConfiguration, g: DataConfiguration) -> int:
    """Number of intervention subsets under which ``theta`` yields ``g``."""
    _check_pair(theta, g)
    t1, t2, t3, t4 = theta.as_tuple()
    g1, g2, g3, g4 = g.as_tuple()
    lo, hi = split_range(theta, g)
    x = t1 + t3 - g4
    y = g1 + g4 - t1 - t3
    total = 0
    for a in range(lo, hi + 1):
        total += math.comb(t1, a) * math.comb(t2, g2 - a) * math.comb(t3, x - a) * math.comb(t4, y + a)
    return total


def spec_factor(spec: RandomizationSpec, s: int, m: int) -> Fraction:
    """Constant turning an assignment count into a probability for arm size ``m``."""
    if isinstance(spec, IID):
        return spec.p ** m * (1 - spec.p) ** (s - m)
    if m != spec.m:
        return Fraction(0)
    return Fraction(1, math.comb(s, spec.m))


def log_spec_factor(spec: RandomizationSpec, s: int, m: int) -> float:
    if isinstance(spec, IID):
        return m * math.log(spec.p) + (s - m) * math.log1p(-float(spec.p))
    if m != spec.m:
        return NEG_INF
    return -ln_factorials().log_comb(s, spec.m)


def exact_likelihood(theta: TypeConfiguration, g: DataConfiguration, spec: RandomizationSpec) -> Fraction:
    """Closed integer form; agrees with ``general_likelihood(..., exact=True)``."""
    spec.check(g.s)
    return assignment_count(theta, g) * spec_factor(spec, g.s, g.intervention_size)


def compatible_count(g: DataConfiguration, spec: RandomizationSpec) -> int:
    """Number of type configurations that give ``g`` positive likelihood."""
    spec.check(g.s)
    if isinstance(spec, Urn) and g.intervention_size != spec.m:
        return 0
    from . import kernels

    return kernels.compatible_count(g.s, g.g1, g.g2, g.g3)


def compatible_count_naive(g: DataConfiguration, spec: RandomizationSpec) -> int:
    spec.check(g.s)
    if isinstance(spec, Urn) and g.intervention_size != spec.m:
        return 0
    n = 0
    for theta in enumerate_type_configs(g.s):
        lo, hi = split_range(theta, g)
        n += lo <= hi
    return n


def log_likelihood_from_count(count: int, spec: RandomizationSpec, s: int, m: int) -> float:
    if count == 0:
        return NEG_INF
    return log_fraction(Fraction(count)) + log_spec_factor(spec, s, m)
