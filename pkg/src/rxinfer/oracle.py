"""Brute-force ground truth by enumerating every assignment vector.

Deliberately naive: individuals are listed one by one, every 0/1 assignment
(or every ``m``-subset for the urn) is visited, and the observed table is
tallied with exact rationals.  Nothing here is shared with the likelihood
code paths it is used to check.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

from .core import IID, DataConfiguration, InvalidInput, RandomizationSpec, TypeConfiguration, Urn

IID_CAP = 12
URN_CAP = 16

# (treated if assigned to intervention, treated if assigned to control)
_POTENTIAL_OUTCOMES = {
    "never": (0, 0),
    "defier": (0, 1),
    "complier": (1, 0),
    "always": (1, 1),
}


class OracleTooLarge(RuntimeError):
    pass


def _individuals(theta: TypeConfiguration) -> list[tuple[int, int]]:
    people = []
    for name, count in zip(("never", "defier", "complier", "always"), theta.as_tuple()):
        people.extend([_POTENTIAL_OUTCOMES[name]] * count)
    return people


def _observe(people, z) -> tuple[int, int, int, int]:
    cells = [0, 0, 0, 0]
    for (d_int, d_ctl), zi in zip(people, z):
        if zi:
            cells[0 if d_int else 1] += 1
        else:
            cells[2 if d_ctl else 3] += 1
    return tuple(cells)


def exhaustive_distribution(theta: TypeConfiguration, spec: RandomizationSpec, *,
                            iid_cap: int = IID_CAP, urn_cap: int = URN_CAP) -> dict[DataConfiguration, Fraction]:
    """Exact distribution of the observed table under ``theta`` and ``spec``."""
    s = theta.s
    people = _individuals(theta)
    out: dict[tuple, Fraction] = {}
    if isinstance(spec, IID):
        if s > iid_cap:
            raise OracleTooLarge(f"s={s} exceeds the IID oracle cap {iid_cap}")
        p = spec.p
        for z in itertools.product((0, 1), repeat=s):
            k = sum(z)
            w = p ** k * (1 - p) ** (s - k)
            key = _observe(people, z)
            out[key] = out.get(key, Fraction(0)) + w
    elif isinstance(spec, Urn):
        spec.check(s)
        if s > urn_cap:
            raise OracleTooLarge(f"s={s} exceeds the urn oracle cap {urn_cap}")
        w = Fraction(1, math.comb(s, spec.m))
        for chosen in itertools.combinations(range(s), spec.m):
            z = [0] * s
            for i in chosen:
                z[i] = 1
            key = _observe(people, z)
            out[key] = out.get(key, Fraction(0)) + w
    else:
        raise InvalidInput(f"unknown spec {spec!r}")
    return {DataConfiguration(*k): v for k, v in out.items()}


def oracle_probability(theta: TypeConfiguration, g: DataConfiguration, spec: RandomizationSpec) -> Fraction:
    return exhaustive_distribution(theta, spec).get(g, Fraction(0))
