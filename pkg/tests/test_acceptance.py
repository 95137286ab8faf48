"""Acceptance criteria 1-8.

Each test appends one PASS/FAIL line to the session log, printed in the
"acceptance criteria" section of the pytest summary.
"""

import math
import os
import random
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from rxinfer.core import IID, DataConfiguration, TypeConfiguration, Urn, enumerate_type_configs, lattice
from rxinfer.extensions import (
    SharePair, asymptotic_lambda_no_defiers, asymptotic_likelihood_iid, bfh_lower_bounds, limited_data_p_value,
    population_mle, share_pair_count,
)
from rxinfer.hypothesis import EmptyHypothesis, parse_hypothesis
from rxinfer.inference import confidence_interval, global_max, lambda_statistic, p_value
from rxinfer.likelihood import compatible_count, exact_likelihood, likelihood
from rxinfer.oracle import exhaustive_distribution
from rxinfer.table import build_lambda_table

F = Fraction
HALF = IID(F(1, 2))
VITA = DataConfiguration(25, 25, 5, 45)
MORTEM = DataConfiguration(35, 15, 15, 35)


@contextmanager
def criterion(log, number, title):
    """Record PASS/FAIL for one criterion; ``notes`` collects detail for the line."""
    notes = []
    try:
        yield notes
    except BaseException as exc:
        detail = "; ".join(notes + [str(exc).splitlines()[0] if str(exc) else type(exc).__name__])
        log.append(f"criterion {number} FAIL  {title}: {detail}")
        raise
    log.append(f"criterion {number} PASS  {title}" + (f": {'; '.join(notes)}" if notes else ""))


# -- 1 ---------------------------------------------------------------------------

def _specs(s):
    return [IID(F(1, 4)), HALF, IID(F(2, 3))] + [Urn(m) for m in range(1, s)]


@pytest.mark.slow
def test_criterion_1_oracle_equivalence(acceptance_log):
    with criterion(acceptance_log, 1, "formula likelihood equals exhaustive oracle, s <= 8") as notes:
        checked = 0
        worst = 0.0
        for s in range(1, 9):
            gs = list(lattice(s).data(r) for r in range(lattice(s).size))
            for spec in _specs(s):
                for theta in enumerate_type_configs(s):
                    dist = exhaustive_distribution(theta, spec)
                    for g in gs:
                        want = dist.get(g, F(0))
                        exact = likelihood(theta, g, spec, exact=True).exact
                        assert exact == want, f"exact mismatch {spec} {theta} {g}"
                        logv = likelihood(theta, g, spec).log_value
                        if want == 0:
                            assert logv == -math.inf, f"log mode nonzero for impossible {spec} {theta} {g}"
                        else:
                            rel = abs(math.expm1(logv - math.log(want)))
                            worst = max(worst, rel)
                            assert rel <= 1e-12, f"log mismatch {rel:.2e} {spec} {theta} {g}"
                        checked += 1
        notes.append(f"{checked} (spec, theta, g) triples, worst log-mode rel err {worst:.1e}")


# -- 2 ---------------------------------------------------------------------------

FIGURE = [
    # theta, g, printed value, unit of last printed digit
    ((70, 0, 0, 30), VITA, 0.0000007, 1e-7),
    ((50, 0, 0, 50), MORTEM, 0.000004, 1e-6),
    ((30, 0, 40, 30), MORTEM, 0.003, 1e-3),
    ((0, 30, 70, 0), MORTEM, 0.014, 1e-3),
    ((50, 0, 40, 10), VITA, 0.004, 1e-3),
]

FIGURE_COUNTS = {
    (70, 0, 0, 30): 919984786839053085844512,
    (50, 0, 0, 50): 5066233776234879723014400,
    (30, 0, 40, 30): 3316786673152819529190528000,
    (0, 30, 70, 0): 17402057192951755259555168640,
    (50, 0, 40, 10): 4391166352475765168211185280,
}


def test_criterion_2_figure_values(acceptance_log):
    with criterion(acceptance_log, 2, "likelihood values at s=100, IID 1/2") as notes:
        for t, g, printed, unit in FIGURE:
            exact = exact_likelihood(TypeConfiguration(*t), g, HALF)
            assert exact == F(FIGURE_COUNTS[t], 2 ** 100)
            val = float(exact)
            notes.append(f"{t} = {val:.4g}")
            assert abs(val - printed) <= unit, f"{t}: {val} vs printed {printed}"


# -- 3 ---------------------------------------------------------------------------

def test_criterion_3_argmax_structure(acceptance_log):
    with criterion(acceptance_log, 3, "global and null argmax structure") as notes:
        lat = lattice(100)
        _, vita_arg = global_max(VITA)
        assert lat.theta_rank(TypeConfiguration(50, 0, 40, 10)) in vita_arg
        lam = lambda_statistic(VITA, "killed == 0", HALF)
        assert lam.lam == 1.0
        _, mortem_arg = global_max(MORTEM)
        assert lat.theta_rank(TypeConfiguration(0, 30, 70, 0)) in mortem_arg
        notes.append(f"Vita argmax size {len(vita_arg)}, Mortem argmax size {len(mortem_arg)}, Vita lambda 1")


# -- 4 ---------------------------------------------------------------------------

TABLE3 = [
    (MORTEM, "killed == 0", 0.028),
    (MORTEM, "saved / killed >= 5", 0.076),
    (MORTEM, "killed == 0 and saved >= 1", 0.076),
    (VITA, "killed == 0", 1.0),
    (VITA, "saved / killed >= 5", 1.0),
    (VITA, "killed == 0 and saved >= 1", 1.0),
]


@pytest.mark.slow
def test_criterion_4_table3(acceptance_log, table100):
    with criterion(acceptance_log, 4, "p-values and intervals at s=100") as notes:
        bad = []
        for g, h0, want in TABLE3:
            got = p_value(g, h0, HALF, table100).p_value
            name = "Mortem" if g == MORTEM else "Vita"
            notes.append(f"{name} p({h0})={got:.3f}")
            if round(got, 3) != want:
                bad.append(f"{name} {h0}: {got:.6f} != {want}")
        for g, want in ((MORTEM, "[3, —]"), (VITA, "[0, —]")):
            ci = confidence_interval(g, "killed", "lower", 0.05, HALF, table100)
            notes.append(f"CI {str(ci)}")
            if str(ci) != want:
                bad.append(f"CI {ci} != {want}")
        assert not bad, "; ".join(bad)


# -- 5 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_5_counts(acceptance_log, table100):
    with criterion(acceptance_log, 5, "counting claims") as notes:
        n_theta = sum(1 for _ in enumerate_type_configs(100))
        assert n_theta == 176851
        assert compatible_count(VITA, HALF) == 45951
        assert compatible_count(MORTEM, HALF) == 56151
        notes.append("176,851 / 45,951 / 56,151 ok")
        multi = table100.multi_valued_count()
        lat = lattice(100)
        urn50 = (lat.c1 + lat.c2 == 50)
        sizes = np.diff(table100.argmax_offsets)
        notes.append(f"multi-valued argmax count {multi:,} (Urn m=50 subset: {int(((sizes > 1) & urn50).sum()):,})")
        assert multi == 14940, f"multi-valued argmax count {multi} != 14,940"


# -- 6 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_6_appendix(acceptance_log, table100):
    with criterion(acceptance_log, 6, "limited data, share pairs, bounds, impossibility") as notes:
        h0 = parse_hypothesis("killed == 0", 100)
        limited = limited_data_p_value(SharePair(F(7, 10), F(3, 10)), h0, HALF, 100, table100)
        notes.append(f"limited p={limited.p_value:.4f}")
        assert round(limited.p_value, 3) == 0.053

        counts = {c: share_pair_count(100, c) for c in ("undefined-as-value", "exclude-undefined")}
        notes.append(f"share pairs {counts['undefined-as-value']:,} (undefined as a value), "
                     f"{counts['exclude-undefined']:,} (excluded)")
        assert 160131 in counts.values()

        assert bfh_lower_bounds(SharePair.from_data(MORTEM)) == (0, F(2, 5))

        checked = 0
        for s in range(2, 21):
            lat = lattice(s)
            for r in range(lat.size):
                g = lat.data(r)
                n1, n0 = g.g1 + g.g2, g.g3 + g.g4
                if n1 == 0 or n0 == 0 or F(g.g1, n1) <= F(g.g3, n0):
                    continue
                v, c = F(g.g1, n1), F(g.g3, n0)
                mle = population_mle(g, "iid")
                assert mle.zero_defier is not None and mle.zero_defier.pi2 == 0
                top = (math.factorial(s) // math.prod(math.factorial(x) for x in g.as_tuple())
                       * F(1, 2 ** s) * v ** g.g1 * (1 - v) ** g.g2 * c ** g.g3 * (1 - c) ** g.g4)
                assert asymptotic_likelihood_iid(mle.zero_defier, g, F(1, 2)).exact == top
                assert asymptotic_lambda_no_defiers(g) == 1.0
                checked += 1
        notes.append(f"impossibility holds for {checked:,} g with positive estimate at s <= 20")


# -- 7 ---------------------------------------------------------------------------

BATTERY = [
    "fisher_null", "neyman_null", "killed == 0", "saved == 0", "killed <= 1", "saved >= 1",
    "killed == 0 and saved >= 1", "saved / killed >= 2", "avg_effect <= 0", "avg_effect >= 1/4",
    "affected <= 2", "compliers == 0 or defiers == 0", "never >= 2 and (always <= 1 or saved >= 2)",
]
_NAMES = ["never", "killed", "saved", "always", "affected", "avg_effect"]


def _generated(rng, depth=0):
    """Random expression from the hypothesis grammar."""
    r = rng.random()
    if depth < 2 and r < 0.3:
        op = rng.choice(["and", "or"])
        left, right = _generated(rng, depth + 1), _generated(rng, depth + 1)
        return f"({left} {op} {right})" if op == "or" else f"{left} {op} {right}"
    if r < 0.4:
        return rng.choice(["fisher_null", "neyman_null"])
    name = rng.choice(_NAMES)
    if rng.random() < 0.2:
        name = f"{name} / {rng.choice(_NAMES[:4])}"
    value = rng.choice(["0", "1", "2", "1/2", "-1/4", "3"])
    return f"{name} {rng.choice(['==', '<=', '>=', '<', '>'])} {value}"


@pytest.mark.slow
def test_criterion_7_size_control(acceptance_log):
    rng = random.Random(2024)
    battery = BATTERY + [_generated(rng) for _ in range(12)]
    with criterion(acceptance_log, 7, "exact size control, s <= 8") as notes:
        cases = 0
        worst_margin = F(-1)
        for s in range(2, 9):
            lat = lattice(s)
            for spec in (HALF, IID(F(1, 3)), Urn(s // 2)):
                table = build_lambda_table(s, spec)
                gs = [r for r in range(lat.size) if not isinstance(spec, Urn) or lat.c1[r] + lat.c2[r] == spec.m]
                like = {}
                for text in battery:
                    try:
                        h0 = parse_hypothesis(text, s)
                    except EmptyHypothesis:
                        continue
                    ps = {gr: p_value(lat.data(gr), h0, spec, table).p_value for gr in gs}
                    for alpha in (0.01, 0.05, 0.1):
                        rejected = [gr for gr in gs if ps[gr] <= alpha]
                        a = F(str(alpha))
                        for tr in h0.members:
                            tr = int(tr)
                            size = F(0)
                            for gr in rejected:
                                key = (tr, gr)
                                if key not in like:
                                    like[key] = exact_likelihood(lat.theta(tr), lat.data(gr), spec)
                                size += like[key]
                            assert size <= a, f"s={s} {spec} H0 {text!r} alpha {alpha}: size {float(size)}"
                            worst_margin = max(worst_margin, size - a)
                        cases += 1
        notes.append(f"{cases} (s, spec, H0, alpha) cases, max size - alpha = {float(worst_margin):.3g}")


# -- 8 ---------------------------------------------------------------------------

def test_criterion_8_determinism(acceptance_log):
    with criterion(acceptance_log, 8, "byte-identical table builds across thread counts") as notes:
        counts = sorted({1, 4, max(os.cpu_count() or 1, 8)})
        for spec in (HALF, Urn(30)):
            blobs = {n: build_lambda_table(60, spec, threads=n).to_bytes() for n in counts}
            first = blobs[counts[0]]
            assert all(b == first for b in blobs.values()), f"{spec}: builds differ"
        notes.append(f"s=60, IID 1/2 and Urn m=30, threads {counts}")
