"""Likelihood-ratio tests with worst-case exact p-values, and CI inversion.

For a null set H0 and observed table g,

    lambda(g) = max_{theta in H0} L(theta | g) / max_theta L(theta | g)

and the p-value is the largest probability, over theta in H0, of drawing a
table at least as extreme, ``lambda(G) <= lambda(g)`` with ties included.
Because every likelihood for a fixed g shares the same design factor, lambda
is a ratio of integer assignment counts; near ties found in floating point are
settled by comparing those integers exactly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from . import kernels
from .core import (
    NEG_INF, DataConfiguration, InvalidInput, RandomizationSpec, TypeConfiguration, lattice, log_fraction,
)
from .hypothesis import HypothesisSet, as_hypothesis
from .likelihood import assignment_count, exact_likelihood, log_spec_factor
from .quantities import Operand, Quantity, Value, compare_mask, parse_operand, value_range
from .table import LambdaTable, build_lambda_table, overlay, _relevant_ranks

TIE_TOL = 1e-9


@dataclass
class TestResult:
    lam: float
    p_value: Optional[float]
    argmax_null: list[TypeConfiguration]
    argmax_global: list[TypeConfiguration]
    log_numerator: float
    log_denominator: float
    lam_exact: Optional[Fraction] = None
    worst_theta: Optional[TypeConfiguration] = None
    details: dict = field(default_factory=dict)

    @property
    def numerator(self) -> float:
        return math.exp(self.log_numerator)

    @property
    def denominator(self) -> float:
        return math.exp(self.log_denominator)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "lambda_exact": None if self.lam_exact is None else str(self.lam_exact),
            "p_value": self.p_value,
            "log_numerator": self.log_numerator,
            "log_denominator": self.log_denominator,
            "argmax_null": [list(t.as_tuple()) for t in self.argmax_null],
            "argmax_global": [list(t.as_tuple()) for t in self.argmax_global],
            "worst_theta": None if self.worst_theta is None else list(self.worst_theta.as_tuple()),
        }


# -- maxima for one g ------------------------------------------------------------

def _refine(g: DataConfiguration, ranks, weights) -> tuple[int, list[int]]:
    """Exact max count and argmax among thetas whose float weight is near the top."""
    weights = np.asarray(weights)
    if len(weights) == 0:
        return 0, []
    top = float(weights.max())
    if top <= 0.0:
        return 0, []
    lat = lattice(g.s)
    near = np.flatnonzero(weights >= top * (1.0 - TIE_TOL))
    counts = [(assignment_count(lat.theta(int(ranks[i])), g), int(ranks[i])) for i in near]
    best = max(c for c, _ in counts)
    return best, sorted(r for c, r in counts if c == best)


def null_max(g: DataConfiguration, h0: HypothesisSet) -> tuple[int, list[int]]:
    """Largest assignment count over ``h0`` and the ranks attaining it."""
    s = g.s
    gr = lattice(s).data_rank(g)
    w = kernels.member_weights(s, gr, h0.members)
    return _refine(g, h0.members, w)


def global_max(g: DataConfiguration, table: Optional[LambdaTable] = None) -> tuple[int, list[int]]:
    s = g.s
    lat = lattice(s)
    gr = lat.data_rank(g)
    if table is not None:
        cands = table.argmax(gr)
        if len(cands) == 0:
            return 0, []
        counts = [(assignment_count(lat.theta(int(r)), g), int(r)) for r in cands]
        best = max(c for c, _ in counts)
        return best, sorted(r for c, r in counts if c == best)
    w = kernels.dense_weights(s, gr)
    return _refine(g, np.arange(lat.size), w)


def _check_table(table: Optional[LambdaTable], s: int, spec: RandomizationSpec):
    if table is not None and not table.matches(s, spec):
        raise InvalidInput(f"table is for s={table.s} {table.spec}, query is s={s} {spec}")


def _design_possible(g: DataConfiguration, spec: RandomizationSpec) -> bool:
    return spec.tag != "urn" or g.g1 + g.g2 == spec.m


def lambda_statistic(g: DataConfiguration, h0, spec: RandomizationSpec,
                     table: Optional[LambdaTable] = None) -> TestResult:
    s = g.s
    spec.check(s)
    h0 = as_hypothesis(h0, s)
    _check_table(table, s, spec)
    if not _design_possible(g, spec):
        raise InvalidInput(f"{g} has probability zero under {spec} for every type configuration")
    lat = lattice(s)
    num, num_arg = null_max(g, h0)
    den, den_arg = global_max(g, table)
    factor = log_spec_factor(spec, s, g.g1 + g.g2)
    log_num = log_fraction(Fraction(num)) + factor if num else NEG_INF
    log_den = log_fraction(Fraction(den)) + factor
    lam_exact = Fraction(num, den)
    return TestResult(
        lam=float(lam_exact), p_value=None,
        argmax_null=[lat.theta(r) for r in num_arg],
        argmax_global=[lat.theta(r) for r in den_arg],
        log_numerator=log_num, log_denominator=log_den, lam_exact=lam_exact,
    )


# -- p-values ----------------------------------------------------------------------

def extreme_event(table: LambdaTable, h0: HypothesisSet, num: int, den: int, *,
                  exact_ties: bool = True, threads: Optional[int] = None) -> tuple[np.ndarray, dict]:
    """Mask over g ranks of ``lambda(g') <= num/den`` (ties included)."""
    s = table.s
    lat = lattice(s)
    ln_num = overlay(table, h0, threads=threads)
    ln_den = table.log_weight
    rel = np.zeros(lat.size, dtype=bool)
    rel[_relevant_ranks(s, table.spec)] = True
    rel &= np.isfinite(ln_den)
    mask = np.zeros(lat.size, dtype=bool)
    stats = {"ambiguous": 0, "ambiguous_included": 0}
    if num == 0:
        mask[rel & ~np.isfinite(ln_num)] = True
        return mask, stats
    obs = log_fraction(Fraction(num, den))
    with np.errstate(invalid="ignore"):
        loglam = np.where(rel, ln_num - ln_den, np.nan)
    mask[rel & (loglam < obs - TIE_TOL)] = True
    amb = np.flatnonzero(rel & (np.abs(loglam - obs) <= TIE_TOL))
    stats["ambiguous"] = len(amb)
    if not exact_ties:
        mask[amb] = True
        stats["ambiguous_included"] = len(amb)
        return mask, stats
    for r in amb:
        gp = lat.data(int(r))
        n2, _ = null_max(gp, h0)
        d2 = table.exact_max_count(int(r))
        if n2 * den <= num * d2:
            mask[r] = True
            stats["ambiguous_included"] += 1
    return mask, stats


def p_value(g: DataConfiguration, h0, spec: RandomizationSpec, table: Optional[LambdaTable] = None, *,
            exact_ties: bool = True, threads: Optional[int] = None) -> TestResult:
    """Worst-case p-value over ``h0``; builds the table when none is supplied."""
    t0 = time.perf_counter()
    s = g.s
    h0 = as_hypothesis(h0, s)
    res = lambda_statistic(g, h0, spec, table)
    lat = lattice(s)
    num = res.lam_exact.numerator
    den = res.lam_exact.denominator
    if num == den:
        # lambda(G) <= 1 always holds, so every null member gives probability one
        res.p_value = 1.0
        res.worst_theta = lat.theta(int(h0.members[0]))
        res.details = {"shortcut": "lambda == 1", "seconds": time.perf_counter() - t0}
        return res
    if table is None:
        table = build_lambda_table(s, spec, threads=threads)
    mask, stats = extreme_event(table, h0, num, den, exact_ties=exact_ties, threads=threads)
    probs = kernels.event_probs(s, spec, h0.members, mask)
    j = int(np.argmax(probs))
    res.p_value = float(min(1.0, max(0.0, probs[j])))
    res.worst_theta = lat.theta(int(h0.members[j]))
    res.details = dict(stats, event_size=int(mask.sum()), seconds=time.perf_counter() - t0)
    return res


# -- all-rational reference path (small s) -------------------------------------------

def exact_lambda_all(s: int, h0: HypothesisSet, spec: RandomizationSpec) -> dict[int, Optional[Fraction]]:
    """Exact lambda for every g rank; ``None`` where the design forbids g."""
    lat = lattice(s)
    thetas = [lat.theta(r) for r in range(lat.size)]
    members = set(int(r) for r in h0.members)
    out: dict[int, Optional[Fraction]] = {}
    for gr in range(lat.size):
        g = lat.data(gr)
        if not _design_possible(g, spec):
            out[gr] = None
            continue
        counts = [assignment_count(t, g) for t in thetas]
        den = max(counts)
        num = max(counts[r] for r in members)
        out[gr] = Fraction(num, den)
    return out


def exact_p_values(s: int, h0: HypothesisSet, spec: RandomizationSpec) -> dict[int, Fraction]:
    """Exact worst-case p-value of every realizable g, in rationals (s <= ~10)."""
    lat = lattice(s)
    lams = exact_lambda_all(s, h0, spec)
    real = [gr for gr, v in lams.items() if v is not None]
    lik = {int(t): [exact_likelihood(lat.theta(int(t)), lat.data(gr), spec) for gr in real]
           for t in h0.members}
    out = {}
    for gr in real:
        lam = lams[gr]
        event = [i for i, g2 in enumerate(real) if lams[g2] <= lam]
        out[gr] = max(sum((lik[t][i] for i in event), Fraction(0)) for t in lik)
    return out


# -- confidence intervals -------------------------------------------------------------

@dataclass
class IntervalResult:
    quantity: str
    side: str
    alpha: float
    lower: Value
    upper: Value
    empty: bool
    scanned: list[tuple[str, Value, float]]
    seconds: float = 0.0
    full_scan: bool = False

    @property
    def rejected_inside(self) -> list[Value]:
        """Values inside the reported interval whose own test rejects.

        Only meaningful after a full scan.  The p-value need not be monotone
        along the nested nulls ``q <= v``, so the set of non-rejected values
        can have gaps; the interval reported is the paper's (smallest
        non-rejected lower end), which can only cover more.
        """
        if self.empty:
            return []
        out = []
        for label, v, p in self.scanned:
            inside = (self.lower is None or v >= self.lower) and (self.upper is None or v <= self.upper)
            level = self.alpha / 2 if self.side == "two-sided" else self.alpha
            if inside and p <= level:
                out.append(v)
        return out

    def to_dict(self) -> dict:
        from .quantities import as_json_number

        return {
            "quantity": self.quantity,
            "side": self.side,
            "alpha": self.alpha,
            "lower": as_json_number(self.lower),
            "upper": as_json_number(self.upper),
            "empty": self.empty,
            "scanned": [{"h0": h, "value": as_json_number(v), "p_value": p} for h, v, p in self.scanned],
            "rejected_inside": [as_json_number(v) for v in self.rejected_inside] if self.full_scan else None,
        }

    def __str__(self):
        if self.empty:
            return "[empty]"
        lo = "—" if self.lower is None else _fmt(self.lower)
        hi = "—" if self.upper is None else _fmt(self.upper)
        return f"[{lo}, {hi}]"


def _fmt(v: Value) -> str:
    from .quantities import format_number

    return format_number(v)


def _defined(operand: Operand, s: int) -> np.ndarray:
    if isinstance(operand, Quantity):
        return np.ones(lattice(s).size, dtype=bool)
    return (operand.num.numerators(s) != 0) | (operand.den.numerators(s) != 0)


def _bound_mask(operand: Operand, op: str, v: Value, s: int) -> np.ndarray:
    if isinstance(v, float):
        defined = _defined(operand, s)
        if (op == "<=" and v > 0) or (op == ">=" and v < 0):
            return defined
        return _infinite(operand, s, v)
    return compare_mask(operand, op, v, s)


def _infinite(operand: Operand, s: int, v: float) -> np.ndarray:
    a = operand.num.numerators(s)
    b = operand.den.numerators(s)
    return (b == 0) & ((a > 0) if v > 0 else (a < 0))


def _scan(g, operand, values, op, alpha, spec, table, threads, exact_ties, full=False):
    s = g.s
    scanned = []
    found = None
    for v in values:
        mask = _bound_mask(operand, op, v, s)
        label = f"{operand.name} {op} {_fmt(v)}"
        h0 = HypothesisSet.from_mask(mask, s, label)
        res = p_value(g, h0, spec, table, exact_ties=exact_ties, threads=threads)
        scanned.append((label, v, res.p_value))
        if res.p_value > alpha and found is None:
            found = v
            if not full:
                break
    return found, scanned


def confidence_interval(g: DataConfiguration, q: Union[str, Operand], side: str, alpha: float,
                        spec: RandomizationSpec, table: Optional[LambdaTable] = None, *,
                        threads: Optional[int] = None, exact_ties: bool = True,
                        full_scan: bool = False) -> IntervalResult:
    """Invert one-sided tests over the finite range of ``q``.

    The lower end is the smallest value ``L`` with ``H0: q <= L`` not rejected
    at level ``alpha`` (rejection means ``p <= alpha``); the upper end mirrors
    it with ``q >= U``.  Two-sided intervals run both sides at ``alpha / 2``.
    ``full_scan`` tests every candidate instead of stopping at the endpoint.
    """
    if side not in ("lower", "upper", "two-sided"):
        raise InvalidInput(f"side must be lower, upper or two-sided, got {side!r}")
    if not 0 < alpha <= 1:
        raise InvalidInput(f"alpha must lie in (0, 1], got {alpha}")
    t0 = time.perf_counter()
    s = g.s
    spec.check(s)
    operand = parse_operand(q) if isinstance(q, str) else q
    if table is None:
        table = build_lambda_table(s, spec, threads=threads)
    _check_table(table, s, spec)
    values = value_range(operand, s)
    level = alpha / 2 if side == "two-sided" else alpha
    lower = upper = None
    scanned: list = []
    empty = False
    if side in ("lower", "two-sided"):
        lower, sc = _scan(g, operand, values, "<=", level, spec, table, threads, exact_ties, full_scan)
        scanned += sc
        empty = lower is None
    if side in ("upper", "two-sided") and not empty:
        upper, sc = _scan(g, operand, list(reversed(values)), ">=", level, spec, table, threads, exact_ties,
                          full_scan)
        scanned += sc
        empty = upper is None
    if side == "lower" and not empty:
        upper = None
    return IntervalResult(operand.name, side, alpha, lower, upper, empty, scanned, time.perf_counter() - t0,
                          full_scan)
