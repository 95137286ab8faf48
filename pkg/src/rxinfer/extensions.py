"""Share-based bounds, the limited-data likelihood, and population-level likelihoods.

* Boole-Frechet-Hoeffding style lower bounds on the defier and complier
  shares from the two arm-wise treated shares.
* The likelihood of a type configuration when only the treated shares of the
  two arms are observed, and the worst-case test built on it.
* Likelihoods that additionally assume the sample is drawn from an infinite
  population, their maximizers, and the zero-defier transform showing why
  such models cannot detect defiers.
* The textbook two-proportion z-test, kept as an asymptotic baseline.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from . import kernels
from .core import (
    IID, NEG_INF, DataConfiguration, InvalidInput, LikelihoodValue, RandomizationSpec,
    TypeConfiguration, Urn, enumerate_type_configs, lattice, ln_factorials, log_fraction,
)
from .hypothesis import as_hypothesis
from .inference import TIE_TOL, null_max
from .likelihood import exact_likelihood, log_spec_factor
from .table import LambdaTable, _relevant_ranks, build_lambda_table, overlay

Real = Union[Fraction, float]


class EmptyArm(InvalidInput):
    """A share was requested for an arm with no individuals."""


# -- shares ------------------------------------------------------------------------

@dataclass(frozen=True)
class SharePair:
    """Treated shares in the intervention (``v_hat``) and control (``c_hat``) arms.

    ``None`` marks the share of an empty arm.
    """

    v_hat: Optional[Fraction]
    c_hat: Optional[Fraction]

    def __post_init__(self):
        for name in ("v_hat", "c_hat"):
            v = getattr(self, name)
            if v is None:
                continue
            if isinstance(v, float):
                raise InvalidInput(f"{name} must be an exact rational, got float {v}")
            v = Fraction(v)
            if not 0 <= v <= 1:
                raise InvalidInput(f"{name} must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_data(cls, g: DataConfiguration) -> "SharePair":
        n1, n0 = g.g1 + g.g2, g.g3 + g.g4
        return cls(Fraction(g.g1, n1) if n1 else None, Fraction(g.g3, n0) if n0 else None)

    @classmethod
    def parse(cls, text: str) -> "SharePair":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise InvalidInput(f"shares must be 'v,c', got {text!r}")
        vals = []
        for p in parts:
            if p.lower() in ("none", "undefined", "-"):
                vals.append(None)
                continue
            try:
                vals.append(Fraction(p))
            except (ValueError, ZeroDivisionError):
                raise InvalidInput(f"bad share {p!r}") from None
        return cls(*vals)

    @property
    def defined(self) -> bool:
        return self.v_hat is not None and self.c_hat is not None

    def require_defined(self):
        if not self.defined:
            raise EmptyArm(f"share undefined for an empty arm: {self}")

    @property
    def effect(self) -> Fraction:
        self.require_defined()
        return self.v_hat - self.c_hat

    def __str__(self):
        f = lambda x: "undefined" if x is None else str(x)
        return f"({f(self.v_hat)}, {f(self.c_hat)})"


def bfh_lower_bounds(shares: SharePair) -> tuple[Fraction, Fraction]:
    """Lower bounds on the defier and complier shares: max(c-v, 0), max(v-c, 0)."""
    d = shares.effect
    return max(-d, Fraction(0)), max(d, Fraction(0))


def data_for_shares(shares: SharePair, s: int) -> list[DataConfiguration]:
    """Every data configuration of size ``s`` whose arm shares equal ``shares``.

    Enumerates the intervention arm size ``n1``; the treated counts
    ``v_hat * n1`` and ``c_hat * (s - n1)`` must be integers.  This is the
    ``g(1)`` change of variables written without dividing by ``v_hat``, so a
    zero intervention share needs no special handling.
    """
    out = []
    for n1 in range(s + 1):
        n0 = s - n1
        if (shares.v_hat is None) != (n1 == 0) or (shares.c_hat is None) != (n0 == 0):
            continue
        g1 = shares.v_hat * n1 if n1 else Fraction(0)
        g3 = shares.c_hat * n0 if n0 else Fraction(0)
        if g1.denominator != 1 or g3.denominator != 1:
            continue
        g1, g3 = int(g1), int(g3)
        out.append(DataConfiguration(g1, n1 - g1, g3, n0 - g3))
    return out


def limited_data_likelihood(theta: TypeConfiguration, shares: SharePair,
                            spec: RandomizationSpec) -> LikelihoodValue:
    """Probability under ``theta`` that the observed shares equal ``shares``."""
    s = theta.s
    spec.check(s)
    if not shares.defined:
        raise EmptyArm(f"share undefined for an empty arm: {shares}")
    total = sum((exact_likelihood(theta, g, spec) for g in data_for_shares(shares, s)), Fraction(0))
    return LikelihoodValue.from_exact(total)


def _share_keys(s: int, ranks: np.ndarray) -> np.ndarray:
    """Reduced (num, den) pairs of both shares per g; (0, 0) when undefined."""
    lat = lattice(s)
    g1, g2, g3, g4 = (c[ranks] for c in (lat.c1, lat.c2, lat.c3, lat.c4))
    n1, n0 = g1 + g2, g3 + g4
    d1 = np.gcd(g1, n1)
    d0 = np.gcd(g3, n0)
    d1[d1 == 0] = 1
    d0[d0 == 0] = 1
    return np.stack([g1 // d1, n1 // d1, g3 // d0, n0 // d0], axis=1)


def share_pair_count(s: int, convention: str = "undefined-as-value") -> int:
    """Distinct realizable share pairs over all data configurations of size ``s``.

    ``"undefined-as-value"`` counts an empty arm's share as one extra value;
    ``"exclude-undefined"`` drops tables with an empty arm.
    """
    lat = lattice(s)
    ranks = np.arange(lat.size)
    if convention == "exclude-undefined":
        n1 = lat.c1 + lat.c2
        ranks = ranks[(n1 > 0) & (n1 < s)]
    elif convention != "undefined-as-value":
        raise InvalidInput(f"unknown convention {convention!r}")
    return int(len(np.unique(_share_keys(s, ranks), axis=0)))


# -- limited-data test ------------------------------------------------------------------

def _class_vector(s: int, spec: RandomizationSpec, g_ranks) -> tuple[np.ndarray, float]:
    """Scaled likelihood of every theta summed over a share class, plus the log scale."""
    factors = [log_spec_factor(spec, s, int(lattice(s).c1[r] + lattice(s).c2[r])) for r in g_ranks]
    ref = max(factors)
    acc = None
    for r, f in zip(g_ranks, factors):
        w = kernels.dense_weights(s, int(r)) * math.exp(f - ref)
        acc = w if acc is None else acc + w
    return acc, ref + s * math.log(2.0)


def _class_exact(s: int, spec: RandomizationSpec, theta_rank: int, g_ranks) -> Fraction:
    lat = lattice(s)
    t = lat.theta(int(theta_rank))
    return sum((exact_likelihood(t, lat.data(int(r)), spec) for r in g_ranks), Fraction(0))


def _class_max(s, spec, g_ranks, vec, candidates) -> Fraction:
    vals = vec[candidates]
    if len(vals) == 0 or vals.max() <= 0:
        return Fraction(0)
    near = candidates[vals >= vals.max() * (1 - TIE_TOL)]
    return max(_class_exact(s, spec, int(t), g_ranks) for t in near)


@dataclass
class LimitedResult:
    lam: float
    p_value: float
    lam_exact: Fraction
    worst_theta: Optional[TypeConfiguration]
    statistic_values: int
    class_size: int
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "lambda_exact": str(self.lam_exact),
            "p_value": self.p_value,
            "worst_theta": None if self.worst_theta is None else list(self.worst_theta.as_tuple()),
            "statistic_values": self.statistic_values,
            "observed_class_size": self.class_size,
        }


def limited_data_p_value(shares: SharePair, h0, spec: RandomizationSpec, s: int,
                         table: Optional[LambdaTable] = None, *, threads: Optional[int] = None,
                         exact_ties: bool = True) -> LimitedResult:
    """Worst-case p-value when only the two arm shares are observed.

    The statistic space is the set of realizable share pairs; each pair
    collects the data configurations that produce it.  Pairs realized by a
    single table reuse the full-data lambda table, the rest are summed
    explicitly over the lattice.
    """
    t0 = time.perf_counter()
    spec.check(s)
    shares.require_defined()
    h0 = as_hypothesis(h0, s)
    lat = lattice(s)
    obs_g = [lat.data_rank(g) for g in data_for_shares(shares, s)]
    if isinstance(spec, Urn):
        obs_g = [r for r in obs_g if lat.c1[r] + lat.c2[r] == spec.m]
    if not obs_g:
        raise InvalidInput(f"shares {shares} are not realizable at s={s} under {spec}")

    members = h0.members
    all_thetas = np.arange(lat.size)
    vec, _ = _class_vector(s, spec, obs_g)
    den_obs = _class_max(s, spec, obs_g, vec, all_thetas)
    num_obs = _class_max(s, spec, obs_g, vec, members)
    lam_obs = num_obs / den_obs
    if lam_obs == 1:
        return LimitedResult(1.0, 1.0, lam_obs, lat.theta(int(members[0])), -1, len(obs_g),
                             time.perf_counter() - t0)

    if table is None:
        table = build_lambda_table(s, spec, threads=threads)
    elif not table.matches(s, spec):
        raise InvalidInput(f"table is for s={table.s} {table.spec}")
    ranks = _relevant_ranks(s, spec)
    keys = _share_keys(s, ranks)
    _, cls, sizes = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    cls = cls.ravel()
    n_classes = len(sizes)
    loglam = np.full(n_classes, np.nan)

    single = sizes[cls] == 1
    ln_num = overlay(table, h0, threads=threads)
    ln_den = table.log_weight
    with np.errstate(invalid="ignore"):
        loglam[cls[single]] = ln_num[ranks[single]] - ln_den[ranks[single]]

    order = np.argsort(cls, kind="stable")
    bounds = np.searchsorted(cls[order], np.arange(n_classes + 1))
    multi_classes = np.flatnonzero(sizes > 1)
    class_members = {}
    for k in multi_classes:
        g_ranks = ranks[order[bounds[k]:bounds[k + 1]]]
        class_members[int(k)] = g_ranks
        v, _ = _class_vector(s, spec, g_ranks)
        d = v.max()
        n = v[members].max() if len(members) else 0.0
        loglam[k] = math.log(n / d) if n > 0 else NEG_INF

    obs = log_fraction(lam_obs) if num_obs else NEG_INF
    if num_obs == 0:
        in_event = loglam == NEG_INF
    else:
        in_event = loglam < obs - TIE_TOL
        amb = np.flatnonzero(np.abs(loglam - obs) <= TIE_TOL)
        for k in amb:
            if not exact_ties:
                in_event[k] = True
                continue
            if int(k) in class_members:
                g_ranks = class_members[int(k)]
                v, _ = _class_vector(s, spec, g_ranks)
                lam_k = _class_max(s, spec, g_ranks, v, members) / _class_max(s, spec, g_ranks, v, all_thetas)
            else:
                r = int(ranks[order[bounds[k]]])
                n2, _ = null_max(lat.data(r), h0)
                lam_k = Fraction(n2, table.exact_max_count(r))
            in_event[k] = lam_k <= lam_obs

    mask = np.zeros(lat.size, dtype=bool)
    mask[ranks[in_event[cls]]] = True
    probs = kernels.event_probs(s, spec, members, mask)
    j = int(np.argmax(probs))
    return LimitedResult(float(lam_obs), float(min(1.0, probs[j])), lam_obs, lat.theta(int(members[j])),
                         n_classes, len(obs_g), time.perf_counter() - t0)


# -- population-level likelihoods ----------------------------------------------------------

@dataclass(frozen=True)
class PopulationConfiguration:
    """Population shares of never takers, defiers, compliers and always takers."""

    pi1: Real
    pi2: Real
    pi3: Real

    def __post_init__(self):
        for v in (self.pi1, self.pi2, self.pi3, self.pi4):
            if not -1e-12 <= v <= 1 + 1e-12:
                raise InvalidInput(f"population shares must lie in [0, 1]: {self}")

    @property
    def pi4(self) -> Real:
        return 1 - self.pi1 - self.pi2 - self.pi3

    def as_tuple(self):
        return (self.pi1, self.pi2, self.pi3, self.pi4)

    @property
    def treated_if_assigned(self) -> Real:
        """Share treated under intervention, ``1 - pi1 - pi2``."""
        return 1 - self.pi1 - self.pi2

    @property
    def treated_if_control(self) -> Real:
        """Share treated under control, ``1 - pi1 - pi3``."""
        return 1 - self.pi1 - self.pi3

    @property
    def effect(self) -> Real:
        return self.pi3 - self.pi2

    def zero_defier(self) -> "PopulationConfiguration":
        """Same arm-wise treated shares with the defiers folded away."""
        return PopulationConfiguration(self.pi1 + self.pi2, 0 * self.pi2, self.pi3 - self.pi2)

    def zero_complier(self) -> "PopulationConfiguration":
        return PopulationConfiguration(self.pi1 + self.pi3, self.pi2 - self.pi3, 0 * self.pi3)

    def __str__(self):
        return "(" + ", ".join(str(x) for x in self.as_tuple()) + ")"


def _is_exact(*xs) -> bool:
    return all(isinstance(x, (int, Fraction)) for x in xs)


def _log_pow(base: Real, k: int) -> float:
    if k == 0:
        return 0.0
    if base <= 0:
        return NEG_INF
    return k * math.log(base)


def _binom_log(k: int, n: int, q: Real) -> float:
    return ln_factorials().log_comb(n, k) + _log_pow(q, k) + _log_pow(1 - q, n - k)


def asymptotic_likelihood_iid(pi: PopulationConfiguration, g: DataConfiguration, p) -> LikelihoodValue:
    """Multinomial likelihood of ``g`` for a random sample from population ``pi``."""
    p = IID(p).p
    v, c = pi.treated_if_assigned, pi.treated_if_control
    g1, g2, g3, g4 = g.as_tuple()
    s = g.s
    if _is_exact(v, c):
        coef = math.factorial(s) // (math.factorial(g1) * math.factorial(g2) * math.factorial(g3) * math.factorial(g4))
        val = coef * p ** (g1 + g2) * (1 - p) ** (g3 + g4) * v ** g1 * (1 - v) ** g2 * c ** g3 * (1 - c) ** g4
        return LikelihoodValue.from_exact(Fraction(val))
    lf = ln_factorials()
    log = (lf[s] - lf[g1] - lf[g2] - lf[g3] - lf[g4] + _log_pow(p, g1 + g2) + _log_pow(1 - p, g3 + g4)
           + _log_pow(v, g1) + _log_pow(1 - v, g2) + _log_pow(c, g3) + _log_pow(1 - c, g4))
    return LikelihoodValue(log)


def asymptotic_likelihood_urn(pi: PopulationConfiguration, g: DataConfiguration, m: int) -> LikelihoodValue:
    """Product of the arm-wise binomial likelihoods for fixed arm sizes."""
    spec = Urn(m)
    spec.check(g.s)
    if g.g1 + g.g2 != m:
        raise InvalidInput(f"{g} has intervention arm size {g.g1 + g.g2}, design fixes {m}")
    v, c = pi.treated_if_assigned, pi.treated_if_control
    n0 = g.s - m
    if _is_exact(v, c):
        val = (math.comb(m, g.g1) * v ** g.g1 * (1 - v) ** g.g2
               * math.comb(n0, g.g3) * c ** g.g3 * (1 - c) ** g.g4)
        return LikelihoodValue.from_exact(Fraction(val))
    return LikelihoodValue(_binom_log(g.g1, m, v) + _binom_log(g.g3, n0, c))


def sampling_weight(theta: TypeConfiguration, pi: PopulationConfiguration) -> Fraction:
    """Multinomial probability of drawing ``theta`` from population ``pi``."""
    t = theta.as_tuple()
    coef = math.factorial(theta.s)
    for x in t:
        coef //= math.factorial(x)
    val = Fraction(coef)
    for share, x in zip(pi.as_tuple(), t):
        val *= Fraction(share) ** x
    return val


def averaged_likelihood(pi: PopulationConfiguration, g: DataConfiguration, spec: RandomizationSpec) -> Fraction:
    """Finite-sample likelihood averaged over random samples from ``pi`` (exact)."""
    return sum((exact_likelihood(t, g, spec) * sampling_weight(t, pi) for t in enumerate_type_configs(g.s)),
               Fraction(0))


def _arm_shares(g: DataConfiguration) -> tuple[Fraction, Fraction]:
    sh = SharePair.from_data(g)
    sh.require_defined()
    return sh.v_hat, sh.c_hat


def _population_log_likelihood(g: DataConfiguration, v: Real, c: Real, form: str, p=Fraction(1, 2)) -> float:
    pi = PopulationConfiguration(1 - v, 0 * v, v - c) if v >= c else PopulationConfiguration(1 - c, c - v, 0 * v)
    if form == "urn":
        return asymptotic_likelihood_urn(pi, g, g.g1 + g.g2).log_value
    return asymptotic_likelihood_iid(pi, g, p).log_value


@dataclass
class PopulationMLE:
    g: DataConfiguration
    form: str
    v_hat: Fraction
    c_hat: Fraction
    family: tuple[PopulationConfiguration, PopulationConfiguration]
    log_likelihood: float
    zero_defier: Optional[PopulationConfiguration]
    zero_defier_log_likelihood: Optional[float]
    zero_complier: Optional[PopulationConfiguration]

    @property
    def implied_effect(self) -> Fraction:
        return self.v_hat - self.c_hat

    @property
    def zero_defier_maximizer_exists(self) -> bool:
        return self.zero_defier is not None

    def to_dict(self) -> dict:
        fmt = lambda pi: None if pi is None else [str(x) for x in pi.as_tuple()]
        return {
            "asymptotic": True,
            "form": self.form,
            "v_hat": str(self.v_hat),
            "c_hat": str(self.c_hat),
            "implied_effect": str(self.implied_effect),
            "implied_effect_float": float(self.implied_effect),
            "maximizer_family": [fmt(pi) for pi in self.family],
            "log_likelihood": self.log_likelihood,
            "zero_defier_maximizer": fmt(self.zero_defier),
            "zero_defier_maximizer_exists": self.zero_defier_maximizer_exists,
            "zero_complier_maximizer": fmt(self.zero_complier),
        }


def population_mle(g: DataConfiguration, form: str = "iid", p=Fraction(1, 2)) -> PopulationMLE:
    """Maximizers of the population likelihood and the zero-defier check.

    The likelihood depends on the population only through the arm-wise
    treated shares, so the maximizers are the segment with
    ``pi1 + pi2 = 1 - v_hat`` and ``pi1 + pi3 = 1 - c_hat``.
    """
    if form not in ("iid", "urn"):
        raise InvalidInput(f"form must be iid or urn, got {form!r}")
    v, c = _arm_shares(g)
    lo = max(Fraction(0), 1 - v - c)
    hi = min(1 - v, 1 - c)
    ends = tuple(PopulationConfiguration(x, 1 - v - x, 1 - c - x) for x in (lo, hi))
    lik = (lambda pi: asymptotic_likelihood_urn(pi, g, g.g1 + g.g2)) if form == "urn" else \
        (lambda pi: asymptotic_likelihood_iid(pi, g, p))
    best = lik(ends[0]).log_value
    zd = zd_log = zc = None
    if v >= c:
        zd = ends[0].zero_defier()
        zd_log = lik(zd).log_value
        if not _close(zd_log, best):
            zd = None
    if v <= c:
        zc = ends[0].zero_complier()
        if not _close(lik(zc).log_value, best):
            zc = None
    return PopulationMLE(g, form, v, c, ends, best, zd, zd_log, zc)


def _close(a: float, b: float, rel: float = 1e-12) -> bool:
    if a == b:
        return True
    return abs(math.exp(a - b) - 1.0) <= rel


def asymptotic_lambda_no_defiers(g: DataConfiguration, form: str = "iid", p=Fraction(1, 2)) -> float:
    """Population likelihood ratio for ``H0: pi2 = 0``.

    Without defiers the treated share under intervention cannot fall below the
    share under control; when the observed shares satisfy this the
    restriction does not bind and the ratio is one.  Otherwise the
    constrained maximum sits at equal shares, the pooled proportion.
    """
    v, c = _arm_shares(g)
    full = _population_log_likelihood(g, v, c, form, p)
    if v >= c:
        return 1.0
    q = Fraction(g.g1 + g.g3, g.s)
    return math.exp(_population_log_likelihood(g, q, q, form, p) - full)


# -- asymptotic baseline ---------------------------------------------------------------

@dataclass
class TwoProportionResult:
    estimate: float
    standard_error: float
    z: float
    p_value: float
    asymptotic: bool = True

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "standard_error": self.standard_error, "z": self.z,
                "p_value": self.p_value, "asymptotic": True,
                "note": "normal approximation; not an exact finite-sample test"}


def two_proportion_test(g: DataConfiguration) -> TwoProportionResult:
    """Unpooled two-sample z-test of equal treated shares (two-sided)."""
    v, c = _arm_shares(g)
    n1, n0 = g.g1 + g.g2, g.g3 + g.g4
    est = float(v - c)
    se = math.sqrt(float(v * (1 - v)) / n1 + float(c * (1 - c)) / n0)
    if se == 0.0:
        z = 0.0 if est == 0 else math.copysign(math.inf, est)
        p = 1.0 if est == 0 else 0.0
    else:
        z = est / se
        p = math.erfc(abs(z) / math.sqrt(2.0))
    return TwoProportionResult(est, se, z, p)
