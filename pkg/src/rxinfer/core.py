"""Domain types, lattice enumeration and the numeric substrate.

Both the latent type configuration and the observed data configuration are
compositions of the sample size ``s`` into four nonnegative parts.  They share
one canonical order: lexicographic in the first three coordinates.  The rank of
a point in that order indexes every per-configuration array in the package.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional, Union

import numpy as np

NEG_INF = float("-inf")

#: Largest sample size supported by the shared ln-factorial table.
MAX_TABLE_S = 2000

Rational = Union[Fraction, int, str]


class InvalidInput(ValueError):
    """Raised for malformed configurations, specs or mismatched sizes."""


def _check_s(s: int) -> int:
    if not isinstance(s, (int, np.integer)) or isinstance(s, bool) or s < 1:
        raise InvalidInput(f"sample size must be a positive integer, got {s!r}")
    return int(s)


@dataclass(frozen=True)
class TypeConfiguration:
    """Counts of never takers, defiers, compliers and always takers."""

    never: int
    defier: int
    complier: int
    always: int

    def __post_init__(self):
        for name in ("never", "defier", "complier", "always"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise InvalidInput(f"{name} must be a nonnegative integer, got {v!r}")
        if self.s < 1:
            raise InvalidInput("type configuration must describe at least one individual")

    @classmethod
    def from_first_three(cls, s: int, never: int, defier: int, complier: int) -> "TypeConfiguration":
        return cls(never, defier, complier, s - never - defier - complier)

    @property
    def s(self) -> int:
        return self.never + self.defier + self.complier + self.always

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.never, self.defier, self.complier, self.always)

    def __iter__(self):
        return iter(self.as_tuple())

    def __str__(self):
        return "({},{},{},{})".format(*self.as_tuple())


@dataclass(frozen=True)
class DataConfiguration:
    """Observed 2x2 cross-tabulation.

    ``g1`` treated in intervention, ``g2`` untreated in intervention,
    ``g3`` treated in control, ``g4`` untreated in control.
    """

    g1: int
    g2: int
    g3: int
    g4: int

    def __post_init__(self):
        for name in ("g1", "g2", "g3", "g4"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise InvalidInput(f"{name} must be a nonnegative integer, got {v!r}")
        if self.s < 1:
            raise InvalidInput("data configuration must describe at least one individual")

    @classmethod
    def from_first_three(cls, s: int, g1: int, g2: int, g3: int) -> "DataConfiguration":
        return cls(g1, g2, g3, s - g1 - g2 - g3)

    @classmethod
    def parse(cls, text: str) -> "DataConfiguration":
        parts = [p for p in re.split(r"[,\s]+", text.strip().strip("()[]")) if p]
        if len(parts) != 4:
            raise InvalidInput(f"expected four comma separated counts, got {text!r}")
        try:
            return cls(*(int(p) for p in parts))
        except ValueError as exc:
            raise InvalidInput(f"bad data configuration {text!r}") from exc

    @property
    def s(self) -> int:
        return self.g1 + self.g2 + self.g3 + self.g4

    @property
    def intervention_size(self) -> int:
        return self.g1 + self.g2

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.g1, self.g2, self.g3, self.g4)

    def __iter__(self):
        return iter(self.as_tuple())

    def __str__(self):
        return "({},{},{},{})".format(*self.as_tuple())


@dataclass(frozen=True)
class ArmSplit:
    """Numbers of each type assigned to the intervention arm."""

    n12: int  # never takers
    n22: int  # defiers
    n31: int  # compliers
    n41: int  # always takers

    def within(self, theta: TypeConfiguration) -> bool:
        return (0 <= self.n12 <= theta.never and 0 <= self.n22 <= theta.defier
                and 0 <= self.n31 <= theta.complier and 0 <= self.n41 <= theta.always)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.n12, self.n22, self.n31, self.n41)


def _to_fraction(p: Rational) -> Fraction:
    if isinstance(p, float):
        raise InvalidInput("p must be given as an exact rational (e.g. '1/2'), not a float")
    try:
        return Fraction(p)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise InvalidInput(f"cannot read {p!r} as a rational") from exc


@dataclass(frozen=True)
class IID:
    """Independent coin flips with intended intervention fraction ``p``."""

    p: Fraction

    def __init__(self, p: Rational):
        q = _to_fraction(p)
        if not 0 < q < 1:
            raise InvalidInput(f"p must lie strictly between 0 and 1, got {q}")
        object.__setattr__(self, "p", q)

    tag = "iid"

    def check(self, s: int) -> None:
        _check_s(s)

    def __str__(self):
        return f"iid:p={self.p}"


@dataclass(frozen=True)
class Urn:
    """``m`` names drawn without replacement into the intervention arm."""

    m: int

    def __init__(self, m: int):
        if not isinstance(m, (int, np.integer)) or isinstance(m, bool) or m < 1:
            raise InvalidInput(f"urn draw size must be a positive integer, got {m!r}")
        object.__setattr__(self, "m", int(m))

    tag = "urn"

    def check(self, s: int) -> None:
        _check_s(s)
        if self.m >= s:
            raise InvalidInput(f"urn draw size m={self.m} must be less than s={s}")

    def __str__(self):
        return f"urn:m={self.m}"


RandomizationSpec = Union[IID, Urn]


def parse_spec(text: str) -> RandomizationSpec:
    """Read ``iid:p=1/2`` or ``urn:m=50``."""
    m = re.fullmatch(r"\s*(iid|urn)\s*[:]\s*(p|m)\s*=\s*([0-9/]+)\s*", text or "")
    if not m:
        raise InvalidInput(f"unrecognised randomization spec {text!r}; use iid:p=1/2 or urn:m=50")
    kind, key, val = m.groups()
    if kind == "iid" and key == "p":
        return IID(val)
    if kind == "urn" and key == "m":
        try:
            return Urn(int(val))
        except ValueError as exc:
            raise InvalidInput(f"bad urn size {val!r}") from exc
    raise InvalidInput(f"spec {text!r} mixes kind and parameter")


@dataclass(frozen=True)
class LikelihoodValue:
    """A probability carried in log space, optionally with its exact value."""

    log_value: float
    exact: Optional[Fraction] = None

    @classmethod
    def zero(cls, exact: bool = False) -> "LikelihoodValue":
        return cls(NEG_INF, Fraction(0) if exact else None)

    @classmethod
    def from_exact(cls, value: Fraction) -> "LikelihoodValue":
        return cls(log_fraction(value), Fraction(value))

    @property
    def value(self) -> float:
        if self.exact is not None:
            return _fraction_to_float(self.exact)
        return math.exp(self.log_value)

    def __float__(self):
        return self.value


def _fraction_to_float(x: Fraction) -> float:
    try:
        return float(x)
    except OverflowError:
        return math.exp(log_fraction(x))


def log_fraction(x: Fraction) -> float:
    """Natural log of a nonnegative rational without overflowing floats."""
    x = Fraction(x)
    if x < 0:
        raise InvalidInput("log of a negative number")
    if x == 0:
        return NEG_INF
    return _log_int(x.numerator) - _log_int(x.denominator)


def _log_int(n: int) -> float:
    bits = n.bit_length()
    if bits < 1000:
        return math.log(n)
    shift = bits - 64
    return math.log(n >> shift) + shift * math.log(2.0)


def log_add(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def logsumexp(values) -> float:
    """Sum in log space, accumulating in the given order."""
    acc = NEG_INF
    for v in values:
        acc = log_add(acc, v)
    return acc


class LnFactorialTable:
    """``ln n!`` for ``n = 0..size``; every pmf in log mode goes through it."""

    def __init__(self, size: int = MAX_TABLE_S):
        if size > MAX_TABLE_S:
            raise InvalidInput(f"ln-factorial table limited to {MAX_TABLE_S}")
        vals = [0.0] * (size + 1)
        for n in range(2, size + 1):
            vals[n] = math.lgamma(n + 1)
        self._vals = vals
        self.size = size

    def __getitem__(self, n: int) -> float:
        return self._vals[n]

    def log_comb(self, n: int, k: int) -> float:
        if k < 0 or k > n:
            return NEG_INF
        return self._vals[n] - self._vals[k] - self._vals[n - k]


@lru_cache(maxsize=None)
def ln_factorials(size: int = MAX_TABLE_S) -> LnFactorialTable:
    return LnFactorialTable(size)


def log_binom_pmf(a: int, b: int, p: Rational, table: Optional[LnFactorialTable] = None) -> float:
    """``ln[C(b, a) p^a (1-p)^(b-a)]``, or ``-inf`` outside the support."""
    p = _to_fraction(p)
    if not 0 < p < 1:
        raise InvalidInput("p must lie strictly between 0 and 1")
    if a < 0 or b < 0 or a > b:
        return NEG_INF
    table = table or ln_factorials()
    return table.log_comb(b, a) + a * math.log(p) + (b - a) * math.log1p(-float(p))


def binom_pmf_exact(a: int, b: int, p: Fraction) -> Fraction:
    if a < 0 or b < 0 or a > b:
        return Fraction(0)
    return math.comb(b, a) * p ** a * (1 - p) ** (b - a)


# ---------------------------------------------------------------------------
# lattice


def lattice_size(s: int) -> int:
    return math.comb(s + 3, 3)


def enumerate_type_configs(s: int) -> Iterator[TypeConfiguration]:
    """Every type configuration of ``s`` individuals, in canonical order."""
    s = _check_s(s)
    for t1 in range(s + 1):
        for t2 in range(s - t1 + 1):
            for t3 in range(s - t1 - t2 + 1):
                yield TypeConfiguration(t1, t2, t3, s - t1 - t2 - t3)


def enumerate_data_configs(s: int) -> Iterator[DataConfiguration]:
    """Every data configuration of size ``s``; the order defines the cache rank."""
    s = _check_s(s)
    for g1 in range(s + 1):
        for g2 in range(s - g1 + 1):
            for g3 in range(s - g1 - g2 + 1):
                yield DataConfiguration(g1, g2, g3, s - g1 - g2 - g3)


class Lattice:
    """Rank/unrank tables for the compositions of ``s`` into four parts."""

    def __init__(self, s: int):
        s = _check_s(s)
        self.s = s
        self.size = lattice_size(s)
        base1 = np.zeros(s + 2, dtype=np.int64)
        for x in range(s + 1):
            base1[x + 1] = base1[x] + math.comb(s - x + 2, 2)
        self.base1 = base1
        # base12[a, b] = rank of (a, b, 0); -1 outside the simplex
        base12 = np.full((s + 1, s + 1), -1, dtype=np.int64)
        for a in range(s + 1):
            r = s - a
            b = np.arange(r + 1, dtype=np.int64)
            base12[a, : r + 1] = base1[a] + b * (r + 1) - b * (b - 1) // 2
        self.base12 = base12
        c1 = np.empty(self.size, dtype=np.int64)
        c2 = np.empty(self.size, dtype=np.int64)
        c3 = np.empty(self.size, dtype=np.int64)
        for a in range(s + 1):
            for b in range(s - a + 1):
                start = base12[a, b]
                n = s - a - b + 1
                c1[start:start + n] = a
                c2[start:start + n] = b
                c3[start:start + n] = np.arange(n)
        self.c1, self.c2, self.c3 = c1, c2, c3
        self.c4 = s - c1 - c2 - c3
        for arr in (self.c1, self.c2, self.c3, self.c4, self.base12, self.base1):
            arr.setflags(write=False)

    def rank(self, x1: int, x2: int, x3: int) -> int:
        if min(x1, x2, x3) < 0 or x1 + x2 + x3 > self.s:
            raise InvalidInput(f"({x1},{x2},{x3}) is outside the lattice for s={self.s}")
        return int(self.base12[x1, x2]) + x3

    def theta_rank(self, theta: TypeConfiguration) -> int:
        self._same_s(theta.s)
        return self.rank(theta.never, theta.defier, theta.complier)

    def data_rank(self, g: DataConfiguration) -> int:
        self._same_s(g.s)
        return self.rank(g.g1, g.g2, g.g3)

    def theta(self, r: int) -> TypeConfiguration:
        return TypeConfiguration(int(self.c1[r]), int(self.c2[r]), int(self.c3[r]), int(self.c4[r]))

    def data(self, r: int) -> DataConfiguration:
        return DataConfiguration(int(self.c1[r]), int(self.c2[r]), int(self.c3[r]), int(self.c4[r]))

    def _same_s(self, s: int) -> None:
        if s != self.s:
            raise InvalidInput(f"configuration has s={s}, lattice has s={self.s}")


@lru_cache(maxsize=8)
def lattice(s: int) -> Lattice:
    return Lattice(s)


# ---------------------------------------------------------------------------
# feasibility


def split_range(theta: TypeConfiguration, g: DataConfiguration) -> tuple[int, int]:
    """Tightened summation range for the never-taker intervention count.

    Every index outside the returned closed interval makes one of the four
    implied arm counts negative or larger than its type count.  An empty
    range comes back as ``(lo, hi)`` with ``lo > hi``.
    """
    if theta.s != g.s:
        raise InvalidInput(f"theta has s={theta.s} but g has s={g.s}")
    t1, t2, t3, _ = theta.as_tuple()
    g1, g2, g3, g4 = g.as_tuple()
    lo = max(0, t1 - g4, g2 - t2, t1 + t3 - g1 - g4)
    hi = min(g2, t1, g2 - t2 + g3, t1 + t3 - g4)
    return lo, hi


def implied_split(theta: TypeConfiguration, g: DataConfiguration, ell: int) -> ArmSplit:
    """Arm split indexed by ``ell`` never takers in intervention."""
    s = g.s
    t1, _, t3, _ = theta.as_tuple()
    g1, g2, g3, _ = g.as_tuple()
    return ArmSplit(ell, g2 - ell, t1 + t3 + g1 + g2 + g3 - s - ell, s + ell - t1 - t3 - g2 - g3)


def feasible(theta: TypeConfiguration, g: DataConfiguration, spec: RandomizationSpec) -> bool:
    """True iff ``theta`` can produce ``g`` with positive probability under ``spec``."""
    spec.check(g.s)
    if isinstance(spec, Urn) and g.intervention_size != spec.m:
        return False
    lo, hi = split_range(theta, g)
    return lo <= hi
