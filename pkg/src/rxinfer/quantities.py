"""Quantities of interest: functions of a type configuration.

Every built-in quantity is an integer linear form in the four type counts,
optionally divided by ``s``, so comparisons against rational thresholds can be
done exactly and vectorized over the whole lattice with integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .core import InvalidInput, TypeConfiguration, lattice

INF = math.inf
Value = Union[Fraction, float, None]   # float only for +/-inf, None when ill-defined

_OPS = ("==", "<=", ">=", "<", ">")


@dataclass(frozen=True)
class Quantity:
    name: str
    coeffs: tuple[int, int, int, int]
    per_capita: bool = False     # divide by s

    def denominator(self, s: int) -> int:
        return s if self.per_capita else 1

    def numerators(self, s: int) -> np.ndarray:
        lat = lattice(s)
        a, b, c, d = self.coeffs
        return a * lat.c1 + b * lat.c2 + c * lat.c3 + d * lat.c4

    def value(self, theta: TypeConfiguration) -> Fraction:
        num = sum(k * x for k, x in zip(self.coeffs, theta.as_tuple()))
        return Fraction(num, self.denominator(theta.s))

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Ratio:
    """``num / den`` with the conventions x/0 = +inf for x > 0, -inf for
    x < 0, and 0/0 ill-defined (never a member of any set built on it)."""

    num: Quantity
    den: Quantity

    @property
    def name(self) -> str:
        return f"{self.num.name} / {self.den.name}"

    def value(self, theta: TypeConfiguration) -> Value:
        a, b = self.num.value(theta), self.den.value(theta)
        if b == 0:
            return None if a == 0 else (INF if a > 0 else -INF)
        return a / b

    def __str__(self):
        return self.name


Operand = Union[Quantity, Ratio]

QUANTITIES: dict[str, Quantity] = {
    "never": Quantity("never", (1, 0, 0, 0)),
    "defiers": Quantity("defiers", (0, 1, 0, 0)),
    "compliers": Quantity("compliers", (0, 0, 1, 0)),
    "always": Quantity("always", (0, 0, 0, 1)),
    "affected": Quantity("affected", (0, 1, 1, 0)),
    "avg_effect": Quantity("avg_effect", (0, -1, 1, 0), per_capita=True),
}
ALIASES = {"killed": "defiers", "saved": "compliers"}


def get_quantity(name: str) -> Quantity:
    key = ALIASES.get(name, name)
    try:
        q = QUANTITIES[key]
    except KeyError:
        raise InvalidInput(f"unknown quantity {name!r}") from None
    # keep the user's spelling so formatted hypotheses round-trip verbatim
    return q if key == name else Quantity(name, q.coeffs, q.per_capita)


def parse_operand(text: str) -> Operand:
    parts = [p.strip() for p in text.split("/")]
    if len(parts) == 1:
        return get_quantity(parts[0])
    if len(parts) == 2:
        return Ratio(get_quantity(parts[0]), get_quantity(parts[1]))
    raise InvalidInput(f"bad quantity expression {text!r}")


def _cmp(lhs: np.ndarray, op: str, rhs) -> np.ndarray:
    if op == "==":
        return lhs == rhs
    if op == "<=":
        return lhs <= rhs
    if op == ">=":
        return lhs >= rhs
    if op == "<":
        return lhs < rhs
    if op == ">":
        return lhs > rhs
    raise InvalidInput(f"unknown comparison {op!r}")


def _cmp_inf(sign: int, op: str) -> bool:
    if sign > 0:
        return op in (">", ">=")
    return op in ("<", "<=")


def compare_mask(operand: Operand, op: str, r: Fraction, s: int) -> np.ndarray:
    """Boolean mask over the lattice of ``operand(theta) op r``, exactly."""
    r = Fraction(r)
    n, d = r.numerator, r.denominator
    if isinstance(operand, Quantity):
        return _cmp(operand.numerators(s) * d, op, n * operand.denominator(s))
    a = operand.num.numerators(s) * operand.den.denominator(s)
    b = operand.den.numerators(s) * operand.num.denominator(s)
    lhs = a * d
    rhs = n * b
    pos = b > 0
    neg = b < 0
    out = np.zeros(len(a), dtype=bool)
    out[pos] = _cmp(lhs[pos], op, rhs[pos])
    flipped = {"<": ">", ">": "<", "<=": ">=", ">=": "<=", "==": "=="}[op]
    out[neg] = _cmp(lhs[neg], flipped, rhs[neg])
    zero = b == 0
    if _cmp_inf(1, op):
        out[zero & (a > 0)] = True
    if _cmp_inf(-1, op):
        out[zero & (a < 0)] = True
    return out


def compare_value(v: Value, op: str, r: Fraction) -> bool:
    """Scalar twin of :func:`compare_mask` (used for cross-checks)."""
    if v is None:
        return False
    if isinstance(v, float) and math.isinf(v):
        return _cmp_inf(1 if v > 0 else -1, op)
    return bool(_cmp(np.array([v], dtype=object), op, Fraction(r))[0])


def value_range(operand: Operand, s: int) -> list[Value]:
    """Sorted distinct values of the operand over the lattice (ill-defined points dropped)."""
    if isinstance(operand, Quantity):
        den = operand.denominator(s)
        return [Fraction(int(v), den) for v in np.unique(operand.numerators(s))]
    a = operand.num.numerators(s) * operand.den.denominator(s)
    b = operand.den.numerators(s) * operand.num.denominator(s)
    vals: set = set()
    for x, y in set(zip(a.tolist(), b.tolist())):
        if y == 0:
            if x != 0:
                vals.add(INF if x > 0 else -INF)
        else:
            vals.add(Fraction(x, y))
    finite = sorted(v for v in vals if isinstance(v, Fraction))
    out: list[Value] = []
    if -INF in vals:
        out.append(-INF)
    out.extend(finite)
    if INF in vals:
        out.append(INF)
    return out


def format_number(r: Value) -> str:
    if isinstance(r, float):
        return "inf" if r > 0 else "-inf"
    if r is None:
        return "undefined"
    r = Fraction(r)
    if r.denominator == 1:
        return str(r.numerator)
    d = r.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{r.numerator}/{r.denominator}"
    places = max(twos, fives)
    scaled = abs(r.numerator) * (10 ** places // r.denominator)
    whole, frac = divmod(scaled, 10 ** places)
    sign = "-" if r < 0 else ""
    return f"{sign}{whole}.{frac:0{places}d}"


def as_json_number(v: Value) -> Optional[object]:
    """Integers stay integers, other rationals become ``"n/d"`` strings."""
    if v is None:
        return None
    if isinstance(v, float):
        return "inf" if v > 0 else "-inf"
    return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
