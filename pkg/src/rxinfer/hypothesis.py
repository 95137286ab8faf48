"""Null-hypothesis sets over the type-configuration lattice.

Grammar::

    expr       := and_term { "or" and_term }
    and_term   := atom { "and" atom }
    atom       := comparison | "(" expr ")" | preset
    comparison := operand cmp number
    operand    := quantity | quantity "/" quantity
    cmp        := "==" | "<=" | ">=" | "<" | ">"
    preset     := "fisher_null" | "neyman_null"

Numbers are integers or decimals, optionally signed; ``n/d`` rationals are
also accepted so every formatted set can be parsed back.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Union

import numpy as np

from .core import InvalidInput, TypeConfiguration, lattice
from .quantities import (
    QUANTITIES, ALIASES, Operand, Quantity, Ratio, compare_mask, format_number, get_quantity,
)


class HypothesisSyntaxError(InvalidInput):
    def __init__(self, message: str, text: str, pos: int):
        self.text = text
        self.pos = pos
        caret = " " * pos + "^"
        super().__init__(f"{message} at position {pos}\n  {text}\n  {caret}")


class EmptyHypothesis(InvalidInput):
    pass


# -- syntax tree ---------------------------------------------------------------

@dataclass(frozen=True)
class Compare:
    operand: Operand
    op: str
    value: Fraction

    def mask(self, s):
        return compare_mask(self.operand, self.op, self.value, s)

    def format(self, parent=None):
        return f"{self.operand.name} {self.op} {format_number(self.value)}"


@dataclass(frozen=True)
class And:
    items: tuple

    def mask(self, s):
        out = self.items[0].mask(s)
        for it in self.items[1:]:
            out = out & it.mask(s)
        return out

    def format(self, parent=None):
        return " and ".join(it.format(self) for it in self.items)


@dataclass(frozen=True)
class Or:
    items: tuple

    def mask(self, s):
        out = self.items[0].mask(s)
        for it in self.items[1:]:
            out = out | it.mask(s)
        return out

    def format(self, parent=None):
        text = " or ".join(it.format(self) for it in self.items)
        return f"({text})" if isinstance(parent, And) else text


@dataclass(frozen=True)
class Preset:
    name: str

    def mask(self, s):
        lat = lattice(s)
        if self.name == "fisher_null":
            return (lat.c2 == 0) & (lat.c3 == 0)
        return lat.c2 == lat.c3

    def format(self, parent=None):
        return self.name


Node = Union[Compare, And, Or, Preset]
PRESETS = ("fisher_null", "neyman_null")

# -- parser ----------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:\s*/\s*\d+)?)
  | (?P<cmp>==|<=|>=|<|>)
  | (?P<slash>/)
  | (?P<lpar>\()
  | (?P<rpar>\))
  | (?P<word>[A-Za-z_][A-Za-z_0-9]*)
""", re.VERBOSE)


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise HypothesisSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


def _number(tok: str) -> Fraction:
    tok = tok.replace(" ", "")
    if "/" in tok:
        n, d = tok.split("/")
        if int(d) == 0:
            raise ValueError("zero denominator")
        return Fraction(n) / int(d)
    return Fraction(tok)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind
            got = tok[1] or "end of input"
            raise HypothesisSyntaxError(f"expected {want}, found {got!r}", self.text, tok[2])
        self.i += 1
        return tok

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise HypothesisSyntaxError(f"unexpected {tok[1]!r}", self.text, tok[2])
        return node

    def expr(self) -> Node:
        items = [self.and_term()]
        while self.peek()[0] == "word" and self.peek()[1] == "or":
            self.i += 1
            items.append(self.and_term())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def and_term(self) -> Node:
        items = [self.atom()]
        while self.peek()[0] == "word" and self.peek()[1] == "and":
            self.i += 1
            items.append(self.atom())
        return items[0] if len(items) == 1 else And(tuple(items))

    def atom(self) -> Node:
        kind, val, pos = self.peek()
        if kind == "lpar":
            self.i += 1
            node = self.expr()
            self.take("rpar")
            return node
        if kind == "word" and val in PRESETS:
            self.i += 1
            return Preset(val)
        if kind == "word":
            return self.comparison()
        raise HypothesisSyntaxError(f"expected a quantity, preset or '(', found {val or 'end of input'!r}",
                                    self.text, pos)

    def quantity(self) -> Quantity:
        kind, val, pos = self.take("word")
        if val not in QUANTITIES and val not in ALIASES:
            raise HypothesisSyntaxError(f"unknown quantity {val!r}", self.text, pos)
        return get_quantity(val)

    def comparison(self) -> Compare:
        operand: Operand = self.quantity()
        if self.peek()[0] == "slash":
            self.i += 1
            operand = Ratio(operand, self.quantity())
        op = self.take("cmp")[1]
        kind, val, pos = self.peek()
        if kind != "num":
            raise HypothesisSyntaxError(f"expected a number, found {val or 'end of input'!r}", self.text, pos)
        self.i += 1
        try:
            value = _number(val)
        except (ValueError, ZeroDivisionError):
            raise HypothesisSyntaxError(f"bad number {val!r}", self.text, pos) from None
        return Compare(operand, op, value)


def parse_expression(text: str) -> Node:
    if not isinstance(text, str) or not text.strip():
        raise HypothesisSyntaxError("empty hypothesis", text or "", 0)
    return _Parser(text).parse()


# -- sets ------------------------------------------------------------------------

class HypothesisSet:
    """The members of the lattice at sample size ``s`` satisfying ``expr``."""

    def __init__(self, expr: Node, s: int, *, allow_empty: bool = False):
        self.expr = expr
        self.s = s
        mask = np.asarray(expr.mask(s), dtype=bool)
        mask.setflags(write=False)
        self.mask = mask
        if not allow_empty and not mask.any():
            raise EmptyHypothesis(f"hypothesis {self.text!r} has no members at s={s}")

    @classmethod
    def from_mask(cls, mask: np.ndarray, s: int, label: str) -> "HypothesisSet":
        obj = cls.__new__(cls)
        obj.expr = None
        obj.s = s
        mask = np.array(mask, dtype=bool)
        mask.setflags(write=False)
        obj.mask = mask
        obj._label = label
        if not mask.any():
            raise EmptyHypothesis(f"hypothesis {label!r} has no members at s={s}")
        return obj

    @cached_property
    def text(self) -> str:
        return self.expr.format() if self.expr is not None else self._label

    @cached_property
    def members(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def key(self):
        return (self.s, self.text, hash(self.mask.tobytes()))

    def __len__(self):
        return len(self.members)

    def __contains__(self, theta: TypeConfiguration) -> bool:
        return bool(self.mask[lattice(self.s).theta_rank(theta)])

    def configurations(self):
        lat = lattice(self.s)
        return [lat.theta(int(r)) for r in self.members]

    def format(self) -> str:
        return self.text

    def __repr__(self):
        return f"HypothesisSet({self.text!r}, s={self.s}, size={len(self)})"


def parse_hypothesis(text: str, s: int) -> HypothesisSet:
    return HypothesisSet(parse_expression(text), s)


def as_hypothesis(h0, s: int) -> HypothesisSet:
    if isinstance(h0, HypothesisSet):
        if h0.s != s:
            raise InvalidInput(f"hypothesis built for s={h0.s}, data has s={s}")
        return h0
    return parse_hypothesis(h0, s)


def full_lattice(s: int) -> HypothesisSet:
    return HypothesisSet.from_mask(np.ones(lattice(s).size, dtype=bool), s, "all")
