"""The per-(s, spec) table of maximum likelihoods over all type configurations.

For every data configuration, in canonical rank order, the table records the
log of the largest likelihood over the whole lattice and the ranks of every
type configuration attaining it.  Building it is the expensive step of a test
at realistic sample sizes, so it is persisted in a small binary format:

    header   <4sHBBIQQQQ  magic "RXLT", version, spec tag, mode, s,
                          param_a, param_b, n_records, n_argmax
    digest   32 bytes     sha256 over header and payload
    records  n_records x <dIQ  log-max-likelihood, argmax count, argmax offset
    argmax   n_argmax  x <I    theta ranks

``param_a/param_b`` hold ``p`` as numerator/denominator for the coin-flip
design and ``m``/0 for the urn.
"""

from __future__ import annotations

import fcntl
import hashlib
import math
import os
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import kernels
from .core import IID, NEG_INF, InvalidInput, RandomizationSpec, Urn, lattice, log_fraction
from .likelihood import assignment_count, log_spec_factor

MAGIC = b"RXLT"
VERSION = 1
_HEADER = struct.Struct("<4sHBBIQQQQ")
_RECORD = np.dtype([("log_max", "<f8"), ("count", "<u4"), ("offset", "<u8")])
_MODES = {"log": 0, "exact": 1}
_TIE_RTOL = 1e-9
_CHUNK = 1024


class CacheError(RuntimeError):
    """Corrupt, truncated or unreadable cache file."""


class CacheMismatch(RuntimeError):
    """Cache file describes a different (s, spec, mode)."""


def default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


@dataclass
class LambdaTable:
    s: int
    spec: RandomizationSpec
    mode: str
    log_max: np.ndarray
    argmax_offsets: np.ndarray
    argmax_ranks: np.ndarray
    build_seconds: float = 0.0
    overlays: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        s = self.s
        sizes = lattice(s).c1 + lattice(s).c2
        factors = np.array([log_spec_factor(self.spec, s, m) for m in range(s + 1)])
        with np.errstate(invalid="ignore"):
            lw = self.log_max - factors[sizes]
        lw[~np.isfinite(self.log_max)] = NEG_INF
        self._log_weight = lw
        self._log_factors = factors

    def __len__(self):
        return len(self.log_max)

    @property
    def log_weight(self) -> np.ndarray:
        """``ln`` of the largest assignment count for each g."""
        return self._log_weight

    def argmax(self, g_rank: int) -> np.ndarray:
        return self.argmax_ranks[self.argmax_offsets[g_rank]:self.argmax_offsets[g_rank + 1]]

    def matches(self, s: int, spec: RandomizationSpec) -> bool:
        return self.s == s and self.spec == spec

    def multi_valued_count(self) -> int:
        return int(np.count_nonzero(np.diff(self.argmax_offsets) > 1))

    def exact_max_count(self, g_rank: int) -> int:
        """Exact largest assignment count for one g, from the recorded argmax set."""
        lat = lattice(self.s)
        g = lat.data(g_rank)
        cands = self.argmax(g_rank)
        return max((assignment_count(lat.theta(int(r)), g) for r in cands), default=0)

    # -- persistence ---------------------------------------------------------

    def to_bytes(self) -> bytes:
        if isinstance(self.spec, IID):
            tag, pa, pb = 1, self.spec.p.numerator, self.spec.p.denominator
        else:
            tag, pa, pb = 2, self.spec.m, 0
        if pa >= 2 ** 64 or pb >= 2 ** 64:
            raise CacheError("spec parameter too large for the cache header")
        rec = np.empty(len(self.log_max), dtype=_RECORD)
        rec["log_max"] = self.log_max
        rec["count"] = np.diff(self.argmax_offsets)
        rec["offset"] = self.argmax_offsets[:-1]
        payload = rec.tobytes() + self.argmax_ranks.astype("<u4").tobytes()
        header = _HEADER.pack(MAGIC, VERSION, tag, _MODES[self.mode], self.s, pa, pb,
                              len(rec), len(self.argmax_ranks))
        return header + hashlib.sha256(header + payload).digest() + payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "LambdaTable":
        if len(data) < _HEADER.size + 32:
            raise CacheError("cache file truncated (header)")
        magic, version, tag, mode, s, pa, pb, n, na = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise CacheError("not a lambda table (bad magic)")
        if version != VERSION:
            raise CacheError(f"unsupported cache version {version}")
        expected = _HEADER.size + 32 + n * _RECORD.itemsize + 4 * na
        if len(data) != expected:
            raise CacheError(f"cache file truncated or padded ({len(data)} bytes, expected {expected})")
        header = data[:_HEADER.size]
        digest = data[_HEADER.size:_HEADER.size + 32]
        payload = data[_HEADER.size + 32:]
        if hashlib.sha256(header + payload).digest() != digest:
            raise CacheError("cache checksum mismatch")
        if tag == 1:
            spec = IID(Fraction(pa, pb))
        elif tag == 2:
            spec = Urn(pa)
        else:
            raise CacheError(f"unknown spec tag {tag}")
        rec = np.frombuffer(payload, dtype=_RECORD, count=n)
        ranks = np.frombuffer(payload, dtype="<u4", count=na, offset=n * _RECORD.itemsize)
        offsets = np.empty(n + 1, dtype=np.int64)
        offsets[:-1] = rec["offset"]
        offsets[-1] = na
        if n != lattice(s).size:
            raise CacheError("record count does not match the lattice size")
        mode_name = {v: k for k, v in _MODES.items()}.get(mode)
        if mode_name is None:
            raise CacheError(f"unknown mode flag {mode}")
        return cls(s, spec, mode_name, np.array(rec["log_max"], dtype=np.float64),
                   offsets, np.array(ranks, dtype=np.uint32))

    def save(self, path: str) -> None:
        data = self.to_bytes()
        with _locked(path):
            tmp = f"{path}.tmp{os.getpid()}"
            with open(tmp, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)


@contextmanager
def _locked(path: str):
    lock_path = f"{path}.lock"
    with open(lock_path, "a") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def load_table(path: str, s: Optional[int] = None, spec: Optional[RandomizationSpec] = None,
               mode: Optional[str] = None) -> LambdaTable:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CacheError(f"cannot read cache {path}: {exc}") from exc
    table = LambdaTable.from_bytes(data)
    if (s is not None and table.s != s) or (spec is not None and table.spec != spec) or \
            (mode is not None and table.mode != mode):
        raise CacheMismatch(f"cache {path} holds s={table.s} {table.spec} mode={table.mode}")
    return table


def _relevant_ranks(s: int, spec: RandomizationSpec) -> np.ndarray:
    lat = lattice(s)
    if isinstance(spec, Urn):
        return np.flatnonzero(lat.c1 + lat.c2 == spec.m)
    return np.arange(lat.size)


def _map_chunks(fn, ranks: np.ndarray, threads: Optional[int]):
    chunks = [ranks[i:i + _CHUNK] for i in range(0, len(ranks), _CHUNK)]
    threads = threads or default_threads()
    if threads <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def build_lambda_table(s: int, spec: RandomizationSpec, h0=None, *, threads: Optional[int] = None,
                       mode: str = "exact") -> LambdaTable:
    """Compute the denominator table (and optionally the overlay for ``h0``).

    ``mode="exact"`` settles every near tie with integer arithmetic, so the
    recorded argmax sets are exact; ``mode="log"`` keeps every candidate within
    a relative ``1e-9`` of the floating-point maximum.
    """
    if mode not in _MODES:
        raise InvalidInput(f"mode must be 'log' or 'exact', got {mode!r}")
    spec.check(s)
    lat = lattice(s)
    t0 = time.perf_counter()
    ranks = _relevant_ranks(s, spec)
    parts = _map_chunks(lambda c: kernels.scan_denominator(s, c, _TIE_RTOL), ranks, threads)

    best = np.zeros(lat.size)
    counts = np.zeros(lat.size, dtype=np.int64)
    cand_by_rank: dict[int, np.ndarray] = {}
    pos = 0
    for b, offs, cand in parts:
        n = len(b)
        sl = ranks[pos:pos + n]
        best[sl] = b
        per = np.diff(offs)
        counts[sl] = per
        multi = np.flatnonzero(per > 1)
        for i in multi:
            cand_by_rank[int(sl[i])] = cand[offs[i]:offs[i + 1]]
        single = np.flatnonzero(per == 1)
        for i in single:
            cand_by_rank[int(sl[i])] = cand[offs[i]:offs[i + 1]]
        pos += n

    if mode == "exact":
        for r, cands in cand_by_rank.items():
            if len(cands) > 1:
                g = lat.data(r)
                vals = [assignment_count(lat.theta(int(t)), g) for t in cands]
                top = max(vals)
                cand_by_rank[r] = np.array([t for t, v in zip(cands, vals) if v == top], dtype=np.int64)

    offsets = np.zeros(lat.size + 1, dtype=np.int64)
    for r in range(lat.size):
        c = cand_by_rank.get(r)
        offsets[r + 1] = offsets[r] + (0 if c is None else len(c))
    argmax = np.zeros(int(offsets[-1]), dtype=np.uint32)
    for r, c in cand_by_rank.items():
        argmax[offsets[r]:offsets[r + 1]] = np.sort(c)

    log_max = np.full(lat.size, NEG_INF)
    sizes = lat.c1 + lat.c2
    factors = np.array([log_spec_factor(spec, s, m) for m in range(s + 1)])
    pos_mask = best > 0
    log_max[pos_mask] = np.log(best[pos_mask]) + s * math.log(2.0) + factors[sizes[pos_mask]]
    if mode == "exact":
        # exact log of the largest count wherever a tie was resolved exactly
        for r, c in cand_by_rank.items():
            if len(c) > 1:
                g = lat.data(r)
                log_max[r] = log_fraction(Fraction(assignment_count(lat.theta(int(c[0])), g))) + factors[sizes[r]]
    np.minimum(log_max, 0.0, out=log_max)
    table = LambdaTable(s, spec, mode, log_max, offsets, argmax, time.perf_counter() - t0)
    if h0 is not None:
        overlay(table, h0, threads=threads)
    return table


def overlay(table: LambdaTable, h0, *, threads: Optional[int] = None) -> np.ndarray:
    """``ln`` of the largest assignment count over ``h0`` for every g (cached)."""
    key = h0.key
    if key in table.overlays:
        return table.overlays[key]
    s, spec = table.s, table.spec
    lat = lattice(s)
    ranks = _relevant_ranks(s, spec)
    members = h0.members
    if len(members) <= lat.size // 4:
        parts = _map_chunks(lambda c: kernels.scan_members(s, c, members), ranks, threads)
        best_sel = np.concatenate(parts) if parts else np.zeros(0)
    else:
        codes = np.full(lat.size, -1, dtype=np.int32)
        codes[members] = 0
        parts = _map_chunks(lambda c: kernels.scan_groups(s, c, codes, 1)[:, 0], ranks, threads)
        best_sel = np.concatenate(parts) if parts else np.zeros(0)
    out = np.full(lat.size, NEG_INF)
    with np.errstate(divide="ignore"):
        out[ranks] = np.where(best_sel > 0, np.log(best_sel) + s * math.log(2.0), NEG_INF)
    table.overlays[key] = out
    return out
