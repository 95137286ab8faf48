"""Hot loops, compiled when possible.

The Cython extension ``_ckernels`` is used when it imports; otherwise the
numpy module ``_pykernels`` takes over with identical results.  Set
``RXINFER_BACKEND=python`` to force the fallback.

Weights returned here are assignment counts scaled by ``2**-s``.
"""

from __future__ import annotations

import math
import os
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ..core import IID, Urn, lattice, ln_factorials

from . import _pykernels

#: Compiled tables hold ``C(n, k) / 2**n`` in doubles; beyond this they underflow.
MAX_KERNEL_S = 1000

_impl = _pykernels
backend = "python"
if os.environ.get("RXINFER_BACKEND", "").lower() not in ("python", "py", "numpy"):
    try:
        from . import _ckernels

        _impl = _ckernels
        backend = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        pass


def use_backend(name: str):
    """Switch implementation at runtime (``"cython"`` or ``"python"``)."""
    global _impl, backend
    if name == "python":
        _impl, backend = _pykernels, "python"
    elif name == "cython":
        from . import _ckernels

        _impl, backend = _ckernels, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    out = ["python"]
    try:
        from . import _ckernels  # noqa: F401

        out.insert(0, "cython")
    except ImportError:  # pragma: no cover
        pass
    return out


def _check(s):
    if s > MAX_KERNEL_S:
        raise ValueError(f"kernels support s <= {MAX_KERNEL_S}, got {s}")


@lru_cache(maxsize=4)
def binom_table(s: int) -> np.ndarray:
    """``bt[n, k] = C(n, k) / 2**n``, zero for ``k > n``."""
    _check(s)
    bt = np.zeros((s + 1, s + 1))
    for n in range(s + 1):
        for k in range(n + 1):
            c = math.comb(n, k)
            try:
                bt[n, k] = math.ldexp(float(c), -n)
            except OverflowError:
                bt[n, k] = float(Fraction(c, 1 << n))
    bt.setflags(write=False)
    return bt


@lru_cache(maxsize=8)
def pmf_table(s: int, p: Fraction) -> np.ndarray:
    """``pm[n, k] = C(n, k) p^k (1-p)^(n-k)``."""
    _check(s)
    if p == Fraction(1, 2):
        return binom_table(s)
    lf = ln_factorials()
    lp, lq = math.log(p), math.log1p(-float(p))
    pm = np.zeros((s + 1, s + 1))
    for n in range(s + 1):
        for k in range(n + 1):
            pm[n, k] = math.exp(lf.log_comb(n, k) + k * lp + (n - k) * lq)
    pm.setflags(write=False)
    return pm


def _arrays(s):
    lat = lattice(s)
    return lat, np.ascontiguousarray(binom_table(s))


def _i64(x):
    return np.ascontiguousarray(np.asarray(x, dtype=np.int64))


def scan_denominator(s: int, g_ranks, rtol: float = 1e-9):
    """For each g rank: max weight over all thetas and near-tie candidate ranks."""
    lat, bt = _arrays(s)
    return _impl.scan_denominator(s, bt, lat.base12, lat.c1, lat.c2, lat.c3, _i64(g_ranks), float(rtol))


def scan_groups(s: int, g_ranks, codes, K: int):
    lat, bt = _arrays(s)
    codes = np.ascontiguousarray(np.asarray(codes, dtype=np.int32))
    return _impl.scan_groups(s, bt, lat.base12, lat.c1, lat.c2, lat.c3, _i64(g_ranks), codes, int(K))


def scan_members(s: int, g_ranks, member_ranks):
    lat, bt = _arrays(s)
    mr = _i64(member_ranks)
    return _impl.scan_members(s, bt, lat.c1, lat.c2, lat.c3, _i64(g_ranks),
                              _i64(lat.c1[mr]), _i64(lat.c2[mr]), _i64(lat.c3[mr]))


def member_weights(s: int, g_rank: int, member_ranks):
    lat, bt = _arrays(s)
    mr = _i64(member_ranks)
    return _impl.member_weights(s, bt, int(lat.c1[g_rank]), int(lat.c2[g_rank]), int(lat.c3[g_rank]),
                                _i64(lat.c1[mr]), _i64(lat.c2[mr]), _i64(lat.c3[mr]))


def dense_weights(s: int, g_rank: int):
    lat, bt = _arrays(s)
    return _impl.dense_weights(s, bt, lat.base12, int(lat.c1[g_rank]), int(lat.c2[g_rank]),
                               int(lat.c3[g_rank]), lat.size)


def compatible_count(s: int, g1: int, g2: int, g3: int) -> int:
    return int(_impl.compatible_count(s, g1, g2, g3))


def event_probs(s: int, spec, member_ranks, mask):
    """``P(G in mask | theta)`` for each theta rank listed."""
    lat = lattice(s)
    mr = _i64(member_ranks)
    m1, m2, m3 = _i64(lat.c1[mr]), _i64(lat.c2[mr]), _i64(lat.c3[mr])
    mask = np.ascontiguousarray(np.asarray(mask, dtype=np.uint8))
    if isinstance(spec, IID):
        pm = np.ascontiguousarray(pmf_table(s, spec.p))
        return _impl.event_probs_iid(s, pm, lat.base12, mask, m1, m2, m3)
    if isinstance(spec, Urn):
        return _impl.event_probs_urn(s, spec.m, np.ascontiguousarray(binom_table(s)), lat.base12,
                                     mask, m1, m2, m3)
    raise TypeError(f"unknown spec {spec!r}")
