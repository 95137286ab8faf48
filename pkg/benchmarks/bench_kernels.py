"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--s 40] [--n 200] [--repeat 3]

Each kernel runs on the same random inputs under both backends; the script
reports the best-of-N wall time, the speedup, and the largest relative
difference between the two outputs.
"""

import argparse
import time
from fractions import Fraction

import numpy as np

from rxinfer import kernels
from rxinfer.core import IID, lattice


def _best(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _rel_diff(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = np.maximum(np.abs(a), np.abs(b))
    scale[scale == 0] = 1.0
    return float(np.max(np.abs(a - b) / scale, initial=0.0))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--s", type=int, default=40)
    ap.add_argument("--n", type=int, default=200, help="data configurations per kernel")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    s = args.s
    lat = lattice(s)
    rng = np.random.default_rng(args.seed)
    g_ranks = rng.choice(lat.size, size=min(args.n, lat.size), replace=False)
    members = np.flatnonzero(lat.c2 == 0)
    mask = rng.random(lat.size) < 0.3
    spec = IID(Fraction(1, 2))

    cases = {
        "scan_denominator": lambda: kernels.scan_denominator(s, g_ranks)[0],
        "scan_members": lambda: kernels.scan_members(s, g_ranks, members),
        "dense_weights": lambda: kernels.dense_weights(s, int(g_ranks[0])),
        "event_probs": lambda: kernels.event_probs(s, spec, members[:50], mask),
    }
    backends = kernels.available_backends()
    print(f"s={s}  lattice={lat.size}  g sample={len(g_ranks)}  backends={backends}")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max rel diff':>14}")
    original = kernels.backend
    try:
        for name, fn in cases.items():
            times, outs = {}, {}
            for b in backends:
                kernels.use_backend(b)
                times[b], outs[b] = _best(fn, args.repeat)
            row = f"{name:<18}" + "".join(f"{times[b] * 1e3:>10.1f}ms" for b in backends)
            if len(backends) == 2:
                row += f"{times['python'] / times['cython']:>9.1f}x{_rel_diff(outs['python'], outs['cython']):>14.2e}"
            print(row)
    finally:
        kernels.use_backend(original)


if __name__ == "__main__":
    main()
