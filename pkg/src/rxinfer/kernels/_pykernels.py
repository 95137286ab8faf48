"""Numpy implementations of the compiled kernels.

Same signatures and semantics as ``_ckernels``.  For one ``g`` the weights of
all thetas come from a 4-d grid over the per-cell type splits, with the
never-taker intervention count as the slowest axis; ``np.bincount`` then adds
each theta's terms in ascending order of that count, the same order the
compiled loop uses.
"""

from __future__ import annotations

import numpy as np


def _grid_terms(s, bt, base12, g1, g2, g3):
    g4 = s - g1 - g2 - g3
    a = np.arange(g2 + 1).reshape(-1, 1, 1, 1)    # never takers in intervention
    ap = np.arange(g4 + 1).reshape(1, -1, 1, 1)   # never takers in control
    bp = np.arange(g3 + 1).reshape(1, 1, -1, 1)   # defiers in control
    d = np.arange(g1 + 1).reshape(1, 1, 1, -1)    # always takers in intervention
    t1 = a + ap
    t2 = (g2 - a) + bp
    t3 = (g1 - d) + (g4 - ap)
    t4 = d + (g3 - bp)
    shape = np.broadcast_shapes(t1.shape, t2.shape, t3.shape, t4.shape)
    t1, t2, t3, t4 = (np.broadcast_to(t, shape).ravel() for t in (t1, t2, t3, t4))
    aa = np.broadcast_to(a, shape).ravel()
    dd = np.broadcast_to(d, shape).ravel()
    terms = bt[t1, aa] * bt[t2, g2 - aa] * bt[t3, g1 - dd] * bt[t4, dd]
    ranks = base12[t1, t2] + t3
    return ranks, terms


def _dense(s, bt, base12, g1, g2, g3, size):
    ranks, terms = _grid_terms(s, bt, base12, g1, g2, g3)
    w = np.bincount(ranks, weights=terms, minlength=size)
    feas = np.zeros(size, dtype=bool)
    feas[ranks] = True
    return w, feas


def scan_denominator(s, bt, base12, c1, c2, c3, g_ranks, rtol):
    size = len(c1)
    best = np.zeros(len(g_ranks))
    offs = np.zeros(len(g_ranks) + 1, dtype=np.int64)
    cands = []
    for i, r in enumerate(g_ranks):
        w, feas = _dense(s, bt, base12, int(c1[r]), int(c2[r]), int(c3[r]), size)
        b = float(w.max())
        best[i] = b
        sel = np.flatnonzero(feas & (w >= b * (1.0 - rtol)) & (w > 0.0))
        cands.append(sel)
        offs[i + 1] = offs[i] + len(sel)
    cand = np.concatenate(cands).astype(np.int64) if cands else np.zeros(0, dtype=np.int64)
    return best, offs, cand


def scan_groups(s, bt, base12, c1, c2, c3, g_ranks, codes, K):
    size = len(c1)
    out = np.zeros((len(g_ranks), K))
    if K == 0:
        return out
    valid = codes >= 0
    for i, r in enumerate(g_ranks):
        w, feas = _dense(s, bt, base12, int(c1[r]), int(c2[r]), int(c3[r]), size)
        sel = valid & feas
        np.maximum.at(out[i], codes[sel], w[sel])
    return out


def dense_weights(s, bt, base12, g1, g2, g3, size):
    return _dense(s, bt, base12, g1, g2, g3, size)[0]


def compatible_count(s, g1, g2, g3):
    from ..core import lattice

    lat = lattice(s)
    _, feas = _dense(s, _unit_table(s), lat.base12, g1, g2, g3, lat.size)
    return int(feas.sum())


def _unit_table(s):
    return np.ones((s + 1, s + 1))


def _member_weights(s, bt, g1, g2, g3, m1, m2, m3):
    g4 = s - g1 - g2 - g3
    m4 = s - m1 - m2 - m3
    lo = np.maximum.reduce([np.zeros_like(m1), m1 - g4, g2 - m2, m1 + m3 - g1 - g4])
    hi = np.minimum.reduce([np.full_like(m1, g2), m1, g2 - m2 + g3, m1 + m3 - g4])
    x = m1 + m3 - g4
    y = g1 + g4 - m1 - m3
    w = np.zeros(len(m1))
    if len(m1) == 0:
        return w
    span = int((hi - lo).max(initial=-1))
    for k in range(span + 1):
        a = lo + k
        ok = a <= hi
        if not ok.any():
            continue
        aa = np.where(ok, a, 0)
        term = (bt[m1, aa] * bt[m2, np.where(ok, g2 - aa, 0)]
                * bt[m3, np.where(ok, x - aa, 0)] * bt[m4, np.where(ok, y + aa, 0)])
        w += np.where(ok, term, 0.0)
    return w


def scan_members(s, bt, c1, c2, c3, g_ranks, m1, m2, m3):
    out = np.zeros(len(g_ranks))
    for i, r in enumerate(g_ranks):
        w = _member_weights(s, bt, int(c1[r]), int(c2[r]), int(c3[r]), m1, m2, m3)
        out[i] = w.max(initial=0.0)
    return out


def member_weights(s, bt, g1, g2, g3, m1, m2, m3):
    return _member_weights(s, bt, g1, g2, g3, m1, m2, m3)


def event_probs_iid(s, pm, base12, mask, m1, m2, m3):
    out = np.zeros(len(m1))
    mask = mask.astype(bool)
    for j in range(len(m1)):
        t1, t2, t3 = int(m1[j]), int(m2[j]), int(m3[j])
        t4 = s - t1 - t2 - t3
        n1 = np.arange(t1 + 1).reshape(-1, 1, 1, 1)
        n2 = np.arange(t2 + 1).reshape(1, -1, 1, 1)
        n3 = np.arange(t3 + 1).reshape(1, 1, -1, 1)
        n4 = np.arange(t4 + 1).reshape(1, 1, 1, -1)
        prob = pm[t1, n1] * pm[t2, n2] * pm[t3, n3] * pm[t4, n4]
        ranks = base12[n3 + n4, n1 + n2] + (t2 - n2) + (t4 - n4)
        out[j] = float(np.sum(prob * mask[ranks]))
    return out


def event_probs_urn(s, m, bt, base12, mask, m1, m2, m3):
    out = np.zeros(len(m1))
    mask = mask.astype(bool)
    norm = bt[s, m]
    for j in range(len(m1)):
        t1, t2, t3 = int(m1[j]), int(m2[j]), int(m3[j])
        t4 = s - t1 - t2 - t3
        n1 = np.arange(t1 + 1).reshape(-1, 1, 1)
        n2 = np.arange(t2 + 1).reshape(1, -1, 1)
        n4 = np.arange(t4 + 1).reshape(1, 1, -1)
        n3 = m - n1 - n2 - n4
        ok = (n3 >= 0) & (n3 <= t3)
        n3c = np.clip(n3, 0, t3)
        prob = bt[t1, n1] * bt[t2, n2] * bt[t4, n4] * bt[t3, n3c]
        ranks = base12[np.clip(n3c + n4, 0, s), np.clip(n1 + n2, 0, s)] + (t2 - n2) + (t4 - n4)
        ranks = np.where(ok, ranks, 0)
        out[j] = float(np.sum(np.where(ok, prob * mask[ranks], 0.0))) / norm
    return out
