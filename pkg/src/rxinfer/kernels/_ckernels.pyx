# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

All weights are assignment counts scaled by ``2**-s``; ``bt[n, k]`` holds
``C(n, k) / 2**n`` so a product over the four types is ``count / 2**s``.
Within one ``(theta, g)`` pair, terms are accumulated in ascending order of
the never-taker intervention count.  Every routine releases the GIL.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef cnp.int32_t i32
ctypedef cnp.uint8_t u8


cdef inline long lmax(long a, long b) noexcept nogil:
    return a if a > b else b


cdef inline long lmin(long a, long b) noexcept nogil:
    return a if a < b else b


cdef long _scan_one(long s, const double* bt, const i64* base12,
                    long g1, long g2, long g3,
                    double* wbuf, i64* rbuf,
                    const i32* codes, double* gmax,
                    double* dense, double* best_out) noexcept nogil:
    """Visit every feasible theta for one g; returns the feasible count."""
    cdef long S1 = s + 1
    cdef long g4 = s - g1 - g2 - g3
    cdef long t1, t2, t3, t4, alo, ahi, t3lo, t3hi, lo, hi, a, x, y, k
    cdef long i1, i2, i3, i4
    cdef long n = 0
    cdef i64 rowbase, r
    cdef double w, best = 0.0
    for t1 in range(0, lmin(s, g2 + g4) + 1):
        i1 = t1 * S1
        for t2 in range(0, lmin(s - t1, g2 + g3) + 1):
            alo = lmax(lmax(0, t1 - g4), g2 - t2)
            ahi = lmin(lmin(g2, t1), g2 - t2 + g3)
            if alo > ahi:
                continue
            t3lo = lmax(0, alo + g4 - t1)
            t3hi = lmin(s - t1 - t2, ahi + g1 + g4 - t1)
            rowbase = base12[t1 * S1 + t2]
            for t3 in range(t3lo, t3hi + 1):
                t4 = s - t1 - t2 - t3
                x = t1 + t3 - g4
                y = g1 + g4 - t1 - t3
                lo = lmax(alo, -y)
                hi = lmin(ahi, x)
                i2 = t2 * S1 + g2
                i3 = t3 * S1 + x
                i4 = t4 * S1 + y
                w = 0.0
                for a in range(lo, hi + 1):
                    w += bt[i1 + a] * bt[i2 - a] * bt[i3 - a] * bt[i4 + a]
                r = rowbase + t3
                if w > best:
                    best = w
                if wbuf != NULL:
                    wbuf[n] = w
                    rbuf[n] = r
                if codes != NULL:
                    k = codes[r]
                    if k >= 0 and w > gmax[k]:
                        gmax[k] = w
                if dense != NULL:
                    dense[r] = w
                n += 1
    best_out[0] = best
    return n


def scan_denominator(long s, const double[:, ::1] bt, const i64[:, ::1] base12,
                     const i64[::1] c1, const i64[::1] c2, const i64[::1] c3,
                     const i64[::1] g_ranks, double rtol):
    """Max weight per g plus every theta within ``rtol`` of it."""
    cdef long ng = g_ranks.shape[0]
    cdef long size = c1.shape[0]
    best_arr = np.zeros(ng, dtype=np.float64)
    offs_arr = np.zeros(ng + 1, dtype=np.int64)
    cdef double[::1] best = best_arr
    cdef i64[::1] offs = offs_arr
    cdef double* wbuf = <double*> malloc(size * sizeof(double))
    cdef i64* rbuf = <i64*> malloc(size * sizeof(i64))
    cdef long cap = 4 * ng + 64
    cdef i64* cand = <i64*> malloc(cap * sizeof(i64))
    cdef i64* tmp
    cdef long ncand = 0, i, j, n, r
    cdef double b, thr
    if wbuf == NULL or rbuf == NULL or cand == NULL:
        free(wbuf); free(rbuf); free(cand)
        raise MemoryError()
    try:
        with nogil:
            for i in range(ng):
                r = g_ranks[i]
                n = _scan_one(s, &bt[0, 0], &base12[0, 0], c1[r], c2[r], c3[r],
                              wbuf, rbuf, NULL, NULL, NULL, &b)
                best[i] = b
                thr = b * (1.0 - rtol)
                for j in range(n):
                    if wbuf[j] >= thr and wbuf[j] > 0.0:
                        if ncand == cap:
                            cap = 2 * cap
                            tmp = <i64*> realloc(cand, cap * sizeof(i64))
                            if tmp == NULL:
                                break
                            cand = tmp
                        cand[ncand] = rbuf[j]
                        ncand += 1
                offs[i + 1] = ncand
        if offs[ng] != ncand:
            raise MemoryError()
        cand_arr = np.empty(ncand, dtype=np.int64)
        for i in range(ncand):
            cand_arr[i] = cand[i]
    finally:
        free(wbuf); free(rbuf); free(cand)
    return best_arr, offs_arr, cand_arr


def scan_groups(long s, const double[:, ::1] bt, const i64[:, ::1] base12,
                const i64[::1] c1, const i64[::1] c2, const i64[::1] c3,
                const i64[::1] g_ranks, const i32[::1] codes, long K):
    """Per-g maximum within each group of thetas (``codes[rank]``, -1 = skip)."""
    cdef long ng = g_ranks.shape[0]
    out_arr = np.zeros((ng, K), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef long i, r
    cdef double b
    if ng == 0 or K == 0:
        return out_arr
    with nogil:
        for i in range(ng):
            r = g_ranks[i]
            _scan_one(s, &bt[0, 0], &base12[0, 0], c1[r], c2[r], c3[r],
                      NULL, NULL, &codes[0], &out[i, 0], NULL, &b)
    return out_arr


def dense_weights(long s, const double[:, ::1] bt, const i64[:, ::1] base12,
                  long g1, long g2, long g3, long size):
    """Weight of every theta for one g, zero where infeasible."""
    out_arr = np.zeros(size, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double b
    with nogil:
        _scan_one(s, &bt[0, 0], &base12[0, 0], g1, g2, g3, NULL, NULL, NULL, NULL, &out[0], &b)
    return out_arr


def compatible_count(long s, long g1, long g2, long g3):
    cdef long g4 = s - g1 - g2 - g3
    cdef long t1, t2, alo, ahi, t3lo, t3hi, n = 0
    with nogil:
        for t1 in range(0, lmin(s, g2 + g4) + 1):
            for t2 in range(0, lmin(s - t1, g2 + g3) + 1):
                alo = lmax(lmax(0, t1 - g4), g2 - t2)
                ahi = lmin(lmin(g2, t1), g2 - t2 + g3)
                if alo > ahi:
                    continue
                t3lo = lmax(0, alo + g4 - t1)
                t3hi = lmin(s - t1 - t2, ahi + g1 + g4 - t1)
                if t3hi >= t3lo:
                    n += t3hi - t3lo + 1
    return n


cdef inline double _member_weight(long s, const double* bt, long g1, long g2, long g3, long g4,
                                  long t1, long t2, long t3, long t4) noexcept nogil:
    cdef long S1 = s + 1
    cdef long lo = lmax(lmax(0, t1 - g4), lmax(g2 - t2, t1 + t3 - g1 - g4))
    cdef long hi = lmin(lmin(g2, t1), lmin(g2 - t2 + g3, t1 + t3 - g4))
    cdef long a, x = t1 + t3 - g4, y = g1 + g4 - t1 - t3
    cdef long i1 = t1 * S1, i2 = t2 * S1 + g2, i3 = t3 * S1 + x, i4 = t4 * S1 + y
    cdef double w = 0.0
    for a in range(lo, hi + 1):
        w += bt[i1 + a] * bt[i2 - a] * bt[i3 - a] * bt[i4 + a]
    return w


def scan_members(long s, const double[:, ::1] bt, const i64[::1] c1, const i64[::1] c2, const i64[::1] c3,
                 const i64[::1] g_ranks, const i64[::1] m1, const i64[::1] m2, const i64[::1] m3):
    """Max weight over an explicit list of thetas, for each g."""
    cdef long ng = g_ranks.shape[0], nm = m1.shape[0]
    out_arr = np.zeros(ng, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef long i, j, r, g1, g2, g3, g4
    cdef double w, best
    with nogil:
        for i in range(ng):
            r = g_ranks[i]
            g1 = c1[r]; g2 = c2[r]; g3 = c3[r]; g4 = s - g1 - g2 - g3
            best = 0.0
            for j in range(nm):
                w = _member_weight(s, &bt[0, 0], g1, g2, g3, g4, m1[j], m2[j], m3[j],
                                   s - m1[j] - m2[j] - m3[j])
                if w > best:
                    best = w
            out[i] = best
    return out_arr


def member_weights(long s, const double[:, ::1] bt, long g1, long g2, long g3,
                   const i64[::1] m1, const i64[::1] m2, const i64[::1] m3):
    cdef long nm = m1.shape[0], j, g4 = s - g1 - g2 - g3
    out_arr = np.zeros(nm, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for j in range(nm):
            out[j] = _member_weight(s, &bt[0, 0], g1, g2, g3, g4, m1[j], m2[j], m3[j],
                                    s - m1[j] - m2[j] - m3[j])
    return out_arr


def event_probs_iid(long s, const double[:, ::1] pm, const i64[:, ::1] base12, const u8[::1] mask,
                    const i64[::1] m1, const i64[::1] m2, const i64[::1] m3):
    """P(G in mask | theta) for each listed theta, coin-flip assignment."""
    cdef long nm = m1.shape[0], S1 = s + 1
    out_arr = np.zeros(nm, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef long j, t1, t2, t3, t4, n1, n2, n3, n4, G2, G3
    cdef double P1, P12, P124, inner, tot
    cdef const double* row3
    with nogil:
        for j in range(nm):
            t1 = m1[j]; t2 = m2[j]; t3 = m3[j]; t4 = s - t1 - t2 - t3
            row3 = &pm[t3, 0]
            tot = 0.0
            for n1 in range(t1 + 1):
                P1 = pm[t1, n1]
                for n2 in range(t2 + 1):
                    P12 = P1 * pm[t2, n2]
                    G2 = n1 + n2
                    for n4 in range(t4 + 1):
                        P124 = P12 * pm[t4, n4]
                        G3 = t2 - n2 + t4 - n4
                        inner = 0.0
                        for n3 in range(t3 + 1):
                            if mask[base12[n3 + n4, G2] + G3]:
                                inner += row3[n3]
                        tot += P124 * inner
            out[j] = tot
    return out_arr


def event_probs_urn(long s, long m, const double[:, ::1] bt, const i64[:, ::1] base12, const u8[::1] mask,
                    const i64[::1] m1, const i64[::1] m2, const i64[::1] m3):
    """P(G in mask | theta) for each listed theta, fixed-size urn draw."""
    cdef long nm = m1.shape[0]
    out_arr = np.zeros(nm, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef long j, t1, t2, t3, t4, n1, n2, n3, n4
    cdef double norm = bt[s, m], P12, tot
    with nogil:
        for j in range(nm):
            t1 = m1[j]; t2 = m2[j]; t3 = m3[j]; t4 = s - t1 - t2 - t3
            tot = 0.0
            for n1 in range(lmin(t1, m) + 1):
                for n2 in range(lmin(t2, m - n1) + 1):
                    P12 = bt[t1, n1] * bt[t2, n2]
                    for n4 in range(lmin(t4, m - n1 - n2) + 1):
                        n3 = m - n1 - n2 - n4
                        if n3 > t3:
                            continue
                        if mask[base12[n3 + n4, n1 + n2] + t2 - n2 + t4 - n4]:
                            tot += P12 * bt[t4, n4] * bt[t3, n3]
            out[j] = tot / norm
    return out_arr
