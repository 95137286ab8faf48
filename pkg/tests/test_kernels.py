from fractions import Fraction

import numpy as np
import pytest

from rxinfer import kernels
from rxinfer.core import IID, Urn, lattice
from rxinfer.likelihood import assignment_count


def test_dense_weights_are_scaled_counts(backend):
    s = 7
    lat = lattice(s)
    for gr in range(0, lat.size, 7):
        g = lat.data(gr)
        w = kernels.dense_weights(s, gr)
        exact = np.array([assignment_count(lat.theta(r), g) / 2 ** s for r in range(lat.size)])
        assert np.allclose(w, exact, rtol=1e-13, atol=0)


def test_backends_agree_exactly():
    if len(kernels.available_backends()) < 2:
        pytest.skip("compiled extension not built")
    s = 14
    lat = lattice(s)
    ranks = np.arange(0, lat.size, 5)
    members = np.flatnonzero(lat.c2 <= 1)
    mask = (np.arange(lat.size) % 3) == 0
    out = {}
    original = kernels.backend
    try:
        for b in ("cython", "python"):
            kernels.use_backend(b)
            out[b] = (
                kernels.scan_denominator(s, ranks),
                kernels.scan_members(s, ranks, members),
                kernels.scan_groups(s, ranks, (lat.c2 % 3).astype(np.int32), 3),
                kernels.event_probs(s, IID(Fraction(1, 3)), members, mask),
                kernels.event_probs(s, Urn(6), members, mask),
            )
    finally:
        kernels.use_backend(original)
    c, p = out["cython"], out["python"]
    for i in range(3):
        np.testing.assert_array_equal(c[0][i], p[0][i])
    np.testing.assert_array_equal(c[1], p[1])
    np.testing.assert_array_equal(c[2], p[2])
    np.testing.assert_allclose(c[3], p[3], rtol=1e-12)
    np.testing.assert_allclose(c[4], p[4], rtol=1e-12)


def test_event_probs_full_mask_is_one(backend):
    s = 9
    lat = lattice(s)
    members = np.arange(0, lat.size, 11)
    ones = np.ones(lat.size, dtype=bool)
    np.testing.assert_allclose(kernels.event_probs(s, IID(Fraction(2, 3)), members, ones), 1.0, rtol=1e-12)
    np.testing.assert_allclose(kernels.event_probs(s, Urn(4), members, ones), 1.0, rtol=1e-12)


def test_compatible_count(backend):
    assert kernels.compatible_count(100, 35, 15, 15) == 56_151


def test_size_limit():
    with pytest.raises(ValueError):
        kernels.binom_table(kernels.MAX_KERNEL_S + 1)
