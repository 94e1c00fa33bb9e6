"""Backend equivalence: the compiled kernels must match the numpy fallbacks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snsm import kernels


def _explicit_hadamard(n: int) -> np.ndarray:
    # H[r, j] = (-1)^popcount(r & j), the standard Sylvester construction
    H = np.ones((1, 1))
    while H.shape[0] < n:
        H = np.block([[H, H], [H, -H]])
    return H


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_segment_sqnorms_matches_fallback(rng):
    g = rng.standard_normal(1000)
    a = rng.integers(0, 17, size=1000)
    out = kernels.segment_sqnorms(g, a, 17)
    ref = kernels.numpy_impls["segment_sqnorms"](g, a, 17)
    np.testing.assert_array_equal(out, ref)


def test_segment_sums_matches_fallback(rng):
    g = rng.standard_normal(512)
    a = rng.integers(0, 8, size=512)
    np.testing.assert_array_equal(
        kernels.segment_sums(g, a, 8),
        kernels.numpy_impls["segment_sums"](g, a, 8))


def test_sn_apply_matches_fallback(rng):
    x = rng.standard_normal(256)
    g = rng.standard_normal(256)
    a = np.repeat(np.arange(16), 16)
    denoms = np.abs(rng.standard_normal(16)) + 0.1
    out = kernels.sn_apply_flat(x, g, denoms, a, 0.05)
    ref = kernels.numpy_impls["sn_apply_flat"](x, g, denoms, a, 0.05)
    np.testing.assert_array_equal(out, ref)


@pytest.mark.parametrize("n", [1, 2, 8, 64, 256])
def test_fwht_matches_explicit_hadamard(rng, n):
    v = rng.standard_normal(n)
    np.testing.assert_allclose(
        kernels.fwht(v.copy()), _explicit_hadamard(n) @ v,
        rtol=0, atol=1e-10)


def test_fwht_2d_matches_fallback(rng):
    M = rng.standard_normal((128, 5))
    np.testing.assert_array_equal(
        kernels.fwht(M.copy()), kernels.numpy_impls["fwht"](M.copy()))


def test_fwht_involution_up_to_scale(rng):
    v = rng.standard_normal(64)
    np.testing.assert_allclose(kernels.fwht(kernels.fwht(v.copy())) / 64, v,
                               atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.integers(1, 12), st.integers(0, 2 ** 32 - 1))
def test_segment_sqnorms_property(d, c, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(d)
    a = rng.integers(0, c, size=d)
    out = kernels.segment_sqnorms(g, a, c)
    assert out.shape == (c,)
    assert np.all(out >= 0)
    assert np.isclose(out.sum(), g @ g, rtol=1e-12)
