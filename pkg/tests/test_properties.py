"""Randomised invariants over generated shapes, orders and parameters."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdeblur.blocks import ParamStore
from fracdeblur.dfrft import canonical_alpha, frft2d, frft_eigen, get_plan
from fracdeblur.freqsplit import KINDS, build_filter, split_frequencies
from fracdeblur.imageio import encode_pnm, parse_pnm
from fracdeblur.kernel import format_kern, parse_kern
from fracdeblur.tensorcore import convolve2d, fft2d

sizes = st.integers(min_value=2, max_value=24)
orders = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)
SETTINGS = settings(max_examples=40, deadline=None)


def _signal(seed, *shape):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@SETTINGS
@given(n=sizes, alpha=orders, seed=seeds)
def test_eigen_frft_unitary(n, alpha, seed):
    x = _signal(seed, n)
    y = frft_eigen(get_plan(n), x, alpha)
    assert abs(np.linalg.norm(y) - np.linalg.norm(x)) <= 1e-10 * np.linalg.norm(x)


@SETTINGS
@given(n=sizes, a=orders, b=orders, seed=seeds)
def test_eigen_frft_additive(n, a, b, seed):
    x = _signal(seed, n)
    plan = get_plan(n)
    lhs = frft_eigen(plan, frft_eigen(plan, x, a), b)
    rhs = frft_eigen(plan, x, a + b)
    assert np.abs(lhs - rhs).max() <= 1e-9 * np.linalg.norm(x)


@SETTINGS
@given(h=sizes, w=sizes, a=orders, seed=seeds)
def test_frft2d_linear(h, w, a, seed):
    x, y = _signal(seed, h, w), _signal(seed + 1, h, w)
    c = 0.7 - 1.3j
    lhs = frft2d(c * x + y, (a, a))
    rhs = c * frft2d(x, (a, a)) + frft2d(y, (a, a))
    assert np.abs(lhs - rhs).max() <= 1e-9 * (np.abs(x).max() + np.abs(y).max())


@SETTINGS
@given(a=st.floats(min_value=-50, max_value=50, allow_nan=False))
def test_canonical_alpha_range_and_period(a):
    c = canonical_alpha(a)
    assert -2 < c <= 2
    assert abs(((a - c) / 4) - round((a - c) / 4)) <= 1e-9


@SETTINGS
@given(h=sizes, w=sizes, seed=seeds)
def test_fft_parseval(h, w, seed):
    x = _signal(seed, h, w)
    assert abs(np.linalg.norm(fft2d(x)) - np.linalg.norm(x)) <= 1e-10 * np.linalg.norm(x)


@SETTINGS
@given(h=st.integers(4, 20), w=st.integers(4, 20), k=st.integers(1, 3), seed=seeds)
def test_fft_and_direct_convolution_agree(h, w, k, seed):
    rng = np.random.default_rng(seed)
    img, ker = rng.random((h, w)), rng.random((2 * k - 1, 2 * k - 1))
    for boundary in ("circular", "zero-pad"):
        a = convolve2d(img, ker, "fft", boundary)
        b = convolve2d(img, ker, "direct", boundary)
        assert np.abs(a - b).max() <= 1e-9


@SETTINGS
@given(h=sizes, w=sizes, kind=st.sampled_from(KINDS), uc=st.floats(0.5, 20), us=st.floats(0, 20),
       seed=seeds)
def test_split_reconstructs(h, w, kind, uc, us, seed):
    x = np.random.default_rng(seed).random((h, w))
    lo, hi = split_frequencies(x, build_filter(h, w, kind, uc, us))
    assert np.abs(lo + hi - x).max() <= 1e-9


@SETTINGS
@given(h=sizes, w=sizes, c=st.sampled_from([1, 3]), bits=st.sampled_from([8, 16]), seed=seeds)
def test_pnm_round_trip(h, w, c, bits, seed):
    levels = 2 ** bits - 1
    t = np.round(np.random.default_rng(seed).random((h, w, c)) * levels) / levels
    np.testing.assert_array_equal(parse_pnm(encode_pnm(t, bits)), t)


@SETTINGS
@given(side=st.sampled_from([1, 3, 5, 7]), seed=seeds)
def test_kern_round_trip(side, seed):
    k = np.random.default_rng(seed).random((side, side)) + 1e-3
    k = k + k[::-1, ::-1]  # centrosymmetric, so always centred
    k /= k.sum()
    # parsing renormalises, so agreement is to rounding rather than bit-exact
    np.testing.assert_allclose(parse_kern(format_kern(k)), k, rtol=1e-14, atol=0)


@SETTINGS
@given(values=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=6), seed=seeds)
def test_param_store_round_trip(values, seed):
    store = ParamStore({"a.b": values, "scalar.nsr": values[0]}, seed=seed % 2 ** 31)
    assert ParamStore.from_bytes(store.to_bytes()) == store
