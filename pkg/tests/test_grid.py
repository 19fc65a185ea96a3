import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from babenko import grid as g
from babenko.errors import SolvabilityViolation

N = 256
TOL = 1e-12
samples = arrays(np.float64, N, elements=st.floats(-1.0, 1.0, allow_nan=False))
sizes = st.sampled_from([8, 16, 64, 256, 1024])


@st.composite
def smooth(draw, n=N):
    """Band-limited even-plus-odd function with geometric decay."""
    seed = draw(st.integers(0, 2**32 - 1))
    rate = draw(st.floats(0.05, 0.6))
    rng = np.random.default_rng(seed)
    k = np.arange(n // 2 + 1)
    F = (rng.standard_normal(k.size) + 1j * rng.standard_normal(k.size)) * np.exp(-rate * k)
    F[0] = F[0].real
    F[-1] = 0
    return np.fft.irfft(F * n, n)


def test_symbols_match_definitions():
    t = g.symbols(16)
    n = np.arange(9)
    assert np.allclose(t.k_symbol[:-1], n[:-1])
    assert np.allclose(t.hilbert_symbol[1:-1], 1j)
    assert t.hilbert_symbol[0] == 0 and t.k_symbol[-1] == 0 and t.derivative_symbol[-1] == 0


def test_bad_grid_size():
    with pytest.raises(ValueError):
        g.symbols(12)
    with pytest.raises(ValueError):
        g.resample(np.zeros(8), 24)


def test_operators_on_trig_polynomials():
    u = g.grid(64)
    assert np.allclose(g.hilbert(np.cos(3 * u)), -np.sin(3 * u), atol=1e-14)
    assert np.allclose(g.hilbert(np.sin(3 * u)), np.cos(3 * u), atol=1e-14)
    assert np.allclose(g.k_op(np.cos(5 * u)), 5 * np.cos(5 * u), atol=1e-13)
    assert np.allclose(g.derivative(np.sin(2 * u)), 2 * np.cos(2 * u), atol=1e-13)
    # K = -H d/du
    f = np.cos(u) + 0.3 * np.sin(4 * u)
    assert np.allclose(g.k_op(f), -g.hilbert(g.derivative(f)), atol=1e-13)


def test_gridfunction_roundtrip():
    f = g.GridFunction.from_function(lambda u: np.exp(np.cos(u)), 32)
    h = g.k_op(f)
    assert isinstance(h, g.GridFunction)
    f2 = g.GridFunction.from_coefficients(f.coefficients, 32)
    assert np.allclose(f2.samples, f.samples, atol=1e-14)


@given(samples, samples)
@settings(max_examples=40, deadline=None)
def test_k_symmetric_and_hilbert_skew(f, h):
    scale = max(1.0, g.norm(f) * g.norm(h))
    kscale = max(1.0, g.norm(g.k_op(f)) * g.norm(h), g.norm(f) * g.norm(g.k_op(h)))
    assert abs(g.inner(g.k_op(f), h) - g.inner(f, g.k_op(h))) <= TOL * kscale
    assert abs(g.inner(g.hilbert(f), h) + g.inner(f, g.hilbert(h))) <= TOL * scale


@given(samples)
@settings(max_examples=40, deadline=None)
def test_k_nonnegative_and_hilbert_square(f):
    assert g.inner(g.k_op(f), f) >= -TOL
    # H^2 = -I on functions with zero mean and no Nyquist content
    F = np.fft.rfft(f)
    F[0] = 0
    F[-1] = 0
    f0 = np.fft.irfft(F, N)
    assert np.allclose(g.hilbert(g.hilbert(f0)), -f0, atol=TOL * 10)


@given(smooth())
@settings(max_examples=30, deadline=None)
def test_k_inverse_and_parity(f):
    f0 = f - g.mean(f)
    back = g.k_op(g.k_inverse(f0))
    assert np.allclose(back, f0, atol=1e-11)
    assert abs(g.mean(g.k_inverse(f0))) < 1e-14
    e, o = g.project_even(f), g.project_odd(f)
    assert np.allclose(e + o, f, atol=1e-14)
    # K keeps parity, H swaps it
    assert g.norm(g.project_odd(g.k_op(e))) < 1e-12
    assert g.norm(g.project_odd(g.hilbert(o))) < 1e-12


def test_k_inverse_solvability():
    with pytest.raises(SolvabilityViolation):
        g.k_inverse(np.ones(16) + np.cos(g.grid(16)), zero_mode_tol=1e-12)


@given(smooth(64), smooth(64))
@settings(max_examples=30, deadline=None)
def test_dealiased_product_exact_for_band_limited(f, h):
    # products of two functions of bandwidth N/4 fit in the grid exactly
    fl = g.resample(g.resample(f, 32), 64)
    hl = g.resample(g.resample(h, 32), 64)
    assert np.allclose(g.product(fl, hl), fl * hl, atol=1e-12)


@given(smooth(64), sizes)
@settings(max_examples=30, deadline=None)
def test_resample_roundtrip(f, M):
    if M >= 64:
        assert np.allclose(g.resample(g.resample(f, M), 64), g.resample(f, 64), atol=1e-12)
    up = g.resample(f, 128)
    assert np.allclose(up[::2], g.resample(f, 64), atol=1e-12)


def test_cosine_coefficients_roundtrip():
    u = g.grid(32)
    f = 0.2 + np.cos(u) - 0.5 * np.cos(3 * u)
    a = g.cosine_coefficients(f)
    assert np.allclose(a[:4], [0.2, 1.0, 0.0, -0.5], atol=1e-15)
    assert np.allclose(g.from_cosine_coefficients(a), f, atol=1e-15)
    assert g.top_octave_tail(f) < 1e-15


def test_inner_product_normalization():
    u = g.grid(64)
    assert g.inner(np.cos(u), np.cos(u)) == pytest.approx(0.5, abs=1e-15)
    assert g.norm(np.ones(64)) == pytest.approx(1.0)
