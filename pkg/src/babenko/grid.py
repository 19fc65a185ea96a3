"""Uniform-grid 2pi-periodic functions and Fourier-multiplier operators.

All operators act on real samples ``f(u_j)``, ``u_j = 2*pi*j/N``, through the
real FFT.  The Nyquist mode is dropped after every symbol application so that
the discrete ``K`` is symmetric and the discrete Hilbert transform is exactly
skew.  Products of two grid functions are de-aliased with the 3/2 rule.

Functions accept either a plain ``ndarray`` or a :class:`GridFunction` and
return the same kind they were given.
"""
from dataclasses import dataclass
from functools import lru_cache, wraps

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridFunction", "OperatorSymbolTable", "symbols", "grid", "is_power_of_two",
    "hilbert", "k_op", "k_inverse", "derivative", "product", "inner", "norm",
    "mean", "project_even", "project_odd", "resample", "cosine_coefficients",
    "from_cosine_coefficients", "top_octave_tail",
]

_WORKERS = None


def set_fft_workers(workers):
    """Cap the number of threads scipy.fft may use (``None`` = library default)."""
    global _WORKERS
    _WORKERS = workers


def _rfft(f):
    return sfft.rfft(f, workers=_WORKERS)


def _irfft(F, n):
    return sfft.irfft(F, n, workers=_WORKERS)


def is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


def _check_size(N):
    if N < 4 or not is_power_of_two(N):
        raise ValueError(f"grid size must be a power of two >= 4, got {N}")


@dataclass(frozen=True)
class OperatorSymbolTable:
    """Fourier symbols on the non-negative half spectrum ``n = 0..N/2``."""

    N: int
    hilbert_symbol: np.ndarray
    k_symbol: np.ndarray
    derivative_symbol: np.ndarray


@lru_cache(maxsize=32)
def symbols(N):
    _check_size(N)
    n = np.arange(N // 2 + 1, dtype=float)
    hil = 1j * np.ones_like(n)
    hil[0] = 0.0
    k = n.copy()
    d = 1j * n
    for arr in (hil, k, d):
        arr[-1] = 0.0
        arr.flags.writeable = False
    return OperatorSymbolTable(N, hil, k, d)


@lru_cache(maxsize=32)
def grid(N):
    u = 2 * np.pi * np.arange(N) / N
    u.flags.writeable = False
    return u


class GridFunction:
    """Immutable real samples of a 2pi-periodic function on a uniform grid."""

    __slots__ = ("_samples",)

    def __init__(self, samples):
        a = np.array(samples, dtype=float)
        if a.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        _check_size(a.size)
        a.flags.writeable = False
        self._samples = a

    @classmethod
    def from_function(cls, func, N):
        return cls(func(grid(N)))

    @classmethod
    def from_coefficients(cls, coeffs, N):
        """Build from the half spectrum ``F_n = (1/N) sum_j f_j e^{-i n u_j}``."""
        return cls(_irfft(np.asarray(coeffs, dtype=complex) * N, N))

    @property
    def samples(self):
        return self._samples

    @property
    def N(self):
        return self._samples.size

    @property
    def coefficients(self):
        """Normalized Fourier coefficients for ``n = 0..N/2``."""
        return _rfft(self._samples) / self.N

    def __array__(self, dtype=None, copy=None):
        return self._samples if dtype is None else self._samples.astype(dtype)

    def __len__(self):
        return self.N

    def __add__(self, other):
        return GridFunction(self._samples + np.asarray(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self._samples - np.asarray(other))

    def __rsub__(self, other):
        return GridFunction(np.asarray(other) - self._samples)

    def __mul__(self, scalar):
        if isinstance(scalar, GridFunction):
            return product(self, scalar)
        return GridFunction(self._samples * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(-self._samples)

    def __truediv__(self, scalar):
        return GridFunction(self._samples / scalar)

    def __repr__(self):
        return f"GridFunction(N={self.N}, max={np.abs(self._samples).max():.3e})"


def _gridwise(fn):
    """Run ``fn`` on raw samples; wrap the result back if a GridFunction came in."""

    @wraps(fn)
    def wrapper(f, *args, **kwargs):
        if isinstance(f, GridFunction):
            return GridFunction(fn(f.samples, *args, **kwargs))
        return fn(np.asarray(f, dtype=float), *args, **kwargs)

    return wrapper


def _apply_symbol(f, symbol):
    F = _rfft(f)
    F *= symbol
    return _irfft(F, f.size)


@_gridwise
def hilbert(f):
    """Periodic Hilbert transform, symbol ``i sgn(n)``."""
    return _apply_symbol(f, symbols(f.size).hilbert_symbol)


@_gridwise
def k_op(f):
    """``K = -H d/du``, symbol ``|n|``."""
    return _apply_symbol(f, symbols(f.size).k_symbol)


@_gridwise
def derivative(f):
    return _apply_symbol(f, symbols(f.size).derivative_symbol)


@_gridwise
def k_inverse(f, zero_mode_tol=None):
    """Solve ``K g = f`` with ``<1, g> = 0`` by division ``1/|n|`` on ``n != 0``.

    With ``zero_mode_tol`` set, a right-hand side whose mean exceeds the
    tolerance (relative to its rms) raises ``SolvabilityViolation``.
    """
    F = _rfft(f)
    N = f.size
    if zero_mode_tol is not None:
        from .errors import SolvabilityViolation

        scale = max(np.sqrt(np.mean(f * f)), 1e-300)
        if abs(F[0].real) / N > zero_mode_tol * max(scale, 1.0):
            raise SolvabilityViolation(
                f"K-solve right-hand side has mean {F[0].real / N:.3e}")
    k = symbols(N).k_symbol
    G = np.zeros_like(F)
    G[1:-1] = F[1:-1] / k[1:-1]
    return _irfft(G, N)


def _pad(F, N, M):
    """Zero-pad (or truncate) a half spectrum from size N to size M, keeping scale."""
    G = np.zeros(M // 2 + 1, dtype=complex)
    m = min(N, M) // 2
    G[:m] = F[:m]
    return G * (M / N)


def product(f, g):
    """De-aliased pointwise product (3/2 rule), truncated back to ``|n| < N/2``."""
    wrap = isinstance(f, GridFunction) or isinstance(g, GridFunction)
    a = np.asarray(f, dtype=float)
    b = np.asarray(g, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.size} vs {b.size}")
    N = a.size
    M = 3 * N // 2
    ap = _irfft(_pad(_rfft(a), N, M), M)
    bp = _irfft(_pad(_rfft(b), N, M), M)
    H = _pad(_rfft(ap * bp), M, N)
    H[-1] = 0.0
    out = _irfft(H, N)
    return GridFunction(out) if wrap else out


def inner(f, g):
    """Normalized inner product ``(1/2pi) \\oint f g du`` by the trapezoid rule."""
    a = np.asarray(f, dtype=float)
    b = np.asarray(g, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.size} vs {b.size}")
    return float(np.dot(a, b) / a.size)


def norm(f):
    a = np.asarray(f, dtype=float)
    return float(np.sqrt(np.dot(a, a) / a.size))


def mean(f):
    return float(np.mean(np.asarray(f, dtype=float)))


def _reflect(f):
    # f(-u_j) = f(u_{N-j})
    return np.roll(f[::-1], 1)


@_gridwise
def project_even(f):
    return 0.5 * (f + _reflect(f))


@_gridwise
def project_odd(f):
    return 0.5 * (f - _reflect(f))


@_gridwise
def resample(f, N_new):
    """Fourier interpolation (zero padding) or truncation to ``N_new`` points."""
    _check_size(N_new)
    F = _pad(_rfft(f), f.size, N_new)
    F[-1] = 0.0
    return _irfft(F, N_new)


def cosine_coefficients(f):
    """Coefficients ``a_n`` of ``f = sum_{n=0}^{N/2} a_n cos(n u)`` (even part only)."""
    a = np.asarray(f, dtype=float)
    F = _rfft(a).real / a.size
    F[1:-1] *= 2.0
    F[-1] = 0.0
    return F


def from_cosine_coefficients(a, N=None):
    a = np.asarray(a, dtype=float)
    if N is None:
        N = 2 * (a.size - 1)
    if a.size != N // 2 + 1:
        raise ValueError(f"expected {N // 2 + 1} cosine coefficients, got {a.size}")
    F = a.astype(complex) * N
    F[1:-1] *= 0.5
    F[-1] = 0.0
    return _irfft(F, N)


def top_octave_tail(f):
    """Largest |coefficient| in the top octave ``N/4 <= n < N/2`` relative to rms of f."""
    a = np.asarray(f, dtype=float)
    N = a.size
    F = np.abs(_rfft(a)) / N
    return float(F[N // 4:N // 2].max() / max(norm(a), 1e-300))
