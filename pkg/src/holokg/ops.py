"""Circular correlation, circular convolution, and involution.

Conventions (zero-indexed, length d):

    correlate(a, b)[k] = sum_i a[i] * b[(k + i) mod d]
    convolve(a, b)[k]  = sum_i a[i] * b[(k - i) mod d]
    involution(a)[i]   = a[(-i) mod d]

Correlation is the compositional operator used for scoring: it is
non-commutative (so directed edges can be modeled) and its component 0
equals the plain dot product. Convolution is commutative and is the
storage operator of the associative memory. The two are linked by
``correlate(a, b) == convolve(involution(a), b)``.

Both operations have a direct O(d^2) backend and an FFT backend using a
real transform of length exactly d (never padded, so results are
index-aligned for every d, odd or even). All math is float64.
"""

from __future__ import annotations

import enum

import numpy as np

from .exceptions import DimensionMismatch, NonFiniteInput


class Backend(enum.Enum):
    """Evaluation strategy for the circular operations."""

    NAIVE = "naive"
    FFT = "fft"


def _as_checked_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise DimensionMismatch(f"expected 1-d vectors, got shapes {a.shape} and {b.shape}")
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"lengths differ: {a.shape[0]} != {b.shape[0]}")
    if a.shape[0] < 1:
        raise DimensionMismatch("vectors must have length >= 1")
    if not np.isfinite(a).all() or not np.isfinite(b).all():
        raise NonFiniteInput("input vector contains NaN or Inf")
    return a, b


def delta(d: int) -> np.ndarray:
    """Identity element of circular convolution: [1, 0, ..., 0]."""
    v = np.zeros(d, dtype=np.float64)
    v[0] = 1.0
    return v


def involution(a) -> np.ndarray:
    """Mirror image of `a`: component i moves to (-i) mod d.

    It is its own inverse, and ``correlate(a, b) == convolve(involution(a), b)``.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.shape[0] < 1:
        raise DimensionMismatch(f"expected 1-d vector of length >= 1, got shape {a.shape}")
    out = np.empty_like(a)
    out[0] = a[0]
    out[1:] = a[:0:-1]
    return out


def _ccorr_naive(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a.shape[0]
    idx = np.arange(d)
    return np.array([a @ b[(k + idx) % d] for k in range(d)])


def _cconv_naive(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a.shape[0]
    idx = np.arange(d)
    return np.array([a @ b[(k - idx) % d] for k in range(d)])


def ccorr(a, b, backend: Backend = Backend.FFT) -> np.ndarray:
    """Circular correlation a * b (non-commutative).

    Component 0 is dot(a, b); the FFT backend computes
    irfft(conj(rfft(a)) * rfft(b)) at length d.
    """
    a, b = _as_checked_pair(a, b)
    if backend is Backend.NAIVE:
        return _ccorr_naive(a, b)
    d = a.shape[0]
    return np.fft.irfft(np.conj(np.fft.rfft(a)) * np.fft.rfft(b), n=d)


def cconv(a, b, backend: Backend = Backend.FFT) -> np.ndarray:
    """Circular convolution a (*) b (commutative)."""
    a, b = _as_checked_pair(a, b)
    if backend is Backend.NAIVE:
        return _cconv_naive(a, b)
    d = a.shape[0]
    return np.fft.irfft(np.fft.rfft(a) * np.fft.rfft(b), n=d)


def ccorr_rows(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise circular correlation of two (n, d) arrays. No validation."""
    d = A.shape[-1]
    return np.fft.irfft(np.conj(np.fft.rfft(A, axis=-1)) * np.fft.rfft(B, axis=-1), n=d, axis=-1)


def cconv_rows(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise circular convolution of two (n, d) arrays. No validation."""
    d = A.shape[-1]
    return np.fft.irfft(np.fft.rfft(A, axis=-1) * np.fft.rfft(B, axis=-1), n=d, axis=-1)


class SpectralContext:
    """Reusable transform context for one fixed vector length.

    Training and evaluation perform millions of transforms at a single
    length; the FFT backend caches its per-length twiddle tables
    process-wide, and this object pins the length, owns the frequency-
    domain scratch buffer, and lets callers reuse spectra of vectors that
    appear in many products. One context per worker thread; the plain
    module functions stay stateless and thread-safe.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise DimensionMismatch("dimension must be >= 1")
        self.dim = dim
        self.nfreq = dim // 2 + 1
        self._scratch = np.empty(self.nfreq, dtype=np.complex128)

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise DimensionMismatch(f"expected shape ({self.dim},), got {v.shape}")
        return v

    def spectrum(self, v) -> np.ndarray:
        """Forward real transform of `v`, for reuse across many products."""
        return np.fft.rfft(self._check(v))

    def ccorr(self, a, b) -> np.ndarray:
        s = np.multiply(np.conj(np.fft.rfft(self._check(a))), np.fft.rfft(self._check(b)), out=self._scratch)
        return np.fft.irfft(s, n=self.dim)

    def cconv(self, a, b) -> np.ndarray:
        s = np.multiply(np.fft.rfft(self._check(a)), np.fft.rfft(self._check(b)), out=self._scratch)
        return np.fft.irfft(s, n=self.dim)

    def ccorr_with_spectrum(self, spec_a: np.ndarray, b) -> np.ndarray:
        """Correlate using a precomputed spectrum for the left operand."""
        s = np.multiply(np.conj(spec_a), np.fft.rfft(self._check(b)), out=self._scratch)
        return np.fft.irfft(s, n=self.dim)

    def cconv_with_spectrum(self, spec_a: np.ndarray, b) -> np.ndarray:
        """Convolve using a precomputed spectrum for the left operand."""
        s = np.multiply(spec_a, np.fft.rfft(self._check(b)), out=self._scratch)
        return np.fft.irfft(s, n=self.dim)
