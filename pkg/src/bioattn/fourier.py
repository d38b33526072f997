"""Radix-2 FFT with unitary normalization.

Both directions scale by 1/sqrt(N) per axis, so fft2/ifft2 are exact
inverses and preserve the L2 norm (Parseval). Extents must be powers of two.
"""

from __future__ import annotations

import numpy as np

from bioattn.errors import ShapeError


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _fft_last_axis(x: np.ndarray, sign: float) -> np.ndarray:
    n = x.shape[-1]
    if n == 1:
        return x.copy()
    even = _fft_last_axis(x[..., ::2], sign)
    odd = _fft_last_axis(x[..., 1::2], sign)
    twiddle = np.exp(sign * 2j * np.pi * np.arange(n // 2) / n)
    t = twiddle * odd
    return np.concatenate([even + t, even - t], axis=-1)


def _fft2_impl(x: np.ndarray, sign: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D image, got rank {x.ndim}")
    h, w = x.shape
    if not (_is_pow2(h) and _is_pow2(w)):
        raise ShapeError(f"extents must be powers of two, got {x.shape}")
    out = _fft_last_axis(x, sign)
    out = _fft_last_axis(out.T, sign).T
    return out / np.sqrt(h * w)


def fft2(x) -> np.ndarray:
    """Unitary 2-D DFT of an H x W image (real or complex)."""
    return _fft2_impl(x, -1.0)


def ifft2(x) -> np.ndarray:
    """Unitary inverse of ``fft2``."""
    return _fft2_impl(x, +1.0)
