"""NumPy fallback kernels for 2-D convolution.

Shift-and-add formulation: one tensordot per kernel tap, so the inner work
runs through BLAS instead of Python loops. Results match the Cython kernels
up to floating-point summation order.
"""

import numpy as np

BACKEND = "python"


def conv2d_forward(x, w, bias, stride, padding):
    n, c, h, wd = x.shape
    f, cw, kh, kw = w.shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1
    xp = x
    if padding:
        xp = np.zeros((n, c, h + 2 * padding, wd + 2 * padding), dtype=np.float64)
        xp[:, :, padding:padding + h, padding:padding + wd] = x
    out = np.zeros((n, f, ho, wo), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i:i + ho * stride:stride, j:j + wo * stride:stride]
            # (n,c,ho,wo) x (f,c) -> (n,ho,wo,f)
            out += np.tensordot(patch, w[:, :, i, j], axes=([1], [1])).transpose(0, 3, 1, 2)
    if bias is not None:
        out += bias[None, :, None, None]
    return out


def conv2d_backward(x, w, grad_out, stride, padding):
    n, c, h, wd = x.shape
    f, cw, kh, kw = w.shape
    ho, wo = grad_out.shape[2], grad_out.shape[3]
    hp, wp = h + 2 * padding, wd + 2 * padding
    xp = x
    if padding:
        xp = np.zeros((n, c, hp, wp), dtype=np.float64)
        xp[:, :, padding:padding + h, padding:padding + wd] = x
    grad_xp = np.zeros((n, c, hp, wp), dtype=np.float64)
    grad_w = np.zeros_like(w)
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i:i + ho * stride:stride, j:j + wo * stride:stride]
            # (f,n,ho,wo) . (n,c,ho,wo) summed over n,ho,wo
            grad_w[:, :, i, j] = np.tensordot(grad_out, patch, axes=([0, 2, 3], [0, 2, 3]))
            # (n,f,ho,wo) x (f,c) -> (n,ho,wo,c)
            g = np.tensordot(grad_out, w[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
            grad_xp[:, :, i:i + ho * stride:stride, j:j + wo * stride:stride] += g
    grad_b = grad_out.sum(axis=(0, 2, 3))
    if padding:
        grad_x = grad_xp[:, :, padding:padding + h, padding:padding + wd]
    else:
        grad_x = grad_xp
    return np.ascontiguousarray(grad_x), grad_w, grad_b
