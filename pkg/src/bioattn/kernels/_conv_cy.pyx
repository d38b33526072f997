# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled 2-D convolution kernels.

Hot loops of the reconstruction harness. The inner loops run over the
contiguous width axis so the compiler can vectorize the multiply-adds.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def conv2d_forward(cnp.ndarray[cnp.float64_t, ndim=4] x,
                   cnp.ndarray[cnp.float64_t, ndim=4] w,
                   bias, int stride, int padding):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t f = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (h + 2 * padding - kh) // stride + 1
    cdef Py_ssize_t wo = (wd + 2 * padding - kw) // stride + 1
    cdef Py_ssize_t hp = h + 2 * padding, wp = wd + 2 * padding

    cdef cnp.ndarray[cnp.float64_t, ndim=4] xp
    if padding:
        xp = np.zeros((n, c, hp, wp), dtype=np.float64)
        xp[:, :, padding:padding + h, padding:padding + wd] = x
    else:
        xp = np.ascontiguousarray(x)

    cdef cnp.ndarray[cnp.float64_t, ndim=4] out = np.zeros((n, f, ho, wo), dtype=np.float64)
    cdef const double[:, :, :, ::1] xv = xp
    cdef const double[:, :, :, ::1] wv = np.ascontiguousarray(w)
    cdef double[:, :, :, ::1] ov = out
    cdef Py_ssize_t ni, fi, ci, i, j, r, q
    cdef double coef

    for ni in range(n):
        for fi in range(f):
            for ci in range(c):
                for i in range(kh):
                    for j in range(kw):
                        coef = wv[fi, ci, i, j]
                        for r in range(ho):
                            if stride == 1:
                                for q in range(wo):
                                    ov[ni, fi, r, q] += coef * xv[ni, ci, r + i, q + j]
                            else:
                                for q in range(wo):
                                    ov[ni, fi, r, q] += coef * xv[ni, ci, r * stride + i, q * stride + j]

    if bias is not None:
        out += np.asarray(bias)[None, :, None, None]
    return out


def conv2d_backward(cnp.ndarray[cnp.float64_t, ndim=4] x,
                    cnp.ndarray[cnp.float64_t, ndim=4] w,
                    cnp.ndarray[cnp.float64_t, ndim=4] grad_out,
                    int stride, int padding):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t f = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = grad_out.shape[2], wo = grad_out.shape[3]
    cdef Py_ssize_t hp = h + 2 * padding, wp = wd + 2 * padding

    cdef cnp.ndarray[cnp.float64_t, ndim=4] xp
    if padding:
        xp = np.zeros((n, c, hp, wp), dtype=np.float64)
        xp[:, :, padding:padding + h, padding:padding + wd] = x
    else:
        xp = np.ascontiguousarray(x)

    cdef cnp.ndarray[cnp.float64_t, ndim=4] grad_xp = np.zeros((n, c, hp, wp), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=4] grad_w = np.zeros((f, c, kh, kw), dtype=np.float64)
    cdef const double[:, :, :, ::1] xv = xp
    cdef const double[:, :, :, ::1] wv = np.ascontiguousarray(w)
    cdef const double[:, :, :, ::1] gv = np.ascontiguousarray(grad_out)
    cdef double[:, :, :, ::1] gxv = grad_xp
    cdef double[:, :, :, ::1] gwv = grad_w
    cdef Py_ssize_t ni, fi, ci, i, j, r, q
    cdef double coef, acc

    for ni in range(n):
        for fi in range(f):
            for ci in range(c):
                for i in range(kh):
                    for j in range(kw):
                        coef = wv[fi, ci, i, j]
                        acc = 0.0
                        for r in range(ho):
                            if stride == 1:
                                for q in range(wo):
                                    gxv[ni, ci, r + i, q + j] += coef * gv[ni, fi, r, q]
                                for q in range(wo):
                                    acc += gv[ni, fi, r, q] * xv[ni, ci, r + i, q + j]
                            else:
                                for q in range(wo):
                                    gxv[ni, ci, r * stride + i, q * stride + j] += coef * gv[ni, fi, r, q]
                                    acc += gv[ni, fi, r, q] * xv[ni, ci, r * stride + i, q * stride + j]
                        gwv[fi, ci, i, j] += acc

    grad_b = np.asarray(grad_out).sum(axis=(0, 2, 3))
    if padding:
        grad_x = np.ascontiguousarray(grad_xp[:, :, padding:padding + h, padding:padding + wd])
    else:
        grad_x = grad_xp
    return grad_x, grad_w, grad_b
