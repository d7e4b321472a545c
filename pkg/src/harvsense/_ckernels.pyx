# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, sin, cos, isinf, isnan, M_PI

cnp.import_array()

cdef double SERIES_XMAX = 1.5
cdef double EPS = 1e-16
cdef double FPMIN = 1e-300
cdef int MAXIT = 500


cdef void _fresnel_one(double x, double* c_out, double* s_out) noexcept nogil:
    cdef double ax = fabs(x)
    cdef double c = 0.0, s = 0.0, term, f, v, pix2
    cdef int m, r, n
    cdef double complex b, cc, d, h, delta, cs
    cdef double a
    if isnan(x):
        c_out[0] = x
        s_out[0] = x
        return
    if isinf(ax):
        c = 0.5
        s = 0.5
    elif ax <= SERIES_XMAX:
        term = ax
        f = 0.5 * M_PI * ax * ax
        for m in range(MAXIT):
            v = term / (2 * m + 1)
            r = m % 4
            if r == 0:
                c += v
            elif r == 1:
                s += v
            elif r == 2:
                c -= v
            else:
                s -= v
            term = term * f / (m + 1)
            if fabs(term) < EPS * max(max(fabs(c), fabs(s)), FPMIN):
                break
    else:
        pix2 = M_PI * ax * ax
        b = 1.0 - 1j * pix2
        cc = 1.0 / FPMIN
        d = 1.0 / b
        h = d
        n = -1
        for m in range(MAXIT):
            n += 2
            a = -n * (n + 1.0)
            b = b + 4.0
            d = 1.0 / (a * d + b)
            cc = b + a / cc
            delta = cc * d
            h = h * delta
            if fabs(delta.real - 1.0) + fabs(delta.imag) < EPS:
                break
        h = (ax - 1j * ax) * h
        cs = (0.5 + 0.5j) * (1.0 - (cos(0.5 * pix2) + 1j * sin(0.5 * pix2)) * h)
        c = cs.real
        s = cs.imag
    if x < 0:
        c = -c
        s = -s
    c_out[0] = c
    s_out[0] = s


def fresnel_cs(x):
    xa = np.asarray(x, dtype=np.float64)
    shape = xa.shape
    cdef double[::1] xv = np.ascontiguousarray(xa.ravel())
    cdef Py_ssize_t n = xv.shape[0], i
    c_arr = np.empty(n)
    s_arr = np.empty(n)
    cdef double[::1] cv = c_arr, sv = s_arr
    with nogil:
        for i in range(n):
            _fresnel_one(xv[i], &cv[i], &sv[i])
    return c_arr.reshape(shape), s_arr.reshape(shape)


def moving_variance(x, Py_ssize_t w):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i, j
    if w < 2 or n < w:
        raise ValueError(f"need at least {w} samples and w >= 2, got {n} samples, w={w}")
    out = np.empty(n - w + 1)
    cdef double[::1] ov = out
    cdef double mean, acc, dlt
    with nogil:
        for i in range(n - w + 1):
            mean = 0.0
            for j in range(i, i + w):
                mean += xv[j]
            mean /= w
            acc = 0.0
            for j in range(i, i + w):
                dlt = xv[j] - mean
                acc += dlt * dlt
            ov[i] = acc / (w - 1)
    return out


def im2col1d(x, Py_ssize_t k):
    cdef double[:, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], c = xv.shape[1], length = xv.shape[2]
    cdef Py_ssize_t lout = length - k + 1, a, t, ch, j
    out = np.empty((n, lout, c * k))
    cdef double[:, :, ::1] ov = out
    with nogil:
        for a in range(n):
            for t in range(lout):
                for ch in range(c):
                    for j in range(k):
                        ov[a, t, ch * k + j] = xv[a, ch, t + j]
    return out


def col2im1d(gcols, Py_ssize_t c, Py_ssize_t k):
    cdef double[:, :, ::1] gv = np.ascontiguousarray(gcols, dtype=np.float64)
    cdef Py_ssize_t n = gv.shape[0], lout = gv.shape[1], a, t, ch, j
    gx = np.zeros((n, c, lout + k - 1))
    cdef double[:, :, ::1] ov = gx
    with nogil:
        for a in range(n):
            for t in range(lout):
                for ch in range(c):
                    for j in range(k):
                        ov[a, ch, t + j] += gv[a, t, ch * k + j]
    return gx


def maxpool1d_forward(x, Py_ssize_t p):
    cdef double[:, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], c = xv.shape[1], length = xv.shape[2]
    cdef Py_ssize_t lout = length // p, a, ch, t, j, best
    cdef double bv
    out = np.empty((n, c, lout))
    idx = np.empty((n, c, lout), dtype=np.intp)
    cdef double[:, :, ::1] ov = out
    cdef Py_ssize_t[:, :, ::1] iv = idx
    with nogil:
        for a in range(n):
            for ch in range(c):
                for t in range(lout):
                    best = 0
                    bv = xv[a, ch, t * p]
                    for j in range(1, p):
                        if xv[a, ch, t * p + j] > bv:
                            bv = xv[a, ch, t * p + j]
                            best = j
                    ov[a, ch, t] = bv
                    iv[a, ch, t] = best
    return out, idx


def maxpool1d_backward(gout, idx, Py_ssize_t p, Py_ssize_t length):
    cdef double[:, :, ::1] gv = np.ascontiguousarray(gout, dtype=np.float64)
    cdef Py_ssize_t[:, :, ::1] iv = np.ascontiguousarray(idx, dtype=np.intp)
    cdef Py_ssize_t n = gv.shape[0], c = gv.shape[1], lout = gv.shape[2], a, ch, t
    gx = np.zeros((n, c, length))
    cdef double[:, :, ::1] ov = gx
    with nogil:
        for a in range(n):
            for ch in range(c):
                for t in range(lout):
                    ov[a, ch, t * p + iv[a, ch, t]] = gv[a, ch, t]
    return gx
