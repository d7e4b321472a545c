"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the identical
signature. ``harvsense.kernels`` picks one of the two at import time.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SERIES_XMAX = 1.5
_EPS = 1e-16
_FPMIN = 1e-300
_MAXIT = 500


def _fresnel_series(x):
    # C and S share one power series; terms alternate in a period of 4.
    c = np.zeros_like(x)
    s = np.zeros_like(x)
    term = x.copy()
    f = 0.5 * math.pi * x * x
    active = np.ones(x.shape, dtype=bool)
    for m in range(_MAXIT):
        v = term / (2 * m + 1)
        r = m % 4
        if r == 0:
            c += np.where(active, v, 0.0)
        elif r == 1:
            s += np.where(active, v, 0.0)
        elif r == 2:
            c -= np.where(active, v, 0.0)
        else:
            s -= np.where(active, v, 0.0)
        term = term * f / (m + 1)
        active &= np.abs(term) >= _EPS * np.maximum(np.maximum(np.abs(c), np.abs(s)), _FPMIN)
        if not active.any():
            break
    return c, s


def _fresnel_cf(ax):
    # Modified Lentz evaluation of the complex erfc continued fraction.
    pix2 = math.pi * ax * ax
    b = 1.0 - 1j * pix2
    cc = np.full(ax.shape, 1.0 / _FPMIN, dtype=complex)
    d = 1.0 / b
    h = d.copy()
    n = -1
    active = np.ones(ax.shape, dtype=bool)
    for _ in range(_MAXIT):
        n += 2
        a = -n * (n + 1.0)
        b = b + 4.0
        d = 1.0 / (a * d + b)
        cc = b + a / cc
        delta = cc * d
        h = np.where(active, h * delta, h)
        active &= (np.abs(delta.real - 1.0) + np.abs(delta.imag)) >= _EPS
        if not active.any():
            break
    h = (ax - 1j * ax) * h
    cs = (0.5 + 0.5j) * (1.0 - np.exp(0.5j * pix2) * h)
    return cs.real, cs.imag


def fresnel_cs(x):
    """Fresnel integrals C(x) and S(x) with the pi/2 normalisation.

    Power series below |x| = 1.5, continued fraction above. Infinite
    arguments map to the +-1/2 limits; NaN propagates.
    """
    x = np.asarray(x, dtype=np.float64)
    shape = x.shape
    x = x.ravel()
    ax = np.abs(x)
    c = np.full(x.shape, np.nan)
    s = np.full(x.shape, np.nan)

    small = ax <= SERIES_XMAX
    if small.any():
        c[small], s[small] = _fresnel_series(ax[small])
    large = (ax > SERIES_XMAX) & np.isfinite(ax)
    if large.any():
        c[large], s[large] = _fresnel_cf(ax[large])
    inf = np.isinf(ax)
    c[inf] = 0.5
    s[inf] = 0.5

    neg = x < 0
    c[neg] = -c[neg]
    s[neg] = -s[neg]
    return c.reshape(shape), s.reshape(shape)


def moving_variance(x, w):
    """Sample variance (ddof=1) of every length-``w`` window of ``x``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if w < 2 or x.shape[0] < w:
        raise ValueError(f"need at least {w} samples and w >= 2, got {x.shape[0]} samples, w={w}")
    return sliding_window_view(x, w).var(axis=1, ddof=1)


def im2col1d(x, k):
    """(N, C, L) -> (N, L-k+1, C*k) patch matrix for a valid 1D convolution."""
    n, c, length = x.shape
    cols = sliding_window_view(x, k, axis=2)  # N, C, Lout, k
    return np.ascontiguousarray(cols.transpose(0, 2, 1, 3)).reshape(n, length - k + 1, c * k)


def col2im1d(gcols, c, k):
    """Adjoint of im2col1d: scatter-add (N, Lout, C*k) back to (N, C, Lout+k-1)."""
    n, lout, _ = gcols.shape
    g = gcols.reshape(n, lout, c, k)
    gx = np.zeros((n, c, lout + k - 1))
    for j in range(k):
        gx[:, :, j:j + lout] += g[:, :, :, j].transpose(0, 2, 1)
    return gx


def maxpool1d_forward(x, p):
    """Non-overlapping max-pool over the last axis of (N, C, L).

    Trailing samples that do not fill a pool are dropped. Returns the pooled
    array and the argmax offset (first maximum wins) within each pool.
    """
    n, c, length = x.shape
    lout = length // p
    blocks = x[:, :, :lout * p].reshape(n, c, lout, p)
    idx = blocks.argmax(axis=3)
    out = np.take_along_axis(blocks, idx[..., None], axis=3)[..., 0]
    return np.ascontiguousarray(out), idx.astype(np.intp)


def maxpool1d_backward(gout, idx, p, length):
    n, c, lout = gout.shape
    g = np.zeros((n, c, lout, p))
    np.put_along_axis(g, idx[..., None], gout[..., None], axis=3)
    gx = np.zeros((n, c, length))
    gx[:, :, :lout * p] = g.reshape(n, c, lout * p)
    return gx
