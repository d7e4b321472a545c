"""Independent reference implementations used only by the tests."""

import math

import numpy as np
from scipy.integrate import quad


def fresnel_cs_quad(x):
    """C(x), S(x) by adaptive quadrature of cos/sin(pi z^2 / 2) on [0, x]."""
    c, _ = quad(lambda z: math.cos(math.pi * z * z / 2), 0.0, x, limit=400, epsabs=1e-12, epsrel=1e-12)
    s, _ = quad(lambda z: math.sin(math.pi * z * z / 2), 0.0, x, limit=400, epsabs=1e-12, epsrel=1e-12)
    return c, s


def front_amplitude_quad(v):
    c, s = fresnel_cs_quad(v)
    return (1 + 1j) / 2 * ((0.5 - c) - 1j * (0.5 - s))


def back_amplitude_quad(v):
    c, s = fresnel_cs_quad(v)
    return (1 + 1j) / 2 * ((c + 0.5) - 1j * (s + 0.5))


def path_loss_direct(pl_d0, d0, n, faf, p, q, af_p, af_w, d):
    return pl_d0 + 10 * n * math.log10(d / d0) + faf + p * af_p + q * af_w


def burst_trace(rng, fs=200.0, n_bursts=None, freqs=(2.0, 4.0, 6.0, 8.0)):
    """Quiet baseline with sinusoidal bursts; returns (samples, [(start, end), ...]).

    Burst frequencies make f * 0.5 s an integer, so a full 0.5 s window
    inside a burst always sees whole cycles. All bursts of one trace share
    an amplitude: thresholds apply after min-max scaling of the whole trace,
    so a much weaker burst would sit below them by design.
    """
    n_bursts = int(rng.integers(1, 4)) if n_bursts is None else n_bursts
    gap_s = lambda: rng.uniform(2.0, 4.0)  # noqa: E731
    t_cursor = gap_s()
    bursts = []
    for _ in range(n_bursts):
        length = rng.uniform(2.0, 5.0)
        bursts.append((int(round(t_cursor * fs)), int(round((t_cursor + length) * fs))))
        t_cursor += length + gap_s()
    n = int(round(t_cursor * fs))
    x = np.full(n, 1.2) + rng.normal(0, 1e-4, n)
    amp = rng.uniform(0.3, 0.6)
    for start, end in bursts:
        freq = float(rng.choice(freqs))
        k = np.arange(end - start)
        x[start:end] += amp * np.sin(2 * np.pi * freq * k / fs)
    return x, bursts


def iou(a, b):
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = max(a[1], b[1]) - min(a[0], b[0])
    return inter / union
