"""Breath counting by peaks of the moving variance.

The moving variance of the (min-max pre-scaled) filtered trace is masked
where it falls below ``tau``. Peaks of what remains are counted, and the
rate is the count divided by the trace duration.

Peaks are strict local maxima found with :func:`scipy.signal.find_peaks`.
They must have prominence of at least ``peak_min_prominence`` times the
largest variance and be at least ``peak_min_distance`` samples apart. A
flat-topped peak is reported at its left edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from . import kernels
from .dsp import prescale
from .errors import DomainError
from .traces import VoltageTrace

BAND_BPM = (4.0, 60.0)


@dataclass(frozen=True)
class VpConfig:
    window_w: int = 100
    variance_threshold_tau: float = 0.002
    # samples; None means one second at the trace's sample rate
    peak_min_distance: int | None = None
    # fraction of the maximum variance
    peak_min_prominence: float = 0.1
    prescale: bool = True

    def __post_init__(self):
        if self.window_w < 2:
            raise DomainError("window_w must be >= 2")
        if not self.variance_threshold_tau > 0:
            raise DomainError("tau must be > 0")
        if self.peak_min_distance is not None and self.peak_min_distance < 0:
            raise DomainError("peak_min_distance must be >= 0")
        if self.peak_min_prominence < 0:
            raise DomainError("peak_min_prominence must be >= 0")


@dataclass(frozen=True, eq=False)
class RespirationResult:
    rate_hz: float
    rate_bpm: float
    peak_count: int
    duration_s: float
    peak_locations: np.ndarray
    flags: tuple = field(default=())

    def to_json(self) -> dict:
        return {
            "rate_bpm": self.rate_bpm,
            "rate_hz": self.rate_hz,
            "peak_count": self.peak_count,
            "duration_s": self.duration_s,
            "peak_locations": [int(i) for i in self.peak_locations],
            "flags": list(self.flags),
        }


def moving_variance(trace: VoltageTrace, cfg: VpConfig = VpConfig()) -> np.ma.MaskedArray:
    """Sample variance of every ``window_w`` window, masked where below tau.

    Entry ``i`` covers samples ``[i, i + window_w)``; masking keeps indices
    aligned with the trace.
    """
    if len(trace) < cfg.window_w:
        raise DomainError(f"trace has {len(trace)} samples; moving variance needs at least {cfg.window_w}")
    x = prescale(trace.samples) if cfg.prescale else trace.samples
    var = kernels.moving_variance(x, cfg.window_w)
    return np.ma.masked_less(var, cfg.variance_threshold_tau, copy=False)


def find_variance_peaks(var: np.ma.MaskedArray, min_distance: int, min_prominence_frac: float) -> np.ndarray:
    filled = var.filled(0.0)
    if var.count() == 0:
        return np.zeros(0, dtype=np.intp)
    top = float(var.max())
    if top <= 0:
        return np.zeros(0, dtype=np.intp)
    _, props = find_peaks(
        filled,
        prominence=min_prominence_frac * top,
        distance=max(1, min_distance),
        plateau_size=1,
    )
    return np.asarray(props["left_edges"], dtype=np.intp)


def count_respiration(trace: VoltageTrace, cfg: VpConfig = VpConfig()) -> RespirationResult:
    """Respiratory rate of a filtered harvested-voltage trace."""
    var = moving_variance(trace, cfg)
    distance = cfg.peak_min_distance
    if distance is None:
        distance = int(round(trace.sample_rate_hz))
    peaks = find_variance_peaks(var, distance, cfg.peak_min_prominence)
    duration = trace.duration_s
    rate_hz = peaks.size / duration
    rate_bpm = 60.0 * rate_hz
    flags = []
    if var.count() == 0:
        flags.append("no_variance_above_tau")
    if not BAND_BPM[0] <= rate_bpm <= BAND_BPM[1]:
        flags.append("out_of_band")
    return RespirationResult(rate_hz, rate_bpm, int(peaks.size), duration, peaks, tuple(flags))
