"""Voltage-trace pre-processing: smoothing, segmentation, normalisation, resizing.

Variance thresholds in :class:`SegmenterConfig` are unit free: they are
applied to a copy of the trace min-max scaled to [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateSegmentError, DomainError
from .traces import VoltageTrace

SEGMENT_LEN = 128
DEGENERATE_PTP_V = 1e-6
DC_FALLBACK_PERCENTILE = 10.0


@dataclass(frozen=True)
class SgConfig:
    window_len: int = 31
    poly_order: int = 3

    def __post_init__(self):
        if self.window_len % 2 != 1 or self.window_len < 1:
            raise DomainError(f"window_len must be a positive odd integer, got {self.window_len}")
        if not 0 <= self.poly_order < self.window_len:
            raise DomainError("poly_order must satisfy 0 <= poly_order < window_len")


@dataclass(frozen=True)
class SegmenterConfig:
    window_s: float = 0.5
    overlap: float = 0.5
    variance_threshold: float = 0.1
    dc_variance_threshold: float = 0.01

    def __post_init__(self):
        if not self.window_s > 0:
            raise DomainError("window_s must be > 0")
        if not 0 <= self.overlap < 1:
            raise DomainError("overlap must lie in [0, 1)")
        if not (self.variance_threshold > 0 and self.dc_variance_threshold > 0):
            raise DomainError("variance thresholds must be > 0")

    def window_samples(self, rate_hz: float) -> int:
        return max(2, int(round(self.window_s * rate_hz)))

    def stride_samples(self, rate_hz: float) -> int:
        return max(1, int(round(self.window_samples(rate_hz) * (1.0 - self.overlap))))


@dataclass(frozen=True, eq=False)
class Segment:
    vector: np.ndarray
    label: str | None = None
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.shape != (SEGMENT_LEN,):
            raise DomainError(f"segment must have {SEGMENT_LEN} values, got shape {vec.shape}")
        if vec.min() < 0 or vec.max() > 1:
            raise DomainError("segment values must lie in [0, 1]")
        object.__setattr__(self, "vector", vec)


def sg_coeffs(window_len: int, poly_order: int) -> np.ndarray:
    """Smoothing weights: least-squares polynomial fit evaluated at the window centre.

    Row 0 of the pseudo-inverse of the Vandermonde matrix on offsets
    ``-m..m``; symmetric, so it serves for both correlation and convolution.
    """
    SgConfig(window_len, poly_order)
    half = window_len // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    vander = offsets[:, None] ** np.arange(poly_order + 1)[None, :]
    q, r = np.linalg.qr(vander)
    # first row of (V^T V)^-1 V^T = e0^T R^-1 Q^T
    e0 = np.zeros(poly_order + 1)
    e0[0] = 1.0
    return q @ np.linalg.solve(r.T, e0)


def sg_filter(trace: VoltageTrace, cfg: SgConfig = SgConfig()) -> VoltageTrace:
    """Savitzky-Golay smoothing with mirror padding (``numpy.pad`` mode ``reflect``)."""
    x = trace.samples
    if x.shape[0] < cfg.window_len:
        raise DomainError(f"trace has {x.shape[0]} samples; S-G filter needs at least {cfg.window_len}")
    half = cfg.window_len // 2
    w = sg_coeffs(cfg.window_len, cfg.poly_order)
    padded = np.pad(x, half, mode="reflect")
    y = sliding_window_view(padded, cfg.window_len) @ w
    return trace.with_samples(y)


def prescale(x: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant signal maps to zeros."""
    x = np.asarray(x, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if hi - lo <= 0:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def window_variances(x: np.ndarray, n_w: int, stride: int):
    """(window start indices, population variance of each window)."""
    if x.shape[0] < n_w:
        return np.zeros(0, dtype=np.intp), np.zeros(0)
    views = sliding_window_view(x, n_w)[::stride]
    starts = np.arange(views.shape[0], dtype=np.intp) * stride
    return starts, views.var(axis=1)


def segment(trace: VoltageTrace, cfg: SegmenterConfig = SegmenterConfig()) -> list[tuple[int, int]]:
    """Active spans ``[start, end)`` in samples.

    A window is active when its variance on the pre-scaled trace reaches
    ``variance_threshold``. Runs of active windows become spans, and spans
    separated by less than one window length are merged.
    """
    rate = trace.sample_rate_hz
    n_w = cfg.window_samples(rate)
    stride = cfg.stride_samples(rate)
    starts, var = window_variances(prescale(trace.samples), n_w, stride)
    active = var >= cfg.variance_threshold

    spans = []
    run_start = None
    for i, flag in enumerate(active):
        if flag and run_start is None:
            run_start = i
        if run_start is not None and (not flag or i == len(active) - 1):
            last = i if flag else i - 1
            spans.append((int(starts[run_start]), int(starts[last] + n_w)))
            run_start = None

    merged = []
    for span in spans:
        if merged and span[0] - merged[-1][1] < n_w:
            merged[-1] = (merged[-1][0], span[1])
        else:
            merged.append(span)
    return merged


def dc_offset(trace: VoltageTrace, cfg: SegmenterConfig = SegmenterConfig()) -> float:
    """Mean voltage over quiet windows (variance below ``dc_variance_threshold``).

    Falls back to the 10th percentile of the trace when no window is quiet.
    """
    rate = trace.sample_rate_hz
    n_w = cfg.window_samples(rate)
    stride = cfg.stride_samples(rate)
    starts, var = window_variances(prescale(trace.samples), n_w, stride)
    quiet = starts[var < cfg.dc_variance_threshold]
    if quiet.size == 0:
        return float(np.percentile(trace.samples, DC_FALLBACK_PERCENTILE))
    mask = np.zeros(len(trace), dtype=bool)
    for s in quiet:
        mask[s:s + n_w] = True
    return float(trace.samples[mask].mean())


def normalize(trace: VoltageTrace, span: tuple[int, int], cfg: SegmenterConfig = SegmenterConfig(),
              offset: float | None = None) -> np.ndarray:
    """Remove the DC offset, then min-max scale ``trace[span]`` to [0, 1]."""
    start, end = span
    if not 0 <= start < end <= len(trace):
        raise DomainError(f"span {span} outside trace of {len(trace)} samples")
    if offset is None:
        offset = dc_offset(trace, cfg)
    values = trace.samples[start:end] - offset
    lo, hi = values.min(), values.max()
    if hi - lo < DEGENERATE_PTP_V:
        raise DegenerateSegmentError(f"span {span} peak-to-peak {hi - lo:.3g} V is below {DEGENERATE_PTP_V} V")
    return np.clip((values - lo) / (hi - lo), 0.0, 1.0)


def resample_128(values) -> np.ndarray:
    """Linear interpolation onto 128 evenly spaced points, endpoints included."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] < 2:
        raise DomainError("resampling needs a 1D array of at least 2 values")
    n = values.shape[0]
    if n == SEGMENT_LEN:
        return values.copy()
    grid = np.linspace(0.0, n - 1.0, SEGMENT_LEN)
    out = np.interp(grid, np.arange(n, dtype=np.float64), values)
    out[0], out[-1] = values[0], values[-1]
    return out


def extract_segments(trace: VoltageTrace, sg: SgConfig = SgConfig(), seg: SegmenterConfig = SegmenterConfig(),
                     label: str | None = None, merge: str = "none") -> list[Segment]:
    """Filter, segment, normalise and resize one trace.

    ``merge="hull"`` returns at most one segment covering every active span,
    for traces known to hold a single activity instance. Degenerate spans are
    skipped.
    """
    if merge not in ("none", "hull"):
        raise DomainError(f"merge must be 'none' or 'hull', got {merge!r}")
    filtered = sg_filter(trace, sg)
    spans = segment(filtered, seg)
    if merge == "hull" and spans:
        spans = [(spans[0][0], spans[-1][1])]
    offset = dc_offset(filtered, seg) if spans else math.nan
    out = []
    for span in spans:
        try:
            values = normalize(filtered, span, seg, offset=offset)
        except DegenerateSegmentError:
            continue
        src = dict(trace.meta)
        src.update(start=span[0], end=span[1])
        out.append(Segment(resample_128(values), label, src))
    return out
