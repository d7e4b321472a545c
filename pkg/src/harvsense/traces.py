"""Harvested-voltage traces and their CSV file format.

A trace file has the header ``time_s,voltage_v`` and one row per sample.
Both columns are written with 9 significant digits (``%.9g``), and times
are ``k / sample_rate_hz``. Reading a file written this way and writing it
again reproduces it byte for byte.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, TraceParseError

HEADER = ("time_s", "voltage_v")
NUMBER_FORMAT = "%.9g"
MAX_JITTER = 0.01


@dataclass(frozen=True, eq=False)
class VoltageTrace:
    samples: np.ndarray
    sample_rate_hz: float = 200.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise DomainError("trace samples must be a non-empty 1D array")
        if not np.isfinite(samples).all():
            raise DomainError("trace samples must be finite")
        if not (math.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise DomainError(f"sample rate must be > 0, got {self.sample_rate_hz!r}")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.sample_rate_hz

    def with_samples(self, samples) -> "VoltageTrace":
        return VoltageTrace(samples, self.sample_rate_hz, dict(self.meta))


def write_trace_csv(trace: VoltageTrace, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(HEADER)]
    fmt = NUMBER_FORMAT + "," + NUMBER_FORMAT
    lines.extend(fmt % (t, v) for t, v in zip(trace.times, trace.samples))
    path.write_text("\n".join(lines) + "\n")
    return path


def ingest_trace(path) -> VoltageTrace:
    """Read a ``time_s,voltage_v`` CSV and validate uniform sampling.

    The sample rate is inferred from the timestamps. Raises
    :class:`TraceParseError` naming the offending row (1 = header).
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise TraceParseError(path, 0, f"cannot open trace: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise TraceParseError(path, 1, f"expected header {','.join(HEADER)!r}, got {header!r}")
        times, volts = [], []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise TraceParseError(path, row_no, f"expected 2 columns, got {len(row)}")
            try:
                t, v = float(row[0]), float(row[1])
            except ValueError:
                raise TraceParseError(path, row_no, f"non-numeric cell in {row!r}") from None
            if not (math.isfinite(t) and math.isfinite(v)):
                raise TraceParseError(path, row_no, "non-finite value")
            if times and t <= times[-1]:
                raise TraceParseError(path, row_no, f"time {t} does not increase")
            times.append(t)
            volts.append(v)
    if len(times) < 2:
        raise TraceParseError(path, len(times) + 1, "need at least two samples to infer a rate")

    t = np.asarray(times)
    dt = np.diff(t)
    nominal = (t[-1] - t[0]) / (len(t) - 1)
    jitter = np.abs(dt - nominal) / nominal
    worst = int(np.argmax(jitter))
    if jitter[worst] > MAX_JITTER:
        raise TraceParseError(path, worst + 3, f"sampling jitter {jitter[worst]:.3%} exceeds 1%")
    rate = 1.0 / nominal
    if abs(rate - round(rate)) < 1e-6 * rate:
        rate = float(round(rate))
    return VoltageTrace(np.asarray(volts), rate, {"source": str(path), "t0_s": float(t[0])})
