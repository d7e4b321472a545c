"""Harvested-voltage trace synthesis.

Randomness comes only from ``ScenarioSpec.seed`` through numpy's PCG64
bit generator (``standard_normal`` for noise), which is stable across
platforms for a given numpy release. Per-trace seeds in a dataset are
derived with :func:`derive_seed`.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import physics, trajectories
from .errors import DomainError
from .physics import BodySnapshot, ChannelGeometry, HarvesterModel, PathLossEnv
from .traces import VoltageTrace, write_trace_csv
from .trajectories import TASK_LABELS

TASKS = tuple(TASK_LABELS)


def derive_seed(*parts) -> int:
    """64-bit seed from a tuple of ints/strings (blake2b, platform independent)."""
    text = ":".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def digest(obj, length=12) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default).encode()
    return hashlib.sha256(blob).hexdigest()[:length]


def _json_default(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


@dataclass(frozen=True)
class NoiseSpec:
    gaussian_sigma: float = 0.0
    drift_amplitude: float = 0.0
    drift_period_s: float = 30.0
    # when set, the Gaussian sigma is sqrt(var(clean) / 10**(snr_db / 10)) per trace
    snr_db: float | None = None

    def __post_init__(self):
        for name in ("gaussian_sigma", "drift_amplitude", "drift_period_s"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {value!r}")
        if self.snr_db is not None and not math.isfinite(self.snr_db):
            raise DomainError(f"snr_db must be finite, got {self.snr_db!r}")

    def sigma_for(self, clean: np.ndarray) -> float:
        if self.snr_db is None:
            return self.gaussian_sigma
        return math.sqrt(float(np.var(clean)) / 10.0 ** (self.snr_db / 10.0))


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    task: str
    label: str
    duration_s: float | None = None
    geometry: ChannelGeometry = field(default_factory=ChannelGeometry)
    env: PathLossEnv = field(default_factory=PathLossEnv)
    harvester: HarvesterModel = field(default_factory=HarvesterModel)
    motion_params: dict | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    sample_rate_hz: float = 200.0
    path_loss_mode: str = "excess"

    def __post_init__(self):
        if self.task not in TASK_LABELS:
            raise DomainError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.label not in TASK_LABELS[self.task]:
            raise DomainError(f"label {self.label!r} is not valid for task {self.task!r}")
        motion = trajectories.default_motion(self.task, self.label)
        motion.update(self.motion_params or {})
        object.__setattr__(self, "motion_params", motion)
        if self.duration_s is None:
            object.__setattr__(self, "duration_s", trajectories.nominal_duration(self.task, motion))
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise DomainError(f"duration_s must be > 0, got {self.duration_s!r}")
        if not (0 <= self.seed < 2**64):
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.path_loss_mode not in physics.PATH_LOSS_MODES:
            raise DomainError(f"path_loss_mode must be one of {physics.PATH_LOSS_MODES}")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))


def trajectory(spec: ScenarioSpec, t) -> BodySnapshot:
    """Body clearances at time(s) ``t`` (seconds from trace start)."""
    arr = np.asarray(t, dtype=np.float64)
    if np.isnan(arr).any() or (arr < 0).any() or (arr > spec.duration_s).any():
        raise DomainError(f"t must lie in [0, {spec.duration_s}]")
    front, back = trajectories.edges(spec.task, spec.label, spec.motion_params, arr)
    if arr.ndim == 0:
        return BodySnapshot(float(front), float(back))
    return BodySnapshot(front, back)


def clean_voltage(spec: ScenarioSpec) -> np.ndarray:
    """Noise-free harvested voltage at each sample instant."""
    t = np.arange(spec.n_samples) / spec.sample_rate_hz
    snap = trajectory(spec, t)
    power = physics.harvested_power(spec.geometry, spec.env, snap, path_loss_mode=spec.path_loss_mode)
    return physics.power_to_voltage(spec.harvester, power)


def render_trace(spec: ScenarioSpec) -> VoltageTrace:
    volts = clean_voltage(spec)
    n = volts.shape[0]
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    drift_phase = rng.uniform(0.0, 2.0 * math.pi)
    noise = rng.standard_normal(n) * spec.noise.sigma_for(volts)
    if spec.noise.drift_amplitude > 0:
        t = np.arange(n) / spec.sample_rate_hz
        period = spec.noise.drift_period_s or math.inf
        noise = noise + spec.noise.drift_amplitude * np.sin(2.0 * math.pi * t / period + drift_phase)
    meta = {
        "task": spec.task,
        "label": spec.label,
        "seed": spec.seed,
        "geometry_digest": digest(spec.geometry),
    }
    return VoltageTrace(volts + noise, spec.sample_rate_hz, meta)


def jitter_spec(spec: ScenarioSpec, seed: int) -> ScenarioSpec:
    """Per-repetition variation of a scenario, fully determined by ``seed``.

    Activities and gestures get amplitude, speed, lead-in and rest-height
    variation; respiration gets a random phase and chest amplitude, and a
    rate drawn from ``motion_params["rate_range_bpm"]`` when present.
    """
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "jitter")))
    motion = dict(spec.motion_params)
    if spec.task == "respiration":
        motion["phase"] = rng.uniform(0.0, 2.0 * math.pi)
        motion["amplitude_m"] = motion["amplitude_m"] * rng.uniform(0.8, 1.2)
        lo_hi = motion.get("rate_range_bpm")
        if lo_hi:
            motion["rate_hz"] = rng.uniform(lo_hi[0], lo_hi[1]) / 60.0
        duration = spec.duration_s
    else:
        motion["amp"] = motion.get("amp", 1.0) * rng.uniform(0.85, 1.15)
        motion["active_s"] = motion["active_s"] * rng.uniform(0.85, 1.15)
        motion["lead_s"] = motion["lead_s"] * rng.uniform(0.8, 1.2)
        offset = rng.uniform(-0.02, 0.02)
        for key in ("rest_front_m", "rest_y_m"):
            if key in motion:
                motion[key] = motion[key] + offset
        duration = trajectories.nominal_duration(spec.task, motion)
    return replace(spec, motion_params=motion, seed=seed, duration_s=duration)


def split_tags(n: int, ratio: float, seed: int) -> list[str]:
    """Exactly ``round(ratio * n)`` rows tagged "train", the rest "test"."""
    if not 0 <= ratio <= 1:
        raise DomainError(f"split ratio must lie in [0, 1], got {ratio!r}")
    perm = np.random.Generator(np.random.PCG64(derive_seed(seed, "split"))).permutation(n)
    n_train = int(round(ratio * n))
    tags = ["test"] * n
    for i in perm[:n_train]:
        tags[i] = "train"
    return tags


def _render_job(job):
    spec, path = job
    write_trace_csv(render_trace(spec), path)
    return spec


def render_dataset(specs, repetitions: int, out_dir, split_ratio: float = 0.8, seed: int = 0,
                   jitter: bool = True, workers: int = 1) -> list[dict]:
    """Render ``repetitions`` traces per spec and write them with a manifest.

    Files go to ``out_dir/traces/<spec index>_<label>/rep_<n>.csv`` and the
    manifest to ``out_dir/manifest.jsonl`` (paths relative to ``out_dir``).
    Rows are in spec-major order; respiration rows carry the true
    ``rate_bpm``. Returns the manifest rows.
    """
    specs = list(specs)
    if not specs:
        raise DomainError("render_dataset needs at least one scenario")
    if repetitions < 1:
        raise DomainError("repetitions must be >= 1")
    out_dir = Path(out_dir)
    jobs = []
    for i, spec in enumerate(specs):
        for rep in range(repetitions):
            trace_seed = derive_seed(spec.seed, i, rep)
            rep_spec = jitter_spec(spec, trace_seed) if jitter else replace(spec, seed=trace_seed)
            rel = Path("traces") / f"{i:02d}_{spec.label}" / f"rep_{rep:04d}.csv"
            jobs.append((rep_spec, rel))

    abs_jobs = [(s, out_dir / rel) for s, rel in jobs]
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                list(pool.map(_render_job, abs_jobs, chunksize=16))
        else:
            for job in abs_jobs:
                _render_job(job)
    except OSError as exc:
        raise OSError(f"failed writing trace {exc.filename}: {exc.strerror}") from exc

    tags = split_tags(len(jobs), split_ratio, seed)
    rows = []
    for (spec, rel), tag in zip(jobs, tags):
        row = {
            "task": spec.task,
            "label": spec.label,
            "path": rel.as_posix(),
            "seed": spec.seed,
            "split": tag,
            "duration_s": spec.n_samples / spec.sample_rate_hz,
            "sample_rate_hz": spec.sample_rate_hz,
        }
        if spec.task == "respiration":
            row["rate_bpm"] = 60.0 * spec.motion_params["rate_hz"]
        rows.append(row)
    manifest = out_dir / "manifest.jsonl"
    manifest.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
    return rows
