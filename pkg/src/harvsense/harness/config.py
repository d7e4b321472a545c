"""Experiment configuration: YAML file + ``--set`` overrides over dataclass defaults.

Precedence is flag > file > default. Every key is validated against the
schema below: unknown keys, wrong types and out-of-range values raise
:class:`~harvsense.errors.ConfigError` naming the dotted key.

The config digest hashes the resolved config minus fields that cannot
change numeric results (``output_dir``, ``dataset.workers``).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import types
import typing
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from ..classifier import CnnSpec
from ..dsp import SegmenterConfig, SgConfig
from ..errors import ConfigError, HarvsenseError
from ..physics import ChannelGeometry, HarvesterModel, PathLossEnv
from ..respiration import VpConfig
from ..simulate import NoiseSpec
from ..trajectories import TASK_LABELS

CONFIG_ENV = "HARVSENSE_CONFIG"
NON_NUMERIC_KEYS = ("output_dir", "dataset.workers")


@dataclass(frozen=True)
class ScenarioConfig:
    geometry: ChannelGeometry = field(default_factory=ChannelGeometry)
    env: PathLossEnv = field(default_factory=PathLossEnv)
    harvester: HarvesterModel = field(default_factory=HarvesterModel)
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(snr_db=15.0))
    path_loss_mode: str = "excess"
    sample_rate_hz: float = 200.0
    # motion-parameter overrides applied to every label
    motion: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DatasetConfig:
    repetitions: int = 500
    split_ratio: float = 0.8
    # share of the train split held out for best-epoch selection
    val_fraction: float = 0.1
    jitter: bool = True
    rate_range_bpm: tuple = (8.0, 30.0)
    # subset of the task's labels; None means all
    labels: tuple | None = None
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("dataset.repetitions must be >= 1")
        if not 0 < self.split_ratio <= 1:
            raise ConfigError("dataset.split_ratio must lie in (0, 1]")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("dataset.val_fraction must lie in (0, 1)")
        if len(self.rate_range_bpm) != 2 or not 0 < self.rate_range_bpm[0] <= self.rate_range_bpm[1]:
            raise ConfigError("dataset.rate_range_bpm must be [low, high] with 0 < low <= high")
        if self.workers < 1:
            raise ConfigError("dataset.workers must be >= 1")


@dataclass(frozen=True)
class DspConfig:
    sg: SgConfig = field(default_factory=SgConfig)
    segmenter: SegmenterConfig = field(default_factory=lambda: SegmenterConfig(variance_threshold=0.003))
    merge: str = "hull"

    def __post_init__(self):
        if self.merge not in ("none", "hull"):
            raise ConfigError("dsp.merge must be 'none' or 'hull'")


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "activity"
    seed: int = 0
    output_dir: str = "runs/default"
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    dsp: DspConfig = field(default_factory=DspConfig)
    vp: VpConfig = field(default_factory=VpConfig)
    cnn: CnnSpec = field(default_factory=CnnSpec)

    def __post_init__(self):
        if self.task not in TASK_LABELS:
            raise ConfigError(f"task must be one of {sorted(TASK_LABELS)}, got {self.task!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        bad = [lab for lab in (self.dataset.labels or ()) if lab not in TASK_LABELS[self.task]]
        if bad:
            raise ConfigError(f"dataset.labels {bad} not valid for task {self.task!r}; "
                              f"choose from {list(TASK_LABELS[self.task])}")

    @property
    def labels(self) -> tuple:
        return tuple(self.dataset.labels) if self.dataset.labels else TASK_LABELS[self.task]

    @property
    def cnn_spec(self) -> CnnSpec:
        """CNN spec with ``num_classes`` and ``seed`` bound to this experiment."""
        return replace(self.cnn, num_classes=len(self.labels), seed=self.seed)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def digest(self) -> str:
        d = self.to_dict()
        for key in NON_NUMERIC_KEYS:
            node = d
            *head, last = key.split(".")
            for part in head:
                node = node[part]
            node.pop(last, None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _coerce(tp, value, key):
    """Validate ``value`` against annotation ``tp``; return the typed value."""
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return None
        errors = []
        for arg in args:
            if arg is type(None):
                continue
            try:
                return _coerce(arg, value, key)
            except ConfigError as exc:
                errors.append(str(exc))
        raise ConfigError(errors[0] if errors else f"{key}: invalid value {value!r}")
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected a mapping, got {type(value).__name__}")
        return build(tp, value, key)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    if tp is tuple or origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        return tuple(value)
    if tp is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected a mapping, got {value!r}")
        return dict(value)
    raise ConfigError(f"{key}: unsupported schema type {tp!r}")


def build(cls, data: dict, prefix: str = ""):
    """Instantiate dataclass ``cls`` from a (partial) mapping, strictly."""
    hints = typing.get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls)]
    unknown = sorted(set(data) - set(names))
    if unknown:
        where = prefix or "top level"
        raise ConfigError(f"unknown key(s) {unknown} at {where}; valid keys: {names}")
    kwargs = {}
    for name in names:
        if name in data:
            key = f"{prefix}.{name}" if prefix else name
            kwargs[name] = _coerce(hints[name], data[name], key)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (HarvsenseError, ValueError, TypeError) as exc:
        raise ConfigError(f"{prefix or 'config'}: {exc}") from exc


def parse_override(text: str) -> tuple[list[str], object]:
    """``a.b.c=value`` -> (["a", "b", "c"], YAML-parsed value)."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {text!r} must look like key.path=value")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {text!r}: cannot parse value ({exc})") from exc
    return key.strip().split("."), value


def apply_overrides(data: dict, overrides) -> dict:
    data = json.loads(json.dumps(data))
    for item in overrides or ():
        path, value = parse_override(item) if isinstance(item, str) else item
        node = data
        for part in path[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"override {'.'.join(path)}: {part!r} is not a mapping")
            node = child
        node[path[-1]] = value
    return data


def read_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping at top level")
    return data


def load_config(path=None, overrides=(), use_env: bool = True) -> ExperimentConfig:
    """Resolve a config from defaults, an optional file and overrides.

    With ``path`` None the file named by ``$HARVSENSE_CONFIG`` is used, if set.
    """
    if path is None and use_env:
        path = os.environ.get(CONFIG_ENV) or None
    data = read_config_file(path) if path is not None else {}
    return build(ExperimentConfig, apply_overrides(data, overrides))


def config_from_dict(data: dict) -> ExperimentConfig:
    return build(ExperimentConfig, data)


def dump_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))
    return path
