"""Experiment stages: simulate -> preprocess -> train/eval or count -> report.

Every stage reads and writes files inside one run directory::

    config.yaml            resolved config
    manifest.jsonl         one row per rendered trace (see simulate.render_dataset)
    traces/                trace CSVs
    segments/segments.csv  128 columns per row, %.17g
    segments/index.jsonl   label, split and source span for each row
    model.zip, training.json, eval.json, confusion.png      activity / gesture
    counts.jsonl, variance_peaks.png                        respiration
    report.json, report.md                                  summary
    timing.json            wall-clock seconds (kept out of the report)

All outputs except timing.json are bit-identical for equal config digests.
Seeds: trace ``k`` of label ``i`` uses ``derive_seed(seed, i, k)``; the
train/test split, the validation hold-out and the CNN each derive their
seeds from the global seed.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .. import classifier, dsp, physics, respiration, simulate
from ..errors import ConfigError, HarvsenseError
from ..simulate import ScenarioSpec, derive_seed
from ..traces import ingest_trace
from . import plots
from .config import ExperimentConfig, apply_overrides, config_from_dict, dump_config

log = logging.getLogger(__name__)

SEGMENTS_DIR = "segments"
SEGMENTS_CSV = "segments.csv"
SEGMENTS_INDEX = "index.jsonl"
SWEEPABLE = {
    "distance_d": "scenario.geometry.distance_d",
    "noise_sigma": "scenario.noise.gaussian_sigma",
    "power_tx": "scenario.geometry.power_tx",
}
SWEEP_NOTES = {
    "power_tx": "transmit power stands in for the router model",
}


@dataclass
class RunReport:
    task: str
    config_digest: str
    metrics: dict
    artifacts: list
    runtime_s: float | None = None
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        """Report content; runtime is excluded so reruns compare equal."""
        return {
            "task": self.task,
            "config_digest": self.config_digest,
            "metrics": self.metrics,
            "artifacts": sorted(self.artifacts),
            "notes": self.notes,
        }


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")
    return path


def _read_jsonl(path: Path) -> list[dict]:
    try:
        return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    except OSError as exc:
        raise HarvsenseError(f"cannot read {path}: {exc.strerror or exc}") from exc


def scenario_specs(cfg: ExperimentConfig) -> list[ScenarioSpec]:
    """One nominal scenario per label, in label order."""
    sc = cfg.scenario
    specs = []
    for label in cfg.labels:
        motion = dict(sc.motion)
        if cfg.task == "respiration":
            motion.setdefault("rate_range_bpm", list(cfg.dataset.rate_range_bpm))
        try:
            spec = ScenarioSpec(cfg.task, label, geometry=sc.geometry, env=sc.env, harvester=sc.harvester,
                                motion_params=motion, noise=sc.noise, seed=cfg.seed,
                                sample_rate_hz=sc.sample_rate_hz, path_loss_mode=sc.path_loss_mode)
        except HarvsenseError as exc:
            raise ConfigError(f"scenario for label {label!r}: {exc}") from exc
        specs.append(spec)
    return specs


def simulate_stage(cfg: ExperimentConfig, run_dir) -> list[dict]:
    run_dir = Path(run_dir)
    dump_config(cfg, run_dir / "config.yaml")
    return simulate.render_dataset(scenario_specs(cfg), cfg.dataset.repetitions, run_dir,
                                   split_ratio=cfg.dataset.split_ratio, seed=cfg.seed,
                                   jitter=cfg.dataset.jitter, workers=cfg.dataset.workers)


def _segment_job(job):
    path, sg, seg, merge = job
    trace = ingest_trace(path)
    return [(s.vector, s.source["start"], s.source["end"])
            for s in dsp.extract_segments(trace, sg, seg, merge=merge)]


def _fan_out(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs, chunksize=16))
    return [fn(j) for j in jobs]


def preprocess_stage(cfg: ExperimentConfig, run_dir) -> dict:
    """Segment every trace in the manifest; write segments.csv + index.jsonl."""
    run_dir = Path(run_dir)
    rows = _read_jsonl(run_dir / "manifest.jsonl")
    label_index = {lab: i for i, lab in enumerate(cfg.labels)}
    jobs = [(run_dir / r["path"], cfg.dsp.sg, cfg.dsp.segmenter, cfg.dsp.merge) for r in rows]
    results = _fan_out(_segment_job, jobs, cfg.dataset.workers)

    vectors, index = [], []
    dropped = 0
    for row, segs in zip(rows, results):
        if row["label"] not in label_index:
            raise HarvsenseError(f"manifest label {row['label']!r} is not among config labels {list(cfg.labels)}")
        if not segs:
            dropped += 1
        for vec, start, end in segs:
            index.append({"row": len(vectors), "label": row["label"], "label_index": label_index[row["label"]],
                          "split": row["split"], "trace": row["path"], "start": int(start), "end": int(end)})
            vectors.append(vec)
    out = run_dir / SEGMENTS_DIR
    out.mkdir(parents=True, exist_ok=True)
    header = ",".join(f"v{i:03d}" for i in range(dsp.SEGMENT_LEN))
    body = "".join(",".join("%.17g" % v for v in vec) + "\n" for vec in vectors)
    (out / SEGMENTS_CSV).write_text(header + "\n" + body)
    (out / SEGMENTS_INDEX).write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in index))
    return {"segments": len(vectors), "traces": len(rows), "traces_without_segment": dropped}


def load_segments(seg_dir) -> tuple[np.ndarray, list[dict]]:
    seg_dir = Path(seg_dir)
    index = _read_jsonl(seg_dir / SEGMENTS_INDEX)
    path = seg_dir / SEGMENTS_CSV
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise HarvsenseError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not lines or len(lines[0].split(",")) != dsp.SEGMENT_LEN:
        raise HarvsenseError(f"{path}: expected a header with {dsp.SEGMENT_LEN} columns")
    x = np.array([[float(v) for v in line.split(",")] for line in lines[1:]], dtype=np.float64)
    x = x.reshape(-1, dsp.SEGMENT_LEN)
    if x.shape[0] != len(index):
        raise HarvsenseError(f"{path} has {x.shape[0]} rows but the index lists {len(index)}")
    return x, index


def _split(x, index, split):
    rows = [r["row"] for r in index if r["split"] == split]
    return x[rows], np.array([index[r]["label_index"] for r in rows], dtype=np.intp)


def train_stage(cfg: ExperimentConfig, run_dir, model_path=None, progress=None) -> classifier.CnnModel:
    run_dir = Path(run_dir)
    x, index = load_segments(run_dir / SEGMENTS_DIR)
    x_tr, y_tr = _split(x, index, "train")
    n = x_tr.shape[0]
    if n < 2:
        raise HarvsenseError(f"train split has {n} segments; need at least 2")
    # hold-out drawn from the canonical (content) order so it does not depend on file order
    order = classifier.canonical_order(x_tr, y_tr)
    perm = order[np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, "val"))).permutation(n)]
    n_val = min(n - 1, max(1, int(round(cfg.dataset.val_fraction * n))))
    val, fit = perm[:n_val], perm[n_val:]
    model = classifier.train(cfg.cnn_spec, (x_tr[fit], y_tr[fit]), (x_tr[val], y_tr[val]), progress=progress)
    model.training_meta["labels"] = list(cfg.labels)
    model.training_meta["train_segments"] = int(fit.size)
    model.training_meta["val_segments"] = int(n_val)
    classifier.save_model(model, model_path or run_dir / "model.zip")
    _write_json(run_dir / "training.json", {k: v for k, v in model.training_meta.items()})
    return model


def eval_stage(cfg: ExperimentConfig, run_dir, model_path=None, plot=True) -> classifier.EvalReport:
    run_dir = Path(run_dir)
    model = classifier.load_model(model_path or run_dir / "model.zip", cfg.cnn_spec)
    x, index = load_segments(run_dir / SEGMENTS_DIR)
    x_te, y_te = _split(x, index, "test")
    if x_te.shape[0] == 0:
        raise HarvsenseError("test split is empty; lower dataset.split_ratio")
    report = classifier.evaluate(model, (x_te, y_te), labels=cfg.labels)
    _write_json(run_dir / "eval.json", report.to_json())
    if plot:
        plots.confusion_matrix(report, run_dir / "confusion.png")
    return report


def count_trace(cfg: ExperimentConfig, trace) -> respiration.RespirationResult:
    return respiration.count_respiration(dsp.sg_filter(trace, cfg.dsp.sg), cfg.vp)


def _count_job(job):
    path, cfg = job
    return count_trace(cfg, ingest_trace(path))


def respiration_stage(cfg: ExperimentConfig, run_dir, plot=True) -> dict:
    """Count breaths in every manifest trace; write counts.jsonl."""
    run_dir = Path(run_dir)
    rows = _read_jsonl(run_dir / "manifest.jsonl")
    results = _fan_out(_count_job, [(run_dir / r["path"], cfg) for r in rows], cfg.dataset.workers)
    out = []
    for row, res in zip(rows, results):
        rec = {"trace": row["path"], "label": row["label"], **res.to_json()}
        if "rate_bpm" in row:
            rec["true_bpm"] = row["rate_bpm"]
            rec["error_bpm"] = res.rate_bpm - row["rate_bpm"]
        out.append(rec)
    (run_dir / "counts.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in out))
    if plot and rows:
        trace = dsp.sg_filter(ingest_trace(run_dir / rows[0]["path"]), cfg.dsp.sg)
        var = respiration.moving_variance(trace, cfg.vp)
        plots.variance_peaks(trace, var, results[0], cfg.vp, run_dir / "variance_peaks.png")
    return respiration_metrics(out)


def respiration_metrics(records) -> dict:
    errs = np.array([r["error_bpm"] for r in records if "error_bpm" in r], dtype=np.float64)
    metrics = {"traces": len(records), "flagged": sum(1 for r in records if r["flags"])}
    if errs.size:
        truth = np.array([r["true_bpm"] for r in records if "error_bpm" in r])
        abs_err = np.abs(errs)
        metrics.update(
            accuracy=float(max(0.0, 1.0 - np.mean(abs_err / truth))),
            within_1bpm=float(np.mean(abs_err <= 1.0)),
            mean_abs_error_bpm=float(abs_err.mean()),
            median_abs_error_bpm=float(np.median(abs_err)),
            p90_abs_error_bpm=float(np.percentile(abs_err, 90)),
        )
    return metrics


def build_report(run_dir) -> RunReport:
    """Summarise the artifacts present in ``run_dir``; writes report.json and report.md."""
    run_dir = Path(run_dir)
    try:
        cfg = config_from_dict(yaml.safe_load((run_dir / "config.yaml").read_text()))
    except OSError as exc:
        raise HarvsenseError(f"{run_dir} has no readable config.yaml ({exc.strerror or exc})") from exc
    artifacts = ["config.yaml"]
    notes = []
    if (run_dir / "manifest.jsonl").exists():
        artifacts.append("manifest.jsonl")
    if cfg.task == "respiration":
        if not (run_dir / "counts.jsonl").exists():
            raise HarvsenseError(f"{run_dir}: no counts.jsonl; run count-breaths first")
        metrics = respiration_metrics(_read_jsonl(run_dir / "counts.jsonl"))
        artifacts.append("counts.jsonl")
        extra = ["variance_peaks.png"]
    else:
        if not (run_dir / "eval.json").exists():
            raise HarvsenseError(f"{run_dir}: no eval.json; run train and eval first")
        ev = json.loads((run_dir / "eval.json").read_text())
        metrics = {"accuracy": ev["accuracy"], "per_class_recall": ev["per_class_recall"],
                   "confusion": ev["confusion"], "labels": ev["labels"],
                   "test_segments": int(np.sum(ev["confusion"]))}
        if (run_dir / "training.json").exists():
            meta = json.loads((run_dir / "training.json").read_text())
            # the train split, including the validation hold-out
            metrics["train_segments"] = meta["train_segments"] + meta["val_segments"]
            metrics["best_epoch"] = meta["best_epoch"]
        artifacts += ["eval.json", "model.zip", "training.json",
                      f"{SEGMENTS_DIR}/{SEGMENTS_CSV}", f"{SEGMENTS_DIR}/{SEGMENTS_INDEX}"]
        extra = ["confusion.png"]
    artifacts += [a for a in extra if (run_dir / a).exists()]
    artifacts = [a for a in artifacts if (run_dir / a).exists()]
    metrics["free_space_power_w"] = physics.friis_received_power(cfg.scenario.geometry)
    report = RunReport(cfg.task, cfg.digest(), metrics, artifacts, notes=notes)
    _write_json(run_dir / "report.json", report.to_json())
    (run_dir / "report.md").write_text(_report_markdown(report))
    return report


def _report_markdown(report: RunReport) -> str:
    lines = [f"# {report.task} run", "", f"config digest `{report.config_digest}`", "", "| metric | value |",
             "|---|---|"]
    for key, value in sorted(report.metrics.items()):
        if isinstance(value, (int, float)):
            lines.append(f"| {key} | {value:.6g} |")
    if "confusion" in report.metrics:
        labels = report.metrics.get("labels") or [str(i) for i in range(len(report.metrics["confusion"]))]
        lines += ["", "Confusion (rows true, columns predicted)", "", "| | " + " | ".join(labels) + " |",
                  "|---" * (len(labels) + 1) + "|"]
        for lab, row in zip(labels, report.metrics["confusion"]):
            lines.append(f"| {lab} | " + " | ".join(str(v) for v in row) + " |")
    lines += ["", "Artifacts: " + ", ".join(sorted(report.artifacts)), ""]
    return "\n".join(lines)


def run_pipeline(cfg: ExperimentConfig, run_dir=None, progress=None) -> RunReport:
    """Full pipeline for the configured task into ``run_dir`` (default ``cfg.output_dir``)."""
    run_dir = Path(run_dir or cfg.output_dir)
    timing = {}
    t0 = time.perf_counter()
    simulate_stage(cfg, run_dir)
    timing["simulate_s"] = time.perf_counter() - t0
    if cfg.task == "respiration":
        t1 = time.perf_counter()
        respiration_stage(cfg, run_dir)
        timing["count_s"] = time.perf_counter() - t1
    else:
        t1 = time.perf_counter()
        preprocess_stage(cfg, run_dir)
        timing["preprocess_s"] = time.perf_counter() - t1
        t1 = time.perf_counter()
        train_stage(cfg, run_dir, progress=progress)
        timing["train_s"] = time.perf_counter() - t1
        eval_stage(cfg, run_dir)
    report = build_report(run_dir)
    report.runtime_s = time.perf_counter() - t0
    timing["total_s"] = report.runtime_s
    _write_json(run_dir / "timing.json", timing)
    return report


def nominal_power_stats(cfg: ExperimentConfig) -> dict:
    """Noise-free harvested power and voltage averaged over time and labels."""
    powers, volts = [], []
    for spec in scenario_specs(cfg):
        spec = replace(spec, noise=simulate.NoiseSpec())
        t = np.arange(spec.n_samples) / spec.sample_rate_hz
        p = physics.harvested_power(spec.geometry, spec.env, simulate.trajectory(spec, t),
                                    path_loss_mode=spec.path_loss_mode)
        powers.append(float(np.mean(p)))
        volts.append(float(np.mean(physics.power_to_voltage(spec.harvester, p))))
    return {"mean_harvested_power_w": float(np.mean(powers)), "mean_voltage_v": float(np.mean(volts))}


def sweep_config(cfg: ExperimentConfig, parameter: str, value: float) -> ExperimentConfig:
    if parameter not in SWEEPABLE:
        raise ConfigError(f"{parameter!r} is not sweepable; sweepable fields: {sorted(SWEEPABLE)}")
    overrides = [(SWEEPABLE[parameter].split("."), value)]
    if parameter == "noise_sigma":
        # an explicit sigma replaces SNR-relative noise
        overrides.append((["scenario", "noise", "snr_db"], None))
    return config_from_dict(apply_overrides(cfg.to_dict(), overrides))


def run_sweep(cfg: ExperimentConfig, parameter: str, values, out_dir=None, progress=None) -> RunReport:
    """Re-run the pipeline once per value; writes sweep.json, sweep.csv and sweep.png.

    Each value is regenerated from the same global seed, so rows differ
    only through the swept parameter.
    """
    values = [float(v) for v in values]
    if not values:
        raise ConfigError("sweep needs at least one value")
    if parameter not in SWEEPABLE:
        raise ConfigError(f"{parameter!r} is not sweepable; sweepable fields: {sorted(SWEEPABLE)}")
    out_dir = Path(out_dir or cfg.output_dir)
    t0 = time.perf_counter()
    rows = []
    artifacts = []
    for i, value in enumerate(values):
        sub_cfg = sweep_config(cfg, parameter, value)
        sub = f"{parameter}_{i:02d}"
        rep = run_pipeline(sub_cfg, out_dir / sub, progress=progress)
        row = {"value": value, "accuracy": rep.metrics.get("accuracy"),
               "free_space_power_w": physics.friis_received_power(sub_cfg.scenario.geometry),
               "config_digest": rep.config_digest, "run": sub}
        row.update(nominal_power_stats(sub_cfg))
        rows.append(row)
        artifacts.append(f"{sub}/report.json")
    columns = ["value", "accuracy", "free_space_power_w", "mean_harvested_power_w", "mean_voltage_v", "run"]
    csv_lines = [",".join(columns)] + [",".join(_csv_cell(r[c]) for c in columns) for r in rows]
    (out_dir / "sweep.csv").write_text("\n".join(csv_lines) + "\n")
    plots.sweep_curve(parameter, rows, out_dir / "sweep.png")
    notes = [SWEEP_NOTES[parameter]] if parameter in SWEEP_NOTES else []
    summary = {"parameter": parameter, "field": SWEEPABLE[parameter], "rows": rows, "notes": notes,
               "config_digest": cfg.digest()}
    _write_json(out_dir / "sweep.json", summary)
    artifacts += ["sweep.json", "sweep.csv", "sweep.png"]
    report = RunReport(cfg.task, cfg.digest(), {"parameter": parameter, "rows": rows}, artifacts,
                       runtime_s=time.perf_counter() - t0, notes=notes)
    _write_json(out_dir / "timing.json", {"total_s": report.runtime_s})
    return report


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)
