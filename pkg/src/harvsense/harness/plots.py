"""Static figures (matplotlib Agg backend, PNG without timestamps)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def confusion_matrix(report, path) -> Path:
    conf = np.asarray(report.confusion)
    rows = conf.sum(axis=1, keepdims=True)
    frac = np.divide(conf, rows, out=np.zeros(conf.shape), where=rows > 0)
    labels = report.labels or [str(i) for i in range(conf.shape[0])]
    fig, ax = plt.subplots(figsize=(7, 6))
    im = ax.imshow(frac, cmap="Blues", vmin=0, vmax=1)
    ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right")
    ax.set_yticks(range(len(labels)), labels)
    for i in range(conf.shape[0]):
        for j in range(conf.shape[1]):
            if conf[i, j]:
                ax.text(j, i, f"{frac[i, j]:.2f}", ha="center", va="center", fontsize=7,
                        color="white" if frac[i, j] > 0.5 else "black")
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(f"accuracy {report.accuracy:.3f}")
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    return _save(fig, path)


def variance_peaks(trace, var, result, cfg, path) -> Path:
    t = trace.times
    fig, (ax0, ax1) = plt.subplots(2, 1, sharex=True, figsize=(9, 5))
    ax0.plot(t, trace.samples, lw=0.8)
    ax0.set_ylabel("voltage (V)")
    tv = t[: var.shape[0]]
    ax1.plot(tv, var.filled(np.nan), lw=0.8)
    ax1.axhline(cfg.variance_threshold_tau, color="grey", ls="--", lw=0.8)
    peaks = np.asarray(result.peak_locations, dtype=int)
    ax1.plot(tv[peaks], var.filled(np.nan)[peaks], "rx")
    ax1.set_ylabel("moving variance")
    ax1.set_xlabel("time (s)")
    ax0.set_title(f"{result.peak_count} peaks, {result.rate_bpm:.1f} bpm")
    fig.tight_layout()
    return _save(fig, path)


def sweep_curve(parameter, rows, path) -> Path:
    x = [r["value"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    acc = [np.nan if r["accuracy"] is None else r["accuracy"] for r in rows]
    ax.plot(x, acc, "o-", label="accuracy")
    ax.set_xlabel(parameter)
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax2 = ax.twinx()
    ax2.plot(x, [r["mean_harvested_power_w"] for r in rows], "s--", color="tab:orange", label="mean harvested power")
    ax2.set_ylabel("mean harvested power (W)")
    fig.legend(loc="lower left")
    fig.tight_layout()
    return _save(fig, path)
