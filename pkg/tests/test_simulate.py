import itertools
import json
import math

import numpy as np
import pytest

from harvsense import physics, simulate as S, trajectories as T
from harvsense.errors import DomainError
from harvsense.traces import ingest_trace


def nmsd(a, b):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    return np.mean((a - b) ** 2) / (0.5 * (np.mean(a**2) + np.mean(b**2)))


def test_respiration_baseline_and_quarter_period():
    for label in T.RESPIRATION_LABELS:
        spec = S.ScenarioSpec("respiration", label, motion_params={"phase": 0.0})
        m = spec.motion_params
        assert S.trajectory(spec, 0.0).clearance_front_h == pytest.approx(m["baseline_m"], abs=1e-15)
        quarter = 0.25 / m["rate_hz"]
        assert S.trajectory(spec, quarter).clearance_front_h == pytest.approx(m["baseline_m"] + m["amplitude_m"], abs=1e-12)


def test_sine_waveform_option():
    spec = S.ScenarioSpec("respiration", "lying", motion_params={"waveform": "sine"})
    m = spec.motion_params
    t = np.array([0.0, 1.0, 2.0, 3.0])  # 0.25 Hz: zero, peak, zero, trough
    front = S.trajectory(spec, t).clearance_front_h
    np.testing.assert_allclose(front - m["baseline_m"], [0, m["amplitude_m"], 0, -m["amplitude_m"]], atol=1e-15)


def test_walk_midpoint_straddles_los():
    spec = S.ScenarioSpec("activity", "walk")
    snap = S.trajectory(spec, spec.duration_s / 2)
    assert snap.clearance_front_h > 0 > snap.clearance_back_h
    assert snap.clearance_front_h == pytest.approx(-snap.clearance_back_h)


@pytest.mark.parametrize("t", [-0.1, 1e9, math.nan])
def test_trajectory_out_of_range(t):
    with pytest.raises(DomainError):
        S.trajectory(S.ScenarioSpec("gesture", "wave"), t)


def test_spec_validation():
    with pytest.raises(DomainError):
        S.ScenarioSpec("dance", "walk")
    with pytest.raises(DomainError):
        S.ScenarioSpec("activity", "wave")
    with pytest.raises(DomainError):
        S.ScenarioSpec("activity", "walk", duration_s=0.0)
    with pytest.raises(DomainError):
        S.NoiseSpec(gaussian_sigma=-1.0)


def test_static_far_body_gives_free_space_voltage():
    geom, harv = physics.ChannelGeometry(), physics.HarvesterModel()
    v_free = physics.power_to_voltage(harv, physics.friis_received_power(geom))
    spec = S.ScenarioSpec("activity", "plank_hold", motion_params={"amp": 0.0, "rest_front_m": -math.inf})
    trace = S.render_trace(spec)
    assert np.ptp(trace.samples) == 0.0
    assert trace.samples[0] == pytest.approx(v_free, rel=1e-12)
    far = S.render_trace(S.ScenarioSpec("activity", "plank_hold", motion_params={"amp": 0.0, "rest_front_m": -100.0}))
    np.testing.assert_allclose(far.samples, v_free, rtol=1e-3)


def test_render_length_and_meta():
    spec = S.ScenarioSpec("gesture", "circle", duration_s=3.3333, seed=7)
    trace = S.render_trace(spec)
    assert len(trace) == round(3.3333 * 200)
    assert trace.meta["label"] == "circle" and trace.meta["seed"] == 7
    assert trace.meta["geometry_digest"] == S.digest(spec.geometry)


@pytest.mark.parametrize("rate", [0.15, 0.25, 0.4])
def test_respiration_spectral_line(rate):
    spec = S.ScenarioSpec("respiration", "sitting", motion_params={"rate_hz": rate},
                          noise=S.NoiseSpec(snr_db=10.0), seed=3)
    x = S.render_trace(spec).samples
    x = x - x.mean()
    freqs = np.fft.rfftfreq(x.size, 1 / spec.sample_rate_hz)
    peak = freqs[np.argmax(np.abs(np.fft.rfft(x)))]
    assert abs(peak - rate) <= freqs[1] + 1e-12


@pytest.mark.parametrize("label", T.RESPIRATION_LABELS)
def test_respiration_autocorrelation_period(label):
    spec = S.ScenarioSpec("respiration", label, motion_params={"rate_hz": 0.3})
    x = S.clean_voltage(spec)
    x = x - x.mean()
    ac = np.correlate(x, x, "full")[x.size - 1:]
    period = spec.sample_rate_hz / 0.3
    lo, hi = int(period / 2), int(period * 1.5)
    assert abs(lo + np.argmax(ac[lo:hi]) - period) <= 1


def test_walk_dip_pattern_with_noise():
    sigma = 0.01
    spec = S.ScenarioSpec("activity", "walk", noise=S.NoiseSpec(gaussian_sigma=sigma), seed=11)
    x = S.render_trace(spec).samples
    m = spec.motion_params
    i0 = int(m["lead_s"] * 200)
    i1 = int((m["lead_s"] + m["active_s"]) * 200)
    walk = x[i0:i1]
    k = int(np.argmin(walk))
    assert walk.size / 3 <= k <= 2 * walk.size / 3
    assert walk[0] - walk[k] >= 3 * sigma and walk[-1] - walk[k] >= 3 * sigma


@pytest.mark.parametrize("task", sorted(T.TASK_LABELS))
def test_noise_free_bounds_and_distinct_labels(task):
    v_max = physics.HarvesterModel().v_max
    traces = {lab: S.clean_voltage(S.ScenarioSpec(task, lab)) for lab in T.TASK_LABELS[task]}
    for x in traces.values():
        assert (x >= 0).all() and (x <= v_max).all()
    for a, b in itertools.combinations(traces, 2):
        assert nmsd(traces[a], traces[b]) > 0.01, (a, b)


def test_render_deterministic():
    spec = S.ScenarioSpec("activity", "squat", noise=S.NoiseSpec(0.05, 0.02, 10.0), seed=2**63 + 5)
    a, b = S.render_trace(spec), S.render_trace(spec)
    assert np.array_equal(a.samples, b.samples)
    c = S.render_trace(S.ScenarioSpec("activity", "squat", noise=S.NoiseSpec(0.05, 0.02, 10.0), seed=6))
    assert not np.array_equal(a.samples, c.samples)


def test_snr_noise_level():
    spec = S.ScenarioSpec("respiration", "lying", noise=S.NoiseSpec(snr_db=10.0), seed=1)
    clean = S.clean_voltage(spec)
    noise = S.render_trace(spec).samples - clean
    assert np.var(noise) == pytest.approx(np.var(clean) / 10, rel=0.05)


def test_derive_seed_stable():
    assert S.derive_seed(0, 1, 2) == S.derive_seed(0, 1, 2)
    assert S.derive_seed(0, 1, 2) != S.derive_seed(0, 2, 1)
    assert 0 <= S.derive_seed("x") < 2**64


def test_split_tags_exact_counts():
    tags = S.split_tags(1000, 0.8, seed=4)
    assert tags.count("train") == 800 and tags.count("test") == 200
    assert tags == S.split_tags(1000, 0.8, seed=4)
    with pytest.raises(DomainError):
        S.split_tags(10, 1.5, 0)


def test_render_dataset(tmp_path):
    specs = [S.ScenarioSpec("gesture", lab, noise=S.NoiseSpec(0.01)) for lab in T.GESTURE_LABELS]
    rows = S.render_dataset(specs, 100, tmp_path / "a", split_ratio=0.8, seed=9)
    assert len(rows) == 1000
    files = sorted((tmp_path / "a" / "traces").rglob("*.csv"))
    assert len(files) == 1000
    manifest = [json.loads(line) for line in (tmp_path / "a" / "manifest.jsonl").read_text().splitlines()]
    assert manifest == rows
    assert sum(r["split"] == "train" for r in rows) == 800
    assert set(rows[0]) >= {"label", "path", "seed", "split", "duration_s", "sample_rate_hz"}
    tr = ingest_trace(tmp_path / "a" / rows[5]["path"])
    assert tr.sample_rate_hz == 200.0 and len(tr) == round(rows[5]["duration_s"] * 200)

    S.render_dataset(specs[:2], 3, tmp_path / "b", seed=9)
    S.render_dataset(specs[:2], 3, tmp_path / "c", seed=9, workers=2)
    for p in sorted((tmp_path / "b").rglob("*")):
        if p.is_file():
            assert p.read_bytes() == (tmp_path / "c" / p.relative_to(tmp_path / "b")).read_bytes()


def test_render_dataset_respiration_truth(tmp_path):
    spec = S.ScenarioSpec("respiration", "lying", motion_params={"rate_range_bpm": [8, 30]})
    rows = S.render_dataset([spec], 5, tmp_path)
    rates = [r["rate_bpm"] for r in rows]
    assert all(8 <= r <= 30 for r in rates) and len(set(rates)) == 5


def test_render_dataset_errors(tmp_path):
    with pytest.raises(DomainError):
        S.render_dataset([], 1, tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        S.render_dataset([S.ScenarioSpec("gesture", "wave")], 1, blocker)
