import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from harvsense import dsp
from harvsense.errors import DegenerateSegmentError, DomainError
from harvsense.traces import VoltageTrace

from oracles import burst_trace


def tr(x, fs=200.0):
    return VoltageTrace(np.asarray(x, dtype=float), fs)


def test_sg_config_validation():
    for args in [(30, 3), (5, 5), (0, 0), (7, -1)]:
        with pytest.raises(DomainError):
            dsp.SgConfig(*args)


def test_sg_coeffs_match_pinv_oracle():
    for w, k in [(31, 3), (11, 2), (7, 0), (21, 5)]:
        m = w // 2
        vander = np.vander(np.arange(-m, m + 1), k + 1, increasing=True)
        np.testing.assert_allclose(dsp.sg_coeffs(w, k), np.linalg.pinv(vander)[0], atol=1e-13)
        assert dsp.sg_coeffs(w, k).sum() == pytest.approx(1.0, abs=1e-13)


def test_sg_constant_and_impulse():
    out = dsp.sg_filter(tr(np.full(100, 2.5))).samples
    np.testing.assert_allclose(out, 2.5, atol=1e-13)
    x = np.zeros(101)
    x[50] = 1.0
    out = dsp.sg_filter(tr(x)).samples
    w = dsp.sg_coeffs(31, 3)
    np.testing.assert_allclose(out[35:66], w[::-1], atol=1e-15)
    assert out.sum() == pytest.approx(1.0, abs=1e-12)


def test_sg_too_short():
    with pytest.raises(DomainError, match="31"):
        dsp.sg_filter(tr(np.zeros(30)))


def test_sg_keeps_length_and_rate():
    out = dsp.sg_filter(tr(np.random.default_rng(0).random(250), fs=123.0))
    assert len(out) == 250 and out.sample_rate_hz == 123.0


def test_segment_constant_is_empty():
    assert dsp.segment(tr(np.full(2000, 1.0))) == []


def test_single_centered_burst():
    fs = 200
    x = np.full(10 * fs, 1.0)
    k = np.arange(2 * fs)
    x[4 * fs:6 * fs] += 0.5 * np.sin(2 * np.pi * 4 * k / fs)
    spans = dsp.segment(tr(x))
    stride = dsp.SegmenterConfig().stride_samples(fs)
    assert len(spans) == 1
    assert abs(spans[0][0] - 4 * fs) <= stride and abs(spans[0][1] - 6 * fs) <= stride


def test_two_bursts_two_spans():
    fs = 200
    x = np.full(12 * fs, 1.0)
    k = np.arange(2 * fs)
    x[2 * fs:4 * fs] += 0.5 * np.sin(2 * np.pi * 4 * k / fs)
    x[7 * fs:9 * fs] += 0.5 * np.sin(2 * np.pi * 4 * k / fs)
    assert len(dsp.segment(tr(x))) == 2


def test_close_bursts_merge():
    fs = 200
    x = np.full(12 * fs, 1.0)
    k = np.arange(2 * fs)
    x[2 * fs:4 * fs] += 0.5 * np.sin(2 * np.pi * 4 * k / fs)
    # 0.3 s of quiet is shorter than the 0.5 s window
    x[4 * fs + 60:6 * fs + 60] += 0.5 * np.sin(2 * np.pi * 4 * k / fs)
    assert len(dsp.segment(tr(x))) == 1


@given(st.integers(0, 20))
def test_segment_translation_covariant(m):
    fs, stride = 200, 50
    base = np.full(14 * fs, 1.0)
    k = np.arange(2 * fs)
    burst = 0.5 * np.sin(2 * np.pi * 4 * k / fs)
    a, b = base.copy(), base.copy()
    a[3 * fs:5 * fs] += burst
    b[3 * fs + m * stride:5 * fs + m * stride] += burst
    sa, sb = dsp.segment(tr(a)), dsp.segment(tr(b))
    assert [(s + m * stride, e + m * stride) for s, e in sa] == sb


def test_spans_cover_full_windows(rng):
    x, _ = burst_trace(rng)
    n_w = dsp.SegmenterConfig().window_samples(200)
    for s, e in dsp.segment(tr(x)):
        assert e - s >= n_w


def test_normalize_examples():
    trace = tr([0.2, 0.4, 0.6])
    np.testing.assert_allclose(dsp.normalize(trace, (0, 3), offset=0.0), [0, 0.5, 1], atol=1e-15)
    with pytest.raises(DegenerateSegmentError):
        dsp.normalize(tr(np.full(10, 3.0)), (0, 10), offset=0.0)
    with pytest.raises(DomainError):
        dsp.normalize(trace, (2, 5), offset=0.0)


@given(arrays(np.float64, st.integers(3, 50), elements=st.floats(-10, 10)), st.floats(0.1, 100), st.floats(-50, 50))
def test_normalize_affine_invariant_and_bounded(x, a, b):
    if np.ptp(x) < 1e-3:
        return
    out = dsp.normalize(tr(x), (0, x.size), offset=0.0)
    assert out.min() == 0.0 and out.max() == 1.0
    np.testing.assert_allclose(dsp.normalize(tr(a * x + b), (0, x.size), offset=0.0), out, atol=1e-9)


def test_dc_offset_quiet_mean_and_fallback():
    fs = 200
    x = np.full(6 * fs, 0.8)
    k = np.arange(2 * fs)
    x[2 * fs:4 * fs] += np.sin(2 * np.pi * 4 * k / fs)
    assert dsp.dc_offset(tr(x)) == pytest.approx(0.8, abs=1e-12)
    noisy = np.sin(2 * np.pi * 4 * np.arange(2000) / fs)
    assert dsp.dc_offset(tr(noisy)) == pytest.approx(np.percentile(noisy, 10))


def test_resample_examples():
    x = np.random.default_rng(1).random(128)
    out = dsp.resample_128(x)
    assert np.array_equal(out, x) and out is not x
    np.testing.assert_allclose(dsp.resample_128(np.linspace(0, 1, 256)), np.linspace(0, 1, 128), atol=1e-15)
    ramp = dsp.resample_128([0.0, 1.0])
    np.testing.assert_allclose(ramp, np.linspace(0, 1, 128), atol=1e-15)
    assert ramp[0] == 0.0 and ramp[-1] == 1.0
    with pytest.raises(DomainError):
        dsp.resample_128([1.0])


@given(arrays(np.float64, st.integers(2, 400), elements=st.floats(-5, 5)))
def test_resample_endpoints_and_monotone(x):
    out = dsp.resample_128(x)
    assert out.shape == (128,) and out[0] == x[0] and out[-1] == x[-1]
    xs = np.sort(x)
    assert (np.diff(dsp.resample_128(xs)) >= 0).all()


def test_segment_type_invariants():
    with pytest.raises(DomainError):
        dsp.Segment(np.zeros(127))
    with pytest.raises(DomainError):
        dsp.Segment(np.full(128, 1.5))


def test_extract_segments(rng):
    x, bursts = burst_trace(rng, n_bursts=2, freqs=(2.0,))
    segs = dsp.extract_segments(tr(x), label="demo")
    assert len(segs) == 2
    for s in segs:
        assert s.vector.shape == (128,) and 0 <= s.vector.min() < 0.05 and 0.95 < s.vector.max() <= 1
        assert s.label == "demo" and s.source["end"] > s.source["start"]
    hull = dsp.extract_segments(tr(x), merge="hull")
    assert len(hull) == 1 and hull[0].source["start"] == segs[0].source["start"]
    assert dsp.extract_segments(tr(np.full(2000, 1.0))) == []
    with pytest.raises(DomainError):
        dsp.extract_segments(tr(x), merge="bogus")
