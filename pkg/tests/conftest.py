import numpy as np
import pytest
from hypothesis import settings

from harvsense import kernels

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    """Each available kernel implementation."""
    return kernels.BACKENDS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def build_segments(task="activity", reps=60, seed=0):
    """In-memory segments (X, y) rendered with the harness default config."""
    from harvsense import dsp, simulate
    from harvsense.harness.config import load_config
    from harvsense.harness.pipeline import scenario_specs

    cfg = load_config(overrides=[f"task={task}", f"seed={seed}"], use_env=False)
    xs, ys = [], []
    for i, spec in enumerate(scenario_specs(cfg)):
        for rep in range(reps):
            trace = simulate.render_trace(simulate.jitter_spec(spec, simulate.derive_seed(seed, i, rep)))
            segs = dsp.extract_segments(trace, cfg.dsp.sg, cfg.dsp.segmenter, merge=cfg.dsp.merge)
            for s in segs:
                xs.append(s.vector)
                ys.append(i)
    return np.array(xs), np.array(ys)


@pytest.fixture(scope="session")
def standard_set():
    return build_segments()


_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    prev = _ACCEPTANCE.get(number, (title, "PASS"))[1]
    if report.failed:
        status = "FAIL"
    elif report.skipped:
        status = "SKIP" if prev == "PASS" else prev
    else:
        status = prev
    _ACCEPTANCE[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{status}  criterion {number:2d}: {title}")
