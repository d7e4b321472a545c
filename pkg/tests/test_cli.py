import json
import subprocess
import sys

import pytest
import yaml

from harvsense.harness import cli

TINY = ["--set", "dataset.repetitions=4", "--set", "cnn.epochs=2"]


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_help_lists_subcommands_and_flags(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("simulate", "preprocess", "count-breaths", "train", "eval", "sweep", "report"):
        assert cmd in out
    with pytest.raises(SystemExit):
        cli.main(["sweep", "--help"])
    out = capsys.readouterr().out
    assert "--param" in out and "--values" in out and "--set" in out


def test_usage_errors_exit_2(capsys):
    code, _, err = run(["frobnicate"], capsys)
    assert code == 2 and json.loads(err.splitlines()[-1])["error"] == "usage"
    code, _, err = run(["simulate", "--bogus"], capsys)
    assert code == 2
    code, _, err = run([], capsys)
    assert code == 2


def test_simulate_with_config(tmp_path, capsys):
    conf = tmp_path / "c.yaml"
    conf.write_text(yaml.safe_dump({"task": "gesture", "dataset": {"repetitions": 3}}))
    code, out, _ = run(["simulate", "--config", str(conf), "--out", str(tmp_path / "run")], capsys)
    assert code == 0
    assert json.loads(out)["traces"] == 30
    assert len((tmp_path / "run" / "manifest.jsonl").read_text().splitlines()) == 30
    assert len(list((tmp_path / "run" / "traces").rglob("*.csv"))) == 30


def test_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "absent.yaml"
    code, _, err = run(["simulate", "--config", str(missing), "--out", str(tmp_path)], capsys)
    assert code != 0 and str(missing) in err


def test_env_var_config(tmp_path, capsys, monkeypatch):
    conf = tmp_path / "env.yaml"
    conf.write_text("task: respiration\ndataset: {repetitions: 1}\n")
    monkeypatch.setenv("HARVSENSE_CONFIG", str(conf))
    code, out, _ = run(["simulate", "--out", str(tmp_path / "r")], capsys)
    assert code == 0 and json.loads(out)["traces"] == 3


def test_stage_by_stage(tmp_path, capsys):
    r = str(tmp_path / "run")
    assert run(["simulate", "--out", r, *TINY], capsys)[0] == 0
    code, out, _ = run(["preprocess", "--run", r, *TINY], capsys)
    assert code == 0 and json.loads(out)["segments"] == 40
    seg_csv = (tmp_path / "run" / "segments" / "segments.csv").read_text().splitlines()
    assert len(seg_csv[0].split(",")) == 128 and len(seg_csv) == 41
    assert run(["train", "--run", r, *TINY], capsys)[0] == 0
    code, out, _ = run(["eval", "--run", r, *TINY], capsys)
    assert code == 0 and 0 <= json.loads(out)["accuracy"] <= 1
    assert (tmp_path / "run" / "confusion.png").stat().st_size > 0
    code, out, _ = run(["report", "--run", r], capsys)
    rep = json.loads(out)
    assert code == 0 and "eval.json" in rep["artifacts"]
    for a in rep["artifacts"]:
        assert (tmp_path / "run" / a).exists()


def test_eval_with_mismatched_model(tmp_path, capsys):
    r = str(tmp_path / "run")
    run(["run", "--out", r, *TINY], capsys)
    code, _, err = run(["eval", "--run", r, *TINY, "--set", "dataset.labels=[walk, squat]"], capsys)
    assert code == 1 and json.loads(err)["error"] == "ModelFormatError"


def test_count_breaths_trace(tmp_path, capsys):
    r = tmp_path / "resp"
    run(["simulate", "--out", str(r), "--set", "task=respiration", "--set", "dataset.repetitions=1"], capsys)
    trace = next((r / "traces").rglob("*.csv"))
    code, out, _ = run(["count-breaths", "--trace", str(trace)], capsys)
    res = json.loads(out)["results"][0]
    assert code == 0
    assert set(res) >= {"rate_bpm", "peak_count", "duration_s", "peak_locations", "flags"}
    code, out, _ = run(["count-breaths", "--run", str(r), "--set", "task=respiration"], capsys)
    assert code == 0 and json.loads(out)["traces"] == 3
    assert (r / "variance_peaks.png").exists()


def test_malformed_trace_reports_row(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("time_s,voltage_v\n0,1\n0.005,x\n")
    code, _, err = run(["count-breaths", "--trace", str(bad)], capsys)
    payload = json.loads(err)
    assert code == 1 and payload["error"] == "TraceParseError" and payload["row"] == 3


def test_sweep_rows_and_bad_param(tmp_path, capsys):
    code, out, _ = run(["sweep", "--param", "distance_d", "--values", "1.0,1.25,1.5,1.75",
                        "--out", str(tmp_path / "sw"), "--set", "dataset.repetitions=2", "--set", "cnn.epochs=1"],
                       capsys)
    assert code == 0
    rows = json.loads(out)["metrics"]["rows"]
    assert [r["value"] for r in rows] == [1.0, 1.25, 1.5, 1.75]
    assert len((tmp_path / "sw" / "sweep.csv").read_text().splitlines()) == 5
    code, _, err = run(["sweep", "--param", "wavelength_lambda", "--values", "1"], capsys)
    assert code == 2 and "distance_d" in err and "noise_sigma" in err and "power_tx" in err
    code, _, err = run(["sweep", "--param", "distance_d", "--values", "a,b"], capsys)
    assert code == 2


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "harvsense.harness.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "harvsense" in proc.stdout
