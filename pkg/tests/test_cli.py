import os
import subprocess
import sys

import pytest

from cascade_lab import SCHEMA_VERSION
from cascade_lab.cli import run
from cascade_lab.config import ExperimentConfig, worker_count
from cascade_lab.errors import PreconditionError
from cascade_lab.io import json_text, read_csv, read_json, write_csv


def test_unknown_flag_exits_two():
    with pytest.raises(SystemExit) as exc:
        run(["toy", "hetero", "--bogus"])
    assert exc.value.code == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cascade_lab.cli", "lambda", "build", "--N", "1",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "lambda" in proc.stderr


def test_hetero_with_negative_span(tmp_path, capsys):
    assert run(["toy", "hetero", "--j", "3", "--t", "-3:3", "--samples", "61", "--out", str(tmp_path)]) == 0
    first, header, rows = read_csv(tmp_path / "hetero.csv")
    assert first == f"# schema_version={SCHEMA_VERSION} kind=hetero"
    assert header[0] == "t" and len(rows) == 61
    assert float(rows[0][0]) == -3.0 and float(rows[-1][0]) == 3.0
    assert max(float(r[-1]) for r in rows) < 1e-6
    assert (tmp_path / "hetero.gp").read_text().startswith("# schema_version=")


def test_lambda_build_and_verify(tmp_path):
    args = ["lambda", "build", "--N", "3", "--gen-size", "4", "--radius", "10000", "--seed", "7"]
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b")]) == 0
    doc = read_json(tmp_path / "a" / "lambda.json")
    assert doc["schema_version"] == SCHEMA_VERSION and doc["kind"] == "lambda_set"
    assert len(doc["generations"]) == 3
    assert (tmp_path / "a" / "lambda.json").read_bytes() == (tmp_path / "b" / "lambda.json").read_bytes()
    assert read_json(tmp_path / "a" / "verdict.json")["ok"] is True
    src = str(tmp_path / "a" / "lambda.json")
    assert run(["lambda", "verify", "--input", src, "--out", str(tmp_path / "v")]) == 0
    assert run(["lambda", "sums", "--input", src, "--s", "1.5", "--out", str(tmp_path / "s")]) == 0
    assert read_csv(tmp_path / "s" / "sums.csv")[1][0]


def test_bad_parameters_exit_two(tmp_path):
    assert run(["lambda", "build", "--gen-size", "3", "--out", str(tmp_path)]) == 2
    assert run(["cascade", "search", "--N", "5", "--delta", "0.05", "--out", str(tmp_path)]) == 2
    assert run(["nf", "check", "--amplitudes", "2.0", "--out", str(tmp_path)]) == 2


def test_missing_input_exits_nonzero(tmp_path):
    assert run(["lambda", "verify", "--input", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2
    (tmp_path / "junk.json").write_text("{not json")
    assert run(["lambda", "verify", "--input", str(tmp_path / "junk.json"), "--out", str(tmp_path)]) == 2


def test_config_file_and_override(tmp_path):
    ini = tmp_path / "exp.ini"
    ini.write_text("[toy]\nj = 2\nsamples = 11\nt_start = -1\nt_end = 1\n")
    assert run(["toy", "hetero", "--config", str(ini), "--out", str(tmp_path)]) == 0
    assert len(read_csv(tmp_path / "hetero.csv")[2]) == 11
    assert run(["toy", "hetero", "--config", str(ini), "--samples", "21", "--out", str(tmp_path)]) == 0
    assert len(read_csv(tmp_path / "hetero.csv")[2]) == 21


def test_config_rejects_unknown_keys(tmp_path):
    ini = tmp_path / "bad.ini"
    ini.write_text("[toy]\ncolour = blue\n")
    with pytest.raises(PreconditionError):
        ExperimentConfig.load(str(ini))
    ini.write_text("[nowhere]\nx = 1\n")
    with pytest.raises(PreconditionError):
        ExperimentConfig.load(str(ini))
    assert run(["toy", "hetero", "--config", str(ini), "--out", str(tmp_path)]) == 2


def test_config_text_round_trip(tmp_path):
    cfg = ExperimentConfig()
    cfg.set("lambda", "seed", "9")
    cfg.set("nf", "amplitudes", "0.1,0.01")
    path = tmp_path / "c.ini"
    path.write_text(cfg.to_text())
    again = ExperimentConfig.load(str(path))
    assert again.values == cfg.values


def test_thread_env_wins(monkeypatch):
    monkeypatch.delenv("CASCADE_LAB_THREADS", raising=False)
    assert worker_count(None, 1) == 1
    assert worker_count(3) == 3
    monkeypatch.setenv("CASCADE_LAB_THREADS", "2")
    assert worker_count(5) == 2
    monkeypatch.setenv("CASCADE_LAB_THREADS", "zero")
    with pytest.raises(PreconditionError):
        worker_count()
    monkeypatch.setenv("CASCADE_LAB_THREADS", "0")
    with pytest.raises(PreconditionError):
        worker_count()


def test_sweep_uses_env_threads(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CASCADE_LAB_THREADS", "2")
    code = run(["sweep", "--command", "cancellation", "--grid", "delta=1e-2,1e-3", "--threads", "1",
                "--out", str(tmp_path)])
    assert code == 0
    assert "on 2 worker(s)" in capsys.readouterr().out
    first, header, rows = read_csv(tmp_path / "sweep_cancellation.csv")
    assert "kind=sweep_cancellation" in first and len(rows) == 2


def test_sweep_rejects_unknown_grid_key(tmp_path):
    assert run(["sweep", "--command", "cascade", "--grid", "colour=1", "--out", str(tmp_path)]) == 2


def test_writers_are_versioned(tmp_path):
    text = json_text({"x": 1.5, "z": 1 + 2j}, "demo")
    assert '"schema_version"' in text and '"kind": "demo"' in text and '"im": 2.0' in text
    write_csv(tmp_path / "t.csv", ["a", "b"], [[1, 0.5], ["x,y", 2]], "demo")
    first, header, rows = read_csv(tmp_path / "t.csv")
    assert first == f"# schema_version={SCHEMA_VERSION} kind=demo"
    assert rows == [["1", "0.5"], ["x,y", "2"]]
    assert (tmp_path / "t.csv").read_bytes().count(b"\r\n") == 4
