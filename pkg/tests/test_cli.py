from __future__ import annotations

import json
import subprocess
import sys

import pytest

from lmfield.cli import build_parser, main

WN = json.dumps({"dimension": 1, "kind": "WhiteNoise"})
ISO = json.dumps({"dimension": 1, "kind": "Isotropic", "alpha": -0.35})


def experiment(tmp_path, **over):
    cfg = {"model": json.loads(WN), "ladder": [16, 32, 64], "replicates": 100, "nu": 0.5, "lag": [0], "seed": 3}
    cfg.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for name in ("simulate", "covariance", "check-h", "limit", "experiment"):
        assert name in text


def test_experiment_writes_reports(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["experiment", "--config", experiment(tmp_path), "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"report.json", "ladder.csv", "samples.csv"}
    assert json.loads((out / "report.json").read_text())["complete"] is True


def test_threads_flag_does_not_change_bytes(tmp_path):
    cfg = experiment(tmp_path, model=json.loads(ISO), nu=0.3)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["experiment", "--config", cfg, "--out", str(a), "--threads", "1"]) == 0
    assert main(["experiment", "--config", cfg, "--out", str(b), "--threads", "4"]) == 0
    for name in ("report.json", "ladder.csv", "samples.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_flag_overrides_config(tmp_path, capsys):
    cfg = experiment(tmp_path)
    main(["experiment", "--config", cfg, "--format", "json"])
    first = json.loads(capsys.readouterr().out)
    main(["experiment", "--config", cfg, "--seed", "4", "--format", "json"])
    second = json.loads(capsys.readouterr().out)
    assert first["config"]["seed"] == 3 and second["config"]["seed"] == 4
    assert first["points"][0]["variance"] != second["points"][0]["variance"]


def test_refusal_exit_code(tmp_path, capsys):
    cfg = experiment(tmp_path, model=json.loads(ISO), nu=0.5)
    assert main(["experiment", "--config", cfg]) == 2
    assert "alpha + beta < -d/4" in capsys.readouterr().err


@pytest.mark.parametrize(
    "over",
    [{"replicates": 10}, {"ladder": [64, 32, 16]}, {"lag": None}, {"bogus": 1}, {"model": {"dimension": 1, "kind": "Isotropic", "alpha": -0.6}}],
)
def test_invalid_config_exit_code(tmp_path, over, capsys):
    assert main(["experiment", "--config", experiment(tmp_path, **over)]) == 4
    assert "invalid configuration" in capsys.readouterr().err


def test_missing_and_malformed_config(tmp_path):
    assert main(["experiment", "--config", str(tmp_path / "nope.json")]) == 4
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["experiment", "--config", str(bad)]) == 4


def test_resource_exit_code(tmp_path, capsys):
    cfg = experiment(tmp_path, model={"dimension": 2, "kind": "WhiteNoise"}, lag=[1, 0], nu=1.0, ladder=[8, 16, 5000])
    out = tmp_path / "partial"
    assert main(["experiment", "--config", cfg, "--out", str(out)]) == 3
    assert "n = 5000" in capsys.readouterr().err
    report = json.loads((out / "report.json").read_text())
    assert report["complete"] is False and len(report["points"]) == 2


def test_simulate_csv_and_json(tmp_path):
    assert main(["simulate", "--model", WN, "--n", "8", "--seed", "1", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "field.csv").read_text().splitlines()
    assert len(rows) == 1 + 8
    assert main(["simulate", "--model", WN, "--n", "8", "--seed", "1", "--out", str(tmp_path), "--format", "json"]) == 0
    data = json.loads((tmp_path / "field.json").read_text())
    assert len(data["values"]) == 8
    assert [float(r.split(",")[-1]) for r in rows[1:]] == pytest.approx(data["values"], rel=0, abs=0)


def test_simulate_requires_model(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path)]) == 4


def test_unknown_model_kind(tmp_path, capsys):
    assert main(["simulate", "--model", '{"dimension": 1, "kind": "Fractal"}', "--out", str(tmp_path)]) == 4
    assert "malformed model" in capsys.readouterr().err


def test_covariance_to_stdout(capsys):
    assert main(["covariance", "--model", WN, "--radius", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "h1,r"
    values = {int(l.split(",")[0]): float(l.split(",")[1]) for l in lines[1:]}
    assert values[0] == pytest.approx(1.0) and values[2] == pytest.approx(0.0, abs=1e-12)


def test_check_h_verdict(capsys):
    assert main(["check-h", "--model", ISO]) == 0
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["verdict"] == "HoldsByLemma" and "alpha + beta < -1/4" in verdict["reason"]


def test_limit_kinds(tmp_path, capsys):
    cfg = tmp_path / "g.json"
    cfg.write_text(json.dumps({"model": {"dimension": 1, "kind": "WhiteNoise"}, "kind": "gaussian"}))
    assert main(["limit", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "limit.json").read_text())["variance"] == pytest.approx(2.0)
    cfg.write_text(json.dumps({"model": json.loads(ISO), "kind": "double_ito", "count": 200, "resolution": 64, "radius": 40}))
    assert main(["limit", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "limit.csv").read_text().splitlines()) == 201
    cfg.write_text(json.dumps({"model": json.loads(ISO), "kind": "fancy"}))
    assert main(["limit", "--config", str(cfg), "--out", str(tmp_path)]) == 4


def test_limit_refuses_gaussian_regime_for_double_ito(tmp_path):
    cfg = tmp_path / "g.json"
    cfg.write_text(json.dumps({"model": {"dimension": 1, "kind": "Isotropic", "alpha": -0.1}, "kind": "double_ito", "count": 10}))
    assert main(["limit", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lmfield.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "experiment" in proc.stdout
