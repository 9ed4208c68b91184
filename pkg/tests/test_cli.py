import csv
import json
import re
import subprocess
import sys
import time

import pytest

from locallaw.cli import EXPERIMENTS, RunConfig, build_parser, main, parse_complex, run
from locallaw.errors import InvalidParameterError
from locallaw.harness import CSV_COLUMNS


def test_eval_mp(capsys):
    assert main(["eval", "mp", "--phi", "1", "--z", "2+1e-9i"]) == 0
    re_part, im_part = map(float, capsys.readouterr().out.split())
    assert re_part == pytest.approx(-0.5, abs=1e-8)
    assert im_part == pytest.approx(0.5, abs=1e-8)


def test_eval_gamma_and_psi(capsys):
    assert main(["eval", "gamma", "--phi", "1", "--N", "10", "--alpha", "10"]) == 0
    assert float(capsys.readouterr().out) == 0.0
    assert main(["eval", "psi", "--phi", "1", "--z", "2+0.1i", "--N", "100"]) == 0
    assert float(capsys.readouterr().out) > 0


def test_eval_on_cut_is_an_error(capsys):
    assert main(["eval", "mp", "--phi", "1", "--z", "2"]) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_experiment(capsys, tmp_path):
    assert main(["run", "--experiment", "nonsense", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    for name in EXPERIMENTS:
        assert name in err


def test_parse_complex():
    assert parse_complex("1-2i") == 1 - 2j
    with pytest.raises(InvalidParameterError):
        parse_complex("one")


def test_config_round_trip():
    cfg = RunConfig(experiment="rigidity", M=128, N=64, n_ladder=(32, 64), seed=2**63, eta_scale="linear")
    assert RunConfig.parse(cfg.to_text()) == cfg


def test_config_errors():
    with pytest.raises(InvalidParameterError, match="line 2"):
        RunConfig.parse("N = 10\ncolour = red\n")
    with pytest.raises(InvalidParameterError, match="line 1"):
        RunConfig.parse("N ten\n")
    with pytest.raises(InvalidParameterError, match="duplicate"):
        RunConfig.parse("N = 1\nN = 2\n")
    with pytest.raises(InvalidParameterError, match="'M'"):
        RunConfig.parse("M = many\n")


def test_help_flags_match_config_keys():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices["run"]
    flags = {a.dest for a in sub._actions if a.option_strings and a.dest not in ("help", "config")}
    assert flags == set(RunConfig.keys())
    text = sub.format_help()
    for key in RunConfig.keys():
        assert f"--{key}" in text


def test_smoke_run_is_fast_and_complete(tmp_path):
    t0 = time.perf_counter()
    status, report = run(RunConfig(), tmp_path)
    assert time.perf_counter() - t0 < 10
    assert status in (0, 1)
    for key in ("schema_version", "tool_version", "config", "criteria", "summary", "warnings", "partial", "all_passed"):
        assert key in report
    with open(tmp_path / "records.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) > 1
    json.loads((tmp_path / "report.json").read_text())


def test_reruns_are_identical(tmp_path):
    cfg = RunConfig(experiment="stability", trials=2)
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "records.csv").read_text() == (tmp_path / "b" / "records.csv").read_text()
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    for r in (ra, rb):
        r.pop("wall_clock_seconds")
        for c in r["criteria"]:
            c.pop("seconds", None)
    assert ra == rb


def test_jobs_do_not_change_records(tmp_path):
    run(RunConfig(experiment="stability", trials=2, jobs=1), tmp_path / "a")
    run(RunConfig(experiment="stability", trials=2, jobs=2), tmp_path / "b")
    assert (tmp_path / "a" / "records.csv").read_text() == (tmp_path / "b" / "records.csv").read_text()


def test_config_file_flags_and_env(tmp_path, monkeypatch):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("experiment = laws\njobs = 1\n")
    out = tmp_path / "out"
    monkeypatch.setenv("LOCALLAW_JOBS", "2")
    assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["jobs"] == 2
    assert report["config"]["experiment"] == "laws"
    assert main(["run", "--config", str(cfg_path), "--jobs", "1", "--out", str(out)]) == 0
    assert json.loads((out / "report.json").read_text())["config"]["jobs"] == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "locallaw.cli", "run", "--experiment", "domination", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert re.search(r"^C10 PASS", proc.stdout, re.M)
