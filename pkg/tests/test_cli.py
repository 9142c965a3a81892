import json
import subprocess
import sys

import pytest

from epdta import __version__
from epdta import cli, sim


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_validate_shipped(capsys):
    assert run("validate", "--model", "fig1", "--species", "sole.cfg", "--months", 6) == 0
    out = capsys.readouterr().out
    assert "fig1.epdta: ok" in out and "sole.cfg: ok" in out


def test_validate_reports_diagnostics(tmp_path, capsys):
    bad = tmp_path / "bad.epdta"
    bad.write_text("name bad\nclocks x\nlocations\n  l0 invariant: x >= 3\ninit l0\nmax_time 2\n")
    assert run("validate", "--model", bad) == 1
    assert "past-closed" in capsys.readouterr().err


def test_validate_bad_species(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("mortality: [[0.1, 0.2]]\n")
    assert run("validate", "--species", cfg) == 1


def test_unknown_model_is_usage_error(capsys):
    assert run("reach", "--model", "no-such-model", "--target", "dead", "--horizon", 2) == 1
    assert "no such model" in capsys.readouterr().err


def test_bad_arguments_exit_one():
    assert run("simulate") == 1
    assert run("frobnicate") == 1


def test_reach(capsys):
    assert run("reach", "--model", "chain03", "--target", "dead", "--horizon", 2, "--exact") == 0
    assert capsys.readouterr().out.split() == ["0.51", "51/100"]


def test_reach_unknown_target(capsys):
    assert run("reach", "--model", "chain03", "--target", "nowhere", "--horizon", 2) == 1


def test_reach_multiple_targets(capsys):
    assert run("reach", "--model", "sole2", "--target", "dead,fished", "--horizon", 1) == 0
    assert 0 < float(capsys.readouterr().out) < 1


def test_enumerate(tmp_path, capsys):
    out = tmp_path / "g.txt"
    assert run("enumerate", "--model", "fig1", "--horizon", 3, "--out", out) == 0
    assert out.read_text().startswith("# states")
    assert "states" in capsys.readouterr().err


def test_state_cap_is_runtime_error(capsys):
    assert run("enumerate", "--model", "sole2", "--cap", 10) == 2
    assert "cap" in capsys.readouterr().err


def test_state_cap_environment(monkeypatch, capsys):
    monkeypatch.setenv("EPDTA_STATE_CAP", "5")
    assert run("reach", "--model", "fig1", "--target", "l2", "--horizon", 4) == 2


def test_export_prism(tmp_path):
    out = tmp_path / "fig1.nm"
    assert run("export-prism", "--model", "fig1", "--max-time", 3, "--out", out) == 0
    text = out.read_text()
    assert "const int MAX_TIME = 3;" in text
    manifest = json.loads((tmp_path / "fig1.nm.manifest.json").read_text())
    assert manifest["command"] == "export-prism" and manifest["version"] == __version__


def test_export_to_stdout(capsys):
    assert run("export-prism", "--model", "minimal") == 0
    assert capsys.readouterr().out.lstrip().startswith("// PRISM MDP")


def test_simulate_writes_73_rows(tmp_path):
    out = tmp_path / "run.csv"
    jsonl = tmp_path / "run.jsonl"
    assert run("simulate", "--species", "sole.cfg", "--f", 1.2, "--months", 72, "--seed", 7,
               "--out", out, "--jsonl", jsonl) == 0
    rows = sim.read_csv(out)
    assert len(rows) == 73
    assert [int(r["month"]) for r in rows] == list(range(73))
    assert len(jsonl.read_text().splitlines()) == 73
    manifest = json.loads((tmp_path / "run.csv.manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["fishing_index"] == 1.2
    assert len(manifest["species_sha256"]) == 64


def test_simulate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run("simulate", "--f", 0.2, "--months", 12, "--seed", 11, "--out", out) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_rejects_bad_config(tmp_path):
    assert run("simulate", "--months", -1, "--out", tmp_path / "x.csv") == 1
    assert run("simulate", "--year", 1999, "--out", tmp_path / "x.csv") == 1
    assert not (tmp_path / "x.csv").exists()


def test_version(capsys):
    assert run("--version") == 0
    assert __version__ in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "epdta", "reach", "--model", "chain03", "--target", "dead",
                           "--horizon", "2"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "0.51"
