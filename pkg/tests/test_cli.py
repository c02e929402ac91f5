import json
import shutil
import subprocess
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from calderon_cavities.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from calderon_cavities.forward import read_matrix_csv
from calderon_cavities.moments import read_moments_csv
from calderon_cavities.prony import read_atoms_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(*argv):
    return main([str(a) for a in argv])


def test_pipeline_command(tmp_path, capsys):
    assert run("pipeline", CONFIGS / "ellipse.json", "--out", tmp_path, "--nodes", 128) == EXIT_OK
    out = capsys.readouterr().out
    assert "n=  6" in out and "suggested n" in out
    for n in (1, 3, 6):
        assert (tmp_path / f"atoms_n{n}.csv").exists()
        ET.parse(tmp_path / f"reconstruction_n{n}.svg")
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["conventions"]["nodes_per_curve"] == 128


def test_overrides(tmp_path):
    assert run("pipeline", CONFIGS / "single_disk.json", "--out", tmp_path, "--n", 1, 2,
               "--mass-convention", "2pi", "--extra", 0, "--nodes", 64) == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert [r["n_atoms"] for r in report["reconstructions"]] == [1, 2]
    assert report["conventions"]["mass_convention"] == "2pi"
    assert len(report["moments"]) == 4


def test_forward_command(tmp_path):
    assert run("forward", CONFIGS / "single_disk.json", "--out", tmp_path, "--nodes", 64) == EXIT_OK
    R, meta = read_matrix_csv(tmp_path / "R.csv")
    nodes, _ = read_matrix_csv(tmp_path / "outer_nodes.csv")
    assert R.shape == (64, 64) and nodes.shape == (64, 2) and meta["nodes"] == "64"
    lam0, _ = read_matrix_csv(tmp_path / "lambda_0.csv")
    assert np.abs(lam0 @ np.ones(64)).max() < 1e-9


def test_moments_then_reconstruct(tmp_path, capsys):
    assert run("moments", CONFIGS / "two_disks.json", "--out", tmp_path, "--n", 4) == EXIT_OK
    tau = read_moments_csv(tmp_path / "moments.csv")
    assert len(tau) == 10
    out = tmp_path / "rec"
    assert run("reconstruct", tmp_path / "moments.csv", "--n", 4, "--out", out,
               "--config", CONFIGS / "two_disks.json") == EXIT_OK
    measure, disks = read_atoms_csv(out / "atoms.csv")
    assert len(measure) == 4 and (out / "reconstruction.svg").exists()
    assert "held-out residual" in capsys.readouterr().out
    # Too few moments for the requested n.
    assert run("reconstruct", tmp_path / "moments.csv", "--n", 6, "--out", out) == EXIT_CONFIG


def test_oracle_commands(tmp_path, capsys):
    assert run("oracle", CONFIGS / "two_disks.json", "--out", tmp_path / "two") == EXIT_OK
    summary = json.loads((tmp_path / "two" / "oracle_report.json").read_text())
    assert summary["verdict"] == "PASS" and summary["oracle"] == "two_disk"
    assert (tmp_path / "two" / "two_disk_series.csv").exists()
    rows = (tmp_path / "two" / "oracle_comparison.csv").read_text().splitlines()
    assert len(rows) == 10
    assert run("oracle", CONFIGS / "ellipse.json", "--out", tmp_path / "ell") == EXIT_OK
    assert json.loads((tmp_path / "ell" / "oracle_report.json").read_text())["verdict"] == "PASS"
    capsys.readouterr()
    assert run("oracle", CONFIGS / "clover.json", "--out", tmp_path / "clover") == EXIT_CONFIG
    assert "conjecture" in capsys.readouterr().err


def test_render_command(tmp_path):
    svg = tmp_path / "scene.svg"
    assert run("render", CONFIGS / "multi.json", "--svg", svg) == EXIT_OK
    root = ET.parse(svg).getroot()
    assert len(root.findall("{http://www.w3.org/2000/svg}polygon")) == 4


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    data = json.loads((CONFIGS / "single_disk.json").read_text())
    data["unknown"] = 1
    bad.write_text(json.dumps(data))
    assert run("pipeline", bad, "--out", tmp_path) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert run("pipeline", tmp_path / "missing.json") == EXIT_CONFIG
    assert run("pipeline", CONFIGS / "single_disk.json", "--nodes", 63, "--out", tmp_path) == EXIT_CONFIG
    assert run("pipeline", CONFIGS / "single_disk.json", "--n", 40, "--out", tmp_path) == EXIT_CONFIG


def test_invalid_geometry_is_a_config_error(tmp_path, capsys):
    data = json.loads((CONFIGS / "single_disk.json").read_text())
    data["cavities"].append({"kind": "circle", "center": [0.17, 0.1], "radius": 0.08})
    path = tmp_path / "overlap.json"
    path.write_text(json.dumps(data))
    assert run("pipeline", path, "--out", tmp_path) == EXIT_CONFIG
    assert "intersect" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    from calderon_cavities import cli
    from calderon_cavities.errors import SingularSystem

    def fail(*args, **kwargs):
        raise SingularSystem("Id + R is numerically singular")

    monkeypatch.setattr(cli, "compute_moments", fail)
    assert run("moments", CONFIGS / "single_disk.json", "--out", tmp_path) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_determinism(tmp_path):
    cfg = CONFIGS / "rectangle.json"
    for d in ("a", "b"):
        assert run("pipeline", cfg, "--out", tmp_path / d, "--noise-level", 1e-6, "--seed", 3,
                   "--nodes", 128) == EXIT_OK
    for f in sorted((tmp_path / "a").glob("*.csv")):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("CAVITY_THREADS", "1")
    assert run("moments", CONFIGS / "single_disk.json", "--out", tmp_path, "--nodes", 64) == EXIT_OK


def test_console_script(tmp_path):
    exe = shutil.which("cavities")
    cmd = [exe] if exe else [sys.executable, "-m", "calderon_cavities.cli"]
    proc = subprocess.run(cmd + ["--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
    proc = subprocess.run(cmd + ["render", str(CONFIGS / "single_disk.json"), "--svg",
                                 str(tmp_path / "x.svg")], capture_output=True, text=True)
    assert proc.returncode == 0 and (tmp_path / "x.svg").exists()
