"""Command-line interface: exit codes, artifacts, reproducibility."""

import json
import os

import numpy as np
import pytest

from z2vqe import cli


def _run(argv):
    return cli.main(argv)


def test_lattice_info(tmp_path, capsys):
    assert _run(["lattice-info", "--d", "3", "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "lattice_d3.json").read_text())
    assert data["n_links"] == 13 and data["n_plaquettes"] == 6
    assert "13 links" in capsys.readouterr().out


def test_ed_reference_point(tmp_path):
    assert _run(["ed", "--d", "2", "--lam", "0", "--out",
                 str(tmp_path)]) == 0
    rows = (tmp_path / "ed_d2.csv").read_text().strip().splitlines()
    lam, energy, m, _ = rows[1].split(",")
    assert float(lam) == 0.0
    assert float(energy) == pytest.approx(-5.0, abs=1e-9)
    assert float(m) == pytest.approx(1.0, abs=1e-9)
    manifest = json.loads((tmp_path / "ed_manifest.json").read_text())
    assert manifest["subcommand"] == "ed"
    assert "numpy" in manifest["versions"]


def test_ed_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert _run(["ed", "--d", "2", "--lam", "0:2:5", "--out",
                     str(out)]) == 0
    assert (a / "ed_d2.csv").read_bytes() == (b / "ed_d2.csv").read_bytes()


def test_ed_thread_count_invariance(tmp_path):
    a, b = tmp_path / "t1", tmp_path / "t4"
    _run(["ed", "--d", "2", "--lam", "0:3:7", "--threads", "1",
          "--out", str(a)])
    _run(["ed", "--d", "2", "--lam", "0:3:7", "--threads", "4",
          "--out", str(b)])
    assert (a / "ed_d2.csv").read_bytes() == (b / "ed_d2.csv").read_bytes()


def test_vqe_sweep_and_observables(tmp_path, capsys):
    assert _run(["vqe-sweep", "--d", "2", "--ansatz", "dva", "--layers",
                 "2", "--lam", "0:4:4", "--reference", "--out",
                 str(tmp_path)]) == 0
    out = capsys.readouterr().out
    err = float(out.split("max relative energy error:")[1].split()[0])
    assert err <= 1e-8
    sweep_csv = tmp_path / "sweep_dva_d2_l2.csv"
    assert _run(["observables", "--d", "2", "--layers", "2", "--params",
                 str(sweep_csv), "--out", str(tmp_path)]) == 0
    data = np.loadtxt(tmp_path / "observables_d2.csv", delimiter=",",
                      skiprows=1)
    assert data.shape == (4, 4)
    assert data[0, 2] == pytest.approx(1.0, abs=1e-6)  # M = 1 at lam = 0


def test_circuit_emit(tmp_path, capsys):
    assert _run(["circuit-emit", "--d", "3", "--layers", "2", "--params",
                 "[0.4, 0.3, 0.2, 0.1]", "--out", str(tmp_path)]) == 0
    circ = json.loads(
        (tmp_path / "circuit_d3_l2.json").read_text())
    assert circ["depth"] == 22 and circ["cnot_count"] == 48
    assert "depth=22" in capsys.readouterr().out


def test_noisy_run(tmp_path):
    assert _run(["noisy-run", "--d", "2", "--lam", "1.0", "--params",
                 '{"1": [0.3, 0.2]}', "--p", "0,0.001", "--trajectories",
                 "40", "--shots", "20", "--out", str(tmp_path)]) == 0
    data = np.loadtxt(tmp_path / "noisy.csv", delimiter=",", skiprows=1)
    assert data.shape == (2, 7)
    assert data[0, 4] == 0.0  # p = 0: nothing rejected


def test_fss_fit(tmp_path):
    # synthetic curves written as observables CSVs
    lc, nu = 3.1, 0.63
    lambdas = np.linspace(1.0, 6.0, 300)
    files = []
    for d in (2, 3, 4, 5):
        x = (lambdas - lc) * d ** (1 / nu)
        m = 0.5 * (1 + np.tanh(-x / 2))
        path = tmp_path / f"curve_d{d}.csv"
        with open(path, "w") as fh:
            fh.write("lambda,magnetization\n")
            for l, v in zip(lambdas, m):
                fh.write(f"{l},{v}\n")
        files.append(str(path))
    assert _run(["fss-fit", "--curves", *files, "--out",
                 str(tmp_path)]) == 0
    fss = json.loads((tmp_path / "fss.json").read_text())
    assert fss["lambda_c"] == pytest.approx(lc, abs=0.05)
    assert fss["nu"] == pytest.approx(nu, abs=0.05)


def test_exit_code_on_bad_config(tmp_path):
    assert _run(["vqe-sweep", "--d", "2", "--preset", "nope", "--out",
                 str(tmp_path)]) == 2
    assert _run(["ed", "--d", "2", "--lam", "not-a-grid", "--out",
                 str(tmp_path)]) == 2
    assert _run(["unknown-subcommand"]) == 2


def test_config_file_defaults_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("d = 2\nlambda = 0:1:3\n")
    assert _run(["ed", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "ed_d2.csv").exists()
    # explicit flags override config values
    assert _run(["ed", "--config", str(cfg), "--d", "3", "--lambda", "0",
                 "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "ed_d3.csv").read_text().strip().splitlines()
    assert len(rows) == 2
    assert float(rows[1].split(",")[1]) == pytest.approx(-13.0, abs=1e-9)
    assert _run(["ed", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_env_var_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("Z2VQE_OUT", str(tmp_path / "envout"))
    assert _run(["lattice-info", "--d", "2"]) == 0
    assert (tmp_path / "envout" / "lattice_d2.json").exists()
