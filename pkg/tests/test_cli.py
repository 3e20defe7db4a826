import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from dnspde import __version__
from dnspde.cli import main, sha256

SMALL = """\
grid.n = 8
sim.T = 0.02
sim.lambda = 0.5
sim.paths = 2
noise.m = 3
diag.lambdas = 0.5, 0.25
diag.cauchy_lambdas = 0.5, 0.25, 0.125
diag.sweep_T = 0.02
diag.dt_ladder = 4e-3, 2e-3
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_help_lists_subcommands():
    res = invoke("--help")
    assert res.exit_code == 0
    for name in ("simulate", "sweep-lambda", "check-ito", "check-stability", "prox-test", "verify"):
        assert name in res.output


def test_version():
    assert __version__ in invoke("--version").output


def test_simulate_outputs_and_manifest(small_cfg, tmp_path):
    out = tmp_path / "run"
    res = invoke("simulate", "--config", small_cfg, "--out", out)
    assert res.exit_code == 0, res.output
    names = {p.name for p in out.iterdir()}
    assert {"trajectory_path0.csv", "trajectory_path1.csv", "paths.csv", "energy.csv", "summary.txt",
            "energy.svg", "manifest.json"} <= names
    man = json.loads((out / "manifest.json").read_text())
    assert man["subcommand"] == "simulate" and man["seed"] == 0 and man["version"] == __version__
    assert set(man["outputs"]) == names - {"manifest.json"}
    for name, digest in man["outputs"].items():
        assert sha256(out / name) == digest
    raw = (out / "paths.csv").read_bytes()
    assert b"\r" not in raw and raw.startswith(b"path,sup_norm_H,")
    summary = dict(line.split("=", 1) for line in (out / "summary.txt").read_text().splitlines())
    assert summary["n_paths"] == "2" and summary["dissipation_inequality_ok"] == "true"
    assert "m_doubling_rel_change_terminal_energy" in summary


def test_trajectory_fields(tmp_path):
    cfg = tmp_path / "f.cfg"
    cfg.write_text(SMALL + "output.fields = u, v\nplot.enabled = false\n")
    out = tmp_path / "run"
    assert invoke("simulate", "--config", cfg, "--out", out, "--paths", 1).exit_code == 0
    header = (out / "trajectory_path0.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["step", "t", "u_1"] and "v_8" in header and "du_d_1" not in header
    assert not list(out.glob("*.svg"))


def test_worker_count_does_not_change_digests(small_cfg, tmp_path):
    digests = []
    for w in (1, 2):
        out = tmp_path / f"w{w}"
        assert invoke("simulate", "--config", small_cfg, "--out", out, "--workers", w, "--quiet").exit_code == 0
        digests.append(json.loads((out / "manifest.json").read_text())["outputs"])
    assert digests[0] == digests[1]


def test_seed_override(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    invoke("simulate", "--config", small_cfg, "--out", a, "--quiet")
    invoke("simulate", "--config", small_cfg, "--out", b, "--seed", 9, "--quiet")
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    assert mb["seed"] == 9 and "noise.seed = 9" in mb["config"]
    assert ma["outputs"]["paths.csv"] != mb["outputs"]["paths.csv"]


def test_verify_round_trip_and_mismatch(small_cfg, tmp_path):
    out = tmp_path / "run"
    invoke("simulate", "--config", small_cfg, "--out", out, "--quiet")
    res = invoke("verify", out / "manifest.json", "--out", tmp_path / "again", "--workers", 2)
    assert res.exit_code == 0, res.output
    assert "digests reproduced" in res.output
    man = json.loads((out / "manifest.json").read_text())
    man["outputs"]["paths.csv"] = "0" * 64
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(man))
    res = invoke("verify", tampered, "--out", tmp_path / "third")
    assert res.exit_code == 1 and "mismatch paths.csv" in res.output


def test_sweep_lambda(small_cfg, tmp_path):
    out = tmp_path / "sweep"
    res = invoke("sweep-lambda", "--config", small_cfg, "--out", out)
    assert res.exit_code == 0, res.output
    rows = (out / "apriori.csv").read_text().splitlines()
    assert rows[0] == "lambda,dt,sup_energy,int_resolvent_rate,int_yosida_rate,sup_V_norm_p"
    assert len(rows) == 3
    assert len((out / "cauchy.csv").read_text().splitlines()) == 3
    assert (out / "apriori.svg").exists() and (out / "cauchy.svg").exists()


def test_check_ito(small_cfg, tmp_path):
    out = tmp_path / "ito"
    res = invoke("check-ito", "--config", small_cfg, "--out", out)
    assert res.exit_code == 0, res.output
    assert len((out / "ito_convergence.csv").read_text().splitlines()) == 3
    assert "control_ratio=" in (out / "summary.txt").read_text()


def test_check_stability_linear(tmp_path, config_dir):
    cfg = tmp_path / "lin.cfg"
    text = (config_dir / "linear.cfg").read_text().replace("sim.lambda = 0.0625", "sim.lambda = 0.25")
    cfg.write_text(text + "grid.n = 8\nsim.T = 0.02\nsim.paths = 2\n")
    out = tmp_path / "stab"
    res = invoke("check-stability", "--config", cfg, "--out", out)
    assert res.exit_code == 0, res.output
    assert "bounded=true" in (out / "summary.txt").read_text()


def test_check_stability_refuses_nonlinear(small_cfg, tmp_path):
    res = invoke("check-stability", "--config", small_cfg, "--out", tmp_path / "x")
    assert res.exit_code == 1
    assert "HypothesisError" in res.output


def test_prox_test(small_cfg, tmp_path):
    out = tmp_path / "prox"
    res = invoke("prox-test", "--config", small_cfg, "--out", out)
    assert res.exit_code == 0, res.output
    lines = (out / "checks.csv").read_text().splitlines()
    assert lines[0] == "suite,check,worst,tol,n,passed"
    assert all(line.endswith(",true") for line in lines[1:])


@pytest.mark.parametrize(
    "text, fragment",
    [("grid.n = 8\nbogus = 1\n", ":2: unknown key 'bogus'"), ("sim.dt = 1\n", "dt <= c_stab*lambda^2")],
)
def test_config_errors_exit_nonzero(tmp_path, text, fragment):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    res = invoke("simulate", "--config", cfg, "--out", tmp_path / "o")
    assert res.exit_code == 1
    assert "ConfigError" in res.output and fragment in res.output


def test_missing_config_file(tmp_path):
    res = invoke("simulate", "--config", tmp_path / "nope.cfg")
    assert res.exit_code == 2
