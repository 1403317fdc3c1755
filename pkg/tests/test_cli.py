import json
import subprocess
import sys

import pytest
import yaml

from hydrosym.cli import run

GAMMA3 = {"builtin": "polytropic_gas", "a": 1.0, "gamma": 3.0, "rho0": 0.0}
SOLVE = {"convention": "classical", "x": {"start": 0.0, "stop": 0.1, "num": 11},
         "t": {"start": -0.1, "stop": 0.0, "num": 11}, "guess": [0.0, 0.5], "x0": 0.0, "t0": 0.0,
         "pde_tol": 1e-4}


def _config(tmp_path, cfg, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def _run(tmp_path, task, cfg, *extra, out="out"):
    code = run([task, "--config", _config(tmp_path, cfg), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def test_check_epsilon(tmp_path, capsys):
    cfg = {"system": {"builtin": "epsilon_system", "n": 3},
           "samples": {"count": 10, "box": [[0, 1], [2, 3], [4, 5]]}}
    code, out = _run(tmp_path, "check", cfg)
    assert code == 0
    rep = json.loads((out / "check_report.json").read_text())
    assert rep["passed"] and rep["seed"] == 42
    assert json.loads(capsys.readouterr().out) == rep


def test_check_fails_on_perturbed_system(tmp_path):
    cfg = {"system": {"speeds": ["u1 + u2 + u3 - u1 + u2^2*u3", "u1 + u3", "u1 + u2"],
                      "coords": ["u1", "u2", "u3"]},
           "samples": {"count": 5, "box": [[0.9, 1.1], [1.9, 2.1], [3.9, 4.1]]}}
    code, _ = _run(tmp_path, "check", cfg)
    assert code == 1


def test_symmetry_and_series(tmp_path):
    base = {"system": {"builtin": "epsilon_system", "n": 3},
            "samples": {"count": 5, "box": [[0, 1], [2, 3], [4, 5]]}}
    code, out = _run(tmp_path, "symmetry", dict(base, w=["u1^2", "u2", "u3"]))
    assert code == 1
    rep = json.loads((out / "symmetry_report.json").read_text())
    assert not rep["passed"]
    series = {"spec": {"c": ["u1^2", "u2^2", "u3^2"], "d": ["2*u1", "2*u2", "2*u3"]},
              "seed": "v", "N": 2}
    code, out = _run(tmp_path, "series", dict(base, series=series), "--tol", "1e-8")
    assert code == 0


def test_solve_verify_plot(tmp_path):
    code, out = _run(tmp_path, "solve", {"system": GAMMA3, "w": ["s", "r - 0.5"], "solve": SOLVE})
    assert code == 0
    csv_text = (out / "solution.csv").read_text()
    assert csv_text.startswith("x,t,")
    assert json.loads((out / "solution.json").read_text())
    code, _ = _run(tmp_path, "verify", {"system": GAMMA3, "grid": str(out / "solution.csv")},
                   out="v")
    assert code == 0
    code, p = _run(tmp_path, "plot-data", {"system": GAMMA3, "w": ["s", "r - 0.5"], "solve": SOLVE},
                   out="p")
    assert code == 0
    lines = (p / "plot.csv").read_text().splitlines()
    assert lines[0] == "x,t,component,value" and len(lines) == 1 + 2 * 121


def test_solve_reports_failure_on_coarse_grid(tmp_path):
    solve = dict(SOLVE, pde_tol=1e-6)
    code, out = _run(tmp_path, "solve", {"system": GAMMA3, "w": ["s", "r - 0.5"], "solve": solve})
    assert code == 1


def test_syntax_error_exit_code(tmp_path, capsys):
    cfg = {"system": {"speeds": ["u1 + * u2", "u2"], "coords": ["u1", "u2"]},
           "samples": {"box": [[0, 1], [2, 3]]}}
    code, out = _run(tmp_path, "check", cfg)
    assert code == 2
    doc = json.loads((out / "error.json").read_text())
    assert doc["type"] == "ExprSyntaxError" and doc["offset"] == 5
    assert "ExprSyntaxError" in capsys.readouterr().err


@pytest.mark.parametrize("cfg", [
    {"system": {"builtin": "epsilon_system", "n": 3}, "bogus": 1},
    {"system": {"builtin": "epsilon_system", "n": 3}, "task": "solve"},
    {"system": {"builtin": "epsilon_system", "n": 3}},
])
def test_bad_configs(tmp_path, cfg):
    code, out = _run(tmp_path, "check", cfg)
    assert code == 2
    assert json.loads((out / "error.json").read_text())["status"] == "error"


def test_determinism(tmp_path):
    cfg = {"system": GAMMA3, "w": ["s", "r - 0.5"], "solve": SOLVE}
    _, a = _run(tmp_path, "solve", cfg, out="a")
    _, b = _run(tmp_path, "solve", cfg, "--threads", "2", out="b")
    assert (a / "solution.csv").read_bytes() == (b / "solution.csv").read_bytes()


def test_module_entry_point(tmp_path):
    path = _config(tmp_path, {"system": {"builtin": "epsilon_system", "n": 3},
                              "samples": {"count": 3, "box": [[0, 1], [2, 3], [4, 5]]}})
    proc = subprocess.run([sys.executable, "-m", "hydrosym", "check", "--config", path,
                           "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
