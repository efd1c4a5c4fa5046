import json
import shutil
import subprocess

import pytest

from plap.cli import main

BASE = """[problem]
p = 2
mu = 1
{param}
c = const 1
h = const {h}
domain = interval 0 1
n = {n}
[run]
seed = 3
{run}
"""


def _cfg(tmp_path, name="s.cfg", param="lambda = 0", h=-1, n=129, run=""):
    path = tmp_path / name
    path.write_text(BASE.format(param=param, h=h, n=n, run=run))
    return str(path)


def _run(tmp_path, sub, cfg, out="out", *extra):
    return main([sub, "--config", cfg, "--out", str(tmp_path / out), *extra])


def test_solve_writes_stamped_outputs(tmp_path):
    cfg = _cfg(tmp_path)
    assert _run(tmp_path, "solve", cfg) == 0
    out = tmp_path / "out"
    data = json.loads((out / "solve.json").read_text())
    assert data["seed"] == 3 and len(data["config_sha256"]) == 64
    csv = (out / "solution_0.csv").read_text()
    assert f"# config_sha256={data['config_sha256']}" in csv and "# seed=3" in csv
    row = csv.splitlines()[-2]
    assert len(row.split(",")[1].replace("-", "").replace(".", "").split("e")[0]) >= 16


def test_seed_flag_overrides(tmp_path):
    cfg = _cfg(tmp_path)
    assert _run(tmp_path, "solve", cfg, "out", "--seed", "9") == 0
    assert json.loads((tmp_path / "out" / "solve.json").read_text())["seed"] == 9


def test_usage_and_config_errors_exit_1(tmp_path, capsys):
    assert main(["solve"]) == 1
    assert main(["nosuch", "--config", "x"]) == 1
    assert main(["solve", "--config", str(tmp_path / "missing.cfg")]) == 1
    bad = _cfg(tmp_path, param="lambda_range = 0 5")
    assert _run(tmp_path, "solve", bad) == 1
    assert "line 4: lambda_range requires the branch subcommand" in capsys.readouterr().err
    assert _run(tmp_path, "solve", _cfg(tmp_path), "out", "--threads", "0") == 1


def test_unsolvable_exits_2_with_lineage(tmp_path, capsys):
    cfg = _cfg(tmp_path, param="lambda = 9.8696\nk = 0.5", h=1)
    assert _run(tmp_path, "solve", cfg) == 2
    data = json.loads((tmp_path / "out" / "solve.json").read_text())
    assert data["solutions"]
    assert all(s["status"] != "converged" and s["lineage"] for s in data["solutions"])
    assert "no solution:" in capsys.readouterr().err


def test_verify_on_defaults_exits_0(tmp_path):
    cfg = _cfg(tmp_path, n=65)
    assert _run(tmp_path, "verify", cfg) == 0
    reports = json.loads((tmp_path / "out" / "verify.json").read_text())
    assert all(r["status"] != "fail" for r in reports)
    assert all("config_sha256" in r for r in reports)


def test_spectra(tmp_path):
    cfg = _cfg(tmp_path, h=1)
    assert _run(tmp_path, "spectra", cfg) == 0
    data = json.loads((tmp_path / "out" / "spectra.json").read_text())
    assert data["gamma1"]["value"] == pytest.approx(9.8696, rel=1e-3)
    assert data["m_p"]["value"] == pytest.approx(1 - 1 / data["gamma1"]["value"], rel=1e-6)
    assert (tmp_path / "out" / "eigenfunction.csv").exists()


def test_branch_outputs_and_determinism(tmp_path):
    cfg = _cfg(tmp_path, param="lambda_range = 0 9.87\nk = 0.98", h=1, n=65)
    assert _run(tmp_path, "branch", cfg, "a") == 0
    assert _run(tmp_path, "branch", cfg, "b") == 0
    a, b = tmp_path / "a", tmp_path / "b"
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert {"branch.csv", "branch.json", "branch.svg", "branch.gp"} <= set(names)
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    data = json.loads((a / "branch.json").read_text())
    assert 0 < data["fold"]["param"] < data["gamma1"]
    assert b"\r\n" not in (a / "branch.csv").read_bytes()


def test_regions_svg_layout(tmp_path):
    cfg = _cfg(tmp_path, param="", h=1, n=65, run="lambda_samples = 4")
    assert _run(tmp_path, "regions", cfg) == 0
    svg = (tmp_path / "out" / "regions.svg").read_text()
    for label in ("kbar", "ktilde1", "ktilde2", "gamma1", "k0"):
        assert f">{label}<" in svg
    assert "stroke-dasharray" in svg
    data = json.loads((tmp_path / "out" / "regions.json").read_text())
    assert all(data["checks"].values())
    assert not any(data["solvable_at_gamma1"].values())


@pytest.mark.skipif(shutil.which("plap") is None, reason="console script not installed")
def test_console_script(tmp_path):
    cfg = _cfg(tmp_path, n=33)
    proc = subprocess.run(["plap", "solve", "--config", cfg, "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
