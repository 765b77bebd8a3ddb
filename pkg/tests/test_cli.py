import json
import subprocess
import sys
from pathlib import Path

import pytest

from superhedging.cli import run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
GOLDEN = str(CONFIGS / "golden.json")


def _load(path):
    return json.loads(Path(path).read_text())


def test_cone_golden(tmp_path, capsys):
    assert run(["cone", "--config", GOLDEN, "--out", str(tmp_path)]) == 0
    out = _load(tmp_path / "cone.json")
    assert out["pair_generators"] == [["11/10", "-1/1"], ["-9/10", "1/1"]]
    assert out["dual_generators"] == [["1/1", "9/10"], ["1/1", "11/10"]]
    assert out["physical"]["cone"]["inequalities"] == [
        {"normal": ["1/1", "9/5"], "offset": "0/1"},
        {"normal": ["1/1", "11/5"], "offset": "0/1"},
    ]
    summary = json.loads(capsys.readouterr().out)
    assert summary["ok"] and summary["command"] == "cone"


def test_decompose_golden(tmp_path):
    assert run(["decompose", "--config", GOLDEN, "--out", str(tmp_path)]) == 0
    text = (tmp_path / "decompose.json").read_text()
    assert "19/2" in text and "21/2" in text


def test_superhedge_golden(tmp_path):
    assert run(["superhedge", "--config", GOLDEN, "--out", str(tmp_path)]) == 0
    out = _load(tmp_path / "superhedge.json")
    assert out["root"]["vertices"] == [["1/1", "0/1"]]
    assert out["root"]["rays"] == [["-1/1", "10/9"], ["1/1", "-10/11"]]
    assert out["dpp"] is not False
    rows = (tmp_path / "root_vertices.csv").read_text().splitlines()
    assert rows[0] == "kind,x1,x2" and rows[1] == "vertex,1.0,0.0"


@pytest.mark.parametrize("cmd", ["cone", "decompose", "tree", "superhedge", "price"])
def test_outputs_are_deterministic(tmp_path, cmd):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run([cmd, "--config", GOLDEN, "--out", str(a)]) == 0
    assert run([cmd, "--config", GOLDEN, "--out", str(b)]) == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir()) and files
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_eps_command(tmp_path):
    assert run(["eps", "--config", GOLDEN, "--out", str(tmp_path), "--eps", "0.05,0.2"]) == 0
    assert (tmp_path / "eps.json").exists() and (tmp_path / "eps.csv").exists()


def test_mc_mode(tmp_path):
    cfg = str(CONFIGS / "call2.json")
    assert run(["tree", "--config", cfg, "--out", str(tmp_path), "--mode", "mc"]) == 0
    assert (tmp_path / "paths.csv").exists()


def test_bad_inputs_exit_one(tmp_path, capsys):
    cfg = _load(GOLDEN)
    cfg["volatility"] = 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(cfg))
    assert run(["cone", "--config", str(bad), "--out", str(tmp_path)]) == 1
    err = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert err["error"] == "ConfigError"

    cfg = _load(GOLDEN)
    cfg["mu"] = [["0", "0"], ["0", "0"]]
    bad.write_text(json.dumps(cfg))
    assert run(["cone", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert run(["cone", "--config", GOLDEN, "--out", str(tmp_path), "--seed", "-1"]) == 1


def test_eps_budget_is_reported(tmp_path):
    assert run(["eps", "--config", str(CONFIGS / "call3.json"), "--out", str(tmp_path)]) == 1


def test_verify_quick_via_subprocess(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "superhedging", "verify", "--quick", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        timeout=600,
    )
    assert proc.returncode == 0, proc.stdout + proc.stderr
    report = _load(tmp_path / "verify.json")
    assert report
