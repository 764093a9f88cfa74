import json
import subprocess
import sys

import pytest

from pism.cli import main


@pytest.fixture
def objective_file(tmp_path):
    path = tmp_path / "obj.json"
    path.write_text(json.dumps({"kind": "revenue", "q": 0.5, "k": 3, "random_graph": {"n": 3, "edges": 3, "seed": 0}}))
    return path


@pytest.fixture
def config_file(tmp_path):
    cfg = {
        "objective": {"kind": "facility", "n": 4, "k": 3, "seed": 1},
        "algorithms": [{"name": "shrunken-fw", "epochs": 3}, {"name": "block-ca", "epochs": 2, "init": "shrunken-fw"}],
        "output": str(tmp_path / "bundle"),
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_run_and_compare(config_file, tmp_path, capsys):
    assert main(["run", str(config_file)]) == 0
    bundle = tmp_path / "bundle"
    assert (bundle / "manifest.json").exists()
    assert main(["run", str(bundle / "manifest.json"), "--output", str(tmp_path / "again"), "--workers", "2"]) == 0
    capsys.readouterr()
    assert main(["compare", str(bundle), str(tmp_path / "again")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("bundle") and len(out) == 5


def test_preset(tmp_path, capsys):
    assert main(["preset", "football", "--samples", "50"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["gradient"] == {"mode": "monte-carlo", "samples": 50}
    target = tmp_path / "p.json"
    assert main(["preset", "facility", "--write", str(target)]) == 0
    assert json.loads(target.read_text())["objective"]["kind"] == "facility"


def test_preset_needs_dataset(capsys):
    assert main(["preset", "infectious"]) == 2
    assert "dataset" in capsys.readouterr().err


def test_check(objective_file, capsys):
    assert main(["check", str(objective_file), "--points", "2"]) == 0
    out = capsys.readouterr().out
    assert "lattice submodular     pass" in out
    assert "extension DR @rho1" in out


def test_lmo_test(capsys):
    assert main(["lmo-test", "0.5", "0.4", "--caps", "0.3", "0.9"]) == 0
    out = capsys.readouterr().out
    assert "[0.3, 0.7]" in out and "[1.0, 0.0]" in out


def test_oracle(objective_file, capsys):
    assert main(["oracle", str(objective_file), "--sweeps", "5"]) == 0
    lines = dict(line.rsplit(None, 1) for line in capsys.readouterr().out.splitlines())
    assert float(lines["gap log Z - ELBO"]) >= -1e-9


def test_stage_tagged_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 2
    assert "[config]" in capsys.readouterr().err
    missing = tmp_path / "m.json"
    missing.write_text(json.dumps({"kind": "revenue", "q": 0.5, "k": 3, "dataset": "nope.txt"}))
    assert main(["check", str(missing)]) == 2
    assert "[objective]" in capsys.readouterr().err
    assert main(["compare", str(tmp_path / "nothing")]) == 2
    assert "[compare]" in capsys.readouterr().err


def test_console_script_module():
    proc = subprocess.run([sys.executable, "-m", "pism.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
