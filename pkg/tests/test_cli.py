import json

import pytest

from myolink.cli import main


@pytest.fixture()
def preset_path(tmp_path, capsys):
    path = tmp_path / "shoulder.json"
    assert main(["preset", "shoulder", "--out", str(path)]) == 0
    capsys.readouterr()
    return path


def test_preset_then_run(preset_path, tmp_path, capsys):
    out_csv = tmp_path / "trace.csv"
    code = main(["run", "--scenario", str(preset_path), "--out", str(out_csv), "--summary"])
    captured = capsys.readouterr().out
    assert code == 0
    assert out_csv.exists()
    assert "settling=" in captured
    settle = float(captured.split("settling=")[1].split(" s")[0])
    assert settle <= 5.0


def test_run_seed_override_changes_trace(preset_path, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "--scenario", str(preset_path), "--seed", "1", "--out", str(a)]) == 0
    assert main(["run", "--scenario", str(preset_path), "--seed", "2", "--out", str(b)]) == 0
    capsys.readouterr()
    assert a.read_bytes() != b.read_bytes()


def test_run_same_seed_byte_identical(preset_path, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "--scenario", str(preset_path), "--seed", "7", "--out", str(a)]) == 0
    assert main(["run", "--scenario", str(preset_path), "--seed", "7", "--out", str(b)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


def test_check_passes_on_preset(preset_path, capsys):
    code = main(["check", "--scenario", str(preset_path), "--samples", "100"])
    captured = capsys.readouterr().out
    assert code == 0
    assert "all invariants hold" in captured


def test_missing_scenario_is_usage_error(tmp_path, capsys):
    code = main(["run", "--scenario", str(tmp_path / "absent.json")])
    err = capsys.readouterr().err
    assert code == 2
    assert "not found" in err


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == 2


def test_invalid_scenario_is_validation_failure(preset_path, tmp_path, capsys):
    doc = json.loads(preset_path.read_text())
    doc["controller"]["kd"][0] = -3.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code = main(["run", "--scenario", str(bad)])
    err = capsys.readouterr().err
    assert code == 1
    assert "kd" in err


def test_divergence_exit_code(preset_path, tmp_path, capsys):
    doc = json.loads(preset_path.read_text())
    # torque-loop rate far beyond RK4 stability at this dt
    doc["controller"]["R"] = 1e-6
    doc["controller"]["gamma"] = 400.0
    wild = tmp_path / "wild.json"
    wild.write_text(json.dumps(doc))
    code = main(["run", "--scenario", str(wild), "--out", str(tmp_path / "partial.csv")])
    err = capsys.readouterr().err
    assert code == 3
    assert "diverged" in err
    assert (tmp_path / "partial.csv").exists()
