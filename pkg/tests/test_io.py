import dataclasses
import json
import math

import numpy as np
import pytest

from myolink import ScenarioFormatError
from myolink.presets import shoulder_scenario
from myolink.scenario_io import (
    load_scenario,
    read_trace,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    scenarios_identical,
    trace_header,
    write_trace,
)
from myolink.simulate import simulate


@pytest.fixture()
def preset_path(tmp_path):
    path = tmp_path / "shoulder.json"
    save_scenario(shoulder_scenario(), path)
    return path


def test_preset_loads_with_expected_sizes(preset_path):
    scn = load_scenario(preset_path)
    assert scn.model.dof == 3
    assert len(scn.muscles) == 8
    np.testing.assert_array_equal(scn.q_target_deg, [50.0, 27.0, -45.0])


def test_bundled_data_file_matches_presets():
    from importlib import resources

    with resources.files("myolink").joinpath("data/shoulder.json").open() as fh:
        doc = json.load(fh)
    assert scenarios_identical(scenario_from_dict(doc), shoulder_scenario())


def test_roundtrip_is_identity(preset_path, tmp_path):
    s1 = load_scenario(preset_path)
    second = tmp_path / "second.json"
    save_scenario(s1, second)
    s2 = load_scenario(second)
    assert scenarios_identical(s1, s2)
    # byte-level stability of the serialized form
    assert preset_path.read_bytes() == second.read_bytes()


def test_roundtrip_with_awkward_angles(tmp_path):
    scn = shoulder_scenario()
    doc = scenario_to_dict(scn)
    doc["model"]["dh_rows"][0]["alpha_deg"] = -33.3333333
    doc["model"]["dh_rows"][1]["theta_deg"] = 17.77777177
    doc["model"]["base_rpy_deg"] = [0.1234567890123, -81.9191919, 54.00000001]
    path = tmp_path / "awkward.json"
    path.write_text(json.dumps(doc))
    s1 = load_scenario(path)
    out = tmp_path / "awkward2.json"
    save_scenario(s1, out)
    s2 = load_scenario(out)
    assert scenarios_identical(s1, s2)


def test_negative_kp_rejected_with_field(preset_path, tmp_path):
    doc = json.loads(preset_path.read_text())
    doc["controller"]["kp"][1] = -5.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    with pytest.raises(ScenarioFormatError, match=r"controller\.kp"):
        load_scenario(bad)


def test_unknown_key_rejected(preset_path, tmp_path):
    doc = json.loads(preset_path.read_text())
    doc["controller"]["kq"] = [1, 2, 3]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    with pytest.raises(ScenarioFormatError, match="unknown key.*kq"):
        load_scenario(bad)


def test_version_mandatory(preset_path, tmp_path):
    doc = json.loads(preset_path.read_text())
    del doc["version"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    with pytest.raises(ScenarioFormatError, match="version"):
        load_scenario(bad)


def test_parse_error_reports_line(tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text('{\n  "version": 1,\n  "oops"\n}')
    with pytest.raises(ScenarioFormatError, match="line 4, column 1"):
        load_scenario(bad)


def test_matrix_like_forms(preset_path, tmp_path):
    doc = json.loads(preset_path.read_text())
    doc["controller"]["Q"] = 10.0
    doc["controller"]["R"] = [0.1, 0.1, 0.1]
    path = tmp_path / "forms.json"
    path.write_text(json.dumps(doc))
    scn = load_scenario(path)
    np.testing.assert_array_equal(scn.controller.Q, 10.0 * np.eye(6))
    np.testing.assert_array_equal(scn.controller.R, 0.1 * np.diag(np.ones(3)))


def test_deg_rad_boundary_is_exact(preset_path):
    scn = load_scenario(preset_path)
    assert scn.model.dh_rows[0].alpha == math.radians(-90.0)
    assert scn.model.dh_rows[2].theta_offset == math.radians(90.0)


# ---------------------------------------------------------------------------
# CSV traces


def _empty_trace(n=3, m=8):
    from myolink.simulate import Trace

    def z(*shape):
        return np.empty(shape)

    return Trace(
        t=z(0), q=z(0, n), q_des=z(0, n), q_err=z(0, n), qd=z(0, n),
        S=z(0, m), L=z(0, m), F=z(0, m), u=z(0, m), tau=z(0, n),
        psi=z(0, n), psi_rate=z(0, n), w=z(0, n), zdot=z(0, n),
        V=z(0), V_dot=z(0), dt=1e-3,
    )


def test_empty_trace_writes_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    write_trace(_empty_trace(), path)
    content = path.read_text().splitlines()
    assert content == [trace_header(3, 8)]


def test_row_count_and_header(tmp_path):
    scn = dataclasses.replace(shoulder_scenario(), t_end=0.05)
    trace = simulate(scn)
    path = tmp_path / "trace.csv"
    write_trace(trace, path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[:5] == ["t", "q1", "q2", "q3", "qdes1"]
    assert lines[0].split(",")[-2:] == ["V", "Vdot"]
    assert len(lines) == 1 + int(0.05 / scn.dt) + 1


def test_csv_roundtrip_lossless(tmp_path):
    scn = dataclasses.replace(shoulder_scenario(), t_end=0.1)
    trace = simulate(scn)
    path = tmp_path / "trace.csv"
    write_trace(trace, path)
    data = read_trace(path)
    np.testing.assert_array_equal(data["V"], trace.V)
    np.testing.assert_array_equal(data["q1"], trace.q[:, 0])
    np.testing.assert_array_equal(data["u5"], trace.u[:, 4])
    assert np.max(np.abs(data["Vdot"] - trace.V_dot)) == 0.0


def test_csv_deterministic_bytes(tmp_path):
    scn = dataclasses.replace(shoulder_scenario(), t_end=0.1)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace(simulate(scn), p1)
    write_trace(simulate(scn), p2)
    assert p1.read_bytes() == p2.read_bytes()
