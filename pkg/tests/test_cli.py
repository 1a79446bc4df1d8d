import csv
import json

import pytest

from mucsck.cli import main
from mucsck.io import fmt17


def run(tmp_path, command, cfg, fmt="csv", name="out"):
    cfg_path = tmp_path / "cfg.json"
    out_path = tmp_path / f"{name}.{fmt}"
    cfg_path.write_text(json.dumps(cfg))
    code = main([command, "--config", str(cfg_path), "--out", str(out_path),
                 "--format", fmt, "--quiet"])
    return code, out_path


CP1 = {"kind": "CP1", "m": 1.0}
RULED = {"kind": "Ruled", "k": 1, "genus": 0, "m": 2.0}


def test_muvol_three_critical_rows(tmp_path):
    code, out = run(tmp_path, "muvol", {"surface": CP1, "lambda": 5.0,
                                        "chi_grid": [-2.0, 0.0, 2.0]})
    assert code == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    crit = [r for r in rows if r["kind"] == "critical"]
    assert len(crit) == 3


def test_muvol_single_critical_below_threshold(tmp_path):
    code, out = run(tmp_path, "muvol", {"surface": CP1, "lambda": 3.0,
                                        "chi_grid": [-2.0, 0.0, 2.0]})
    assert code == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    crit = [r for r in rows if r["kind"] == "critical"]
    assert len(crit) == 1
    assert float(crit[0]["chi"]) == 0.0


def test_malformed_grid_exits_2(tmp_path):
    code, _ = run(tmp_path, "muvol", {"surface": CP1, "lambda": 5.0,
                                      "chi_grid": [0.0, 1.0, 0.5]})
    assert code == 2


def test_unknown_key_rejected(tmp_path):
    code, _ = run(tmp_path, "muvol", {"surface": CP1, "lambda": 5.0, "bogus": 1})
    assert code == 2


def test_solve_json_roundtrip(tmp_path):
    cfg = {"surface": RULED, "lambda": 0.0, "bracket": [-0.5, -0.1]}
    code, out = run(tmp_path, "solve", cfg, fmt="json")
    assert code == 0
    blob = json.loads(out.read_text())
    assert blob["certified"] is True
    assert blob["chi"] == pytest.approx(-0.26487887364855, abs=1e-9)
    # every emitted JSON re-parses into an equal value
    assert json.loads(json.dumps(blob)) == blob


def test_solve_profile_csv(tmp_path):
    cfg = {"surface": CP1, "lambda": 5.0, "bracket": [0.1, 5.0], "profile_points": 64}
    code, out = run(tmp_path, "solve", cfg, fmt="csv")
    assert code == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert len(rows) == 64
    assert set(rows[0]) == {"tau", "phi", "dphi", "s_mu"}
    smu = [float(r["s_mu"]) for r in rows]
    assert max(smu) - min(smu) <= 1e-8  # constant weighted curvature


def test_solve_no_root_exits_3(tmp_path):
    cfg = {"surface": CP1, "lambda": 3.0, "bracket": [0.1, 5.0]}
    code, _ = run(tmp_path, "solve", cfg, fmt="json")
    assert code == 3


def test_path_soliton_row(tmp_path):
    cfg = {"surface": RULED, "lambda_grid": [1.0], "seed_bracket": [-1.0, -0.1]}
    code, out = run(tmp_path, "path", cfg)
    assert code == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert len(rows) == 1
    assert float(rows[0]["chi"]) == pytest.approx(-0.5276195198969573, abs=1e-8)
    assert rows[0]["positive"] == "1"


def test_phase_transition_near_threshold(tmp_path):
    cfg = {"surface": CP1, "lambda_grid": [3.5, 4.5]}
    code, out = run(tmp_path, "phase", cfg, fmt="json")
    assert code == 0
    blob = json.loads(out.read_text())
    assert blob["critical_counts"] == [1, 3]
    assert abs(blob["transition_lambda"] - 4.0) <= 1e-3


def test_energy_constant_path_zero(tmp_path):
    cfg = {"surface": CP1, "lambda": 2.0, "chi": 0.5,
           "endpoint": {"kind": "fs"}, "t_grid": [0.0, 0.5, 1.0]}
    code, out = run(tmp_path, "energy", cfg)
    assert code == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert all(float(r["M_value"]) == 0.0 for r in rows)


def test_energy_solve_endpoint(tmp_path):
    cfg = {"surface": CP1, "lambda": 5.0, "chi": 1.9175326869,
           "endpoint": {"kind": "solve", "lambda": 5.0, "bracket": [0.1, 5.0]},
           "t_grid": [0.0, 0.25, 0.5, 0.75, 1.0]}
    code, out = run(tmp_path, "energy", cfg)
    assert code == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert len(rows) == 5
    second = [r["second_difference"] for r in rows]
    assert second[0] == "" and second[-1] == ""


def test_futaki_json(tmp_path):
    cfg = {"surface": RULED, "lambda": 1.0, "chi": -0.5276195199, "chi_dir": 1.0}
    code, out = run(tmp_path, "futaki", cfg, fmt="json")
    assert code == 0
    blob = json.loads(out.read_text())
    assert abs(blob["futaki_dir"]) <= 1e-8  # soliton weight is critical
    assert blob["nu_self"] > 0.0


def test_byte_identical_reruns(tmp_path):
    cfg = {"surface": CP1, "lambda": 5.0, "chi_grid": [-1.0, 0.0, 1.0]}
    _, out1 = run(tmp_path, "muvol", cfg, name="a")
    _, out2 = run(tmp_path, "muvol", cfg, name="b")
    assert out1.read_bytes() == out2.read_bytes()


def test_out_dir_override(tmp_path, monkeypatch):
    override = tmp_path / "elsewhere"
    override.mkdir()
    monkeypatch.setenv("MUCSCK_OUT_DIR", str(override))
    cfg = {"surface": CP1, "lambda": 3.0, "chi_grid": [-1.0, 1.0]}
    code, out = run(tmp_path, "muvol", cfg)
    assert code == 0
    assert not out.exists()
    assert (override / out.name).exists()


def test_fmt17_roundtrip():
    import math

    for x in (math.pi, 1.0 / 3.0, 2.0 ** -52, -1.2345678901234567e300):
        assert float(fmt17(x)) == x


def test_missing_surface_exits_2(tmp_path):
    code, _ = run(tmp_path, "muvol", {"lambda": 3.0})
    assert code == 2


def test_bad_format_exits_2(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"surface": CP1}))
    code = main(["muvol", "--config", str(cfg_path), "--out", str(tmp_path / "x.csv")])
    assert code == 0 or code == 2  # default format csv is fine
    code = main(["muvol", "--config", "/nonexistent/cfg.json", "--out", "x"])
    assert code == 2


def test_solve_json_reports_vector_coefficient(tmp_path):
    import math

    cfg = {"surface": CP1, "lambda": 5.0, "bracket": [0.1, 5.0]}
    code, out = run(tmp_path, "solve", cfg, fmt="json")
    assert code == 0
    blob = json.loads(out.read_text())
    assert blob["x"] == pytest.approx(blob["chi"] / (2.0 * math.pi), rel=1e-12)


def test_energy_negative_time_rejected(tmp_path):
    cfg = {"surface": CP1, "lambda": 1.0, "chi": 0.0,
           "endpoint": {"kind": "fs"}, "t_grid": [-0.5, 0.0, 0.5]}
    code, _ = run(tmp_path, "energy", cfg)
    assert code == 2
