import json

import pytest

from shearlab.cli import run


def report(out):
    return json.loads((out / "report.json").read_text())


def test_identities_n2(tmp_path):
    assert run(["identities", "--n", "2", "--out", str(tmp_path)]) == 0
    rep = report(tmp_path)
    assert rep["schema"] == 1 and rep["status"] == "passed"
    assert rep["result"]["transposition_audit"]["alternative_identity"]["verdict"] is True
    assert rep["result"]["transposition_audit"]["printed_identity"]["verdict"] is False


def test_runge_overlapping_is_invalid(tmp_path):
    cfg = tmp_path / "pair.json"
    cfg.write_text(json.dumps({"K1": {"center": 0, "radius": 1}, "K2": {"center": 1.5, "radius": 1}}))
    assert run(["runge", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o" / "report.json").exists()


def test_runge_tolerance_failure(tmp_path):
    assert run(["runge", "--tol", "1e-12", "--max-degree", "24", "--out", str(tmp_path)]) == 1
    rep = report(tmp_path)
    assert rep["status"] == "failed" and "best" in rep["result"]


def test_runge_piecewise_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"targets": {"h1": "z^2", "h2": "0"}, "eps": 1e-5}))
    assert run(["runge", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert report(tmp_path)["result"]["certificate"]["reached"]


def test_dense2gen_unreachable_names_stage(tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"targets": ["F(z2)"], "eps": 1e-14, "max_degree": 24}))
    assert run(["dense2gen", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert report(tmp_path)["result"]["failing_stage"] == 1


def test_dense2gen_unrepresentable_target(tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"targets": ["F(z2, z2)"]}))
    assert run(["dense2gen", "--config", str(cfg), "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("argv", [["nope"], [], ["zajac", "--grid", "x"]])
def test_bad_arguments(argv, tmp_path):
    assert run(argv + (["--out", str(tmp_path)] if argv[:1] == ["zajac"] else [])) == 2


def test_malformed_config(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert run(["zajac", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    cfg.write_text("[1, 2]")
    assert run(["zajac", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_zajac_and_escape_csv(tmp_path):
    assert run(["zajac", "--out", str(tmp_path)]) == 0
    rep = report(tmp_path)["result"]
    assert rep["escape_index"] == 3
    assert rep["checks"]["3"]["holds"] and not rep["checks"]["2"]["holds"]
    assert (tmp_path / "escape.csv").read_text().startswith("m,min_distance\n")


def test_danielewski(tmp_path):
    assert run(["danielewski", "--out", str(tmp_path)]) == 0
    rep = report(tmp_path)["result"]
    assert rep["image"] == ["1", "3", "2"] and rep["invariance"]
    assert len(rep["cocycle"]) == 10


def test_danielewski_bad_polynomial(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"p": "(z-1)^2"}))
    assert run(["danielewski", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_conjugate(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 3, "g": "z2*z3 - 1", "m": [1, 2, 3]}))
    assert run(["conjugate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = report(tmp_path)["result"]["conjugates"]
    assert [r["drift_constant"] for r in rows] == ["2/1", "4/1", "6/1"]


def test_schedule_and_birkhoff(tmp_path):
    assert run(["schedule", "--out", str(tmp_path / "s")]) == 0
    inv = report(tmp_path / "s")["result"]["invariants"]
    assert all(inv.values())
    assert run(["birkhoff", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "orbit_f.csv").read_text().startswith("m,sup_error\n")


def test_out_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SHEARLAB_OUT", str(tmp_path / "env"))
    assert run(["zajac"]) == 0
    assert (tmp_path / "env" / "report.json").exists()
