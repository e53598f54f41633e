import json
import math
import subprocess
import sys

import pytest

from flagmeasures.cli import RunConfig, build_parser, config_from_args, main, parse_body
from flagmeasures.euclid import DomainError
from flagmeasures.report import deterministic_part


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_measure_tau_total(capsys):
    code, out, _ = run(["measure", "--body", "cube", "--tau", "-j", "1", "--seed", "1"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {"command", "config", "version", "results", "timing"}
    assert doc["results"]["total"]["value"] == pytest.approx(6 * math.pi, abs=1e-9)
    assert doc["config"]["seed"] == 1


def test_report_is_deterministic(tmp_path, capsys):
    argv = ["measure", "--body", "simplex", "--theta", "-k", "1", "-m", "0", "-N", "2000", "--seed", "7"]
    a = run(argv, capsys)[1]
    b = run(argv, capsys)[1]
    assert deterministic_part(a) == deterministic_part(b)
    path = tmp_path / "r.json"
    assert main(argv + ["-o", str(path)]) == 0
    capsys.readouterr()
    written = deterministic_part(path.read_text())
    assert written["results"] == deterministic_part(a)["results"]
    assert written["config"]["output"] == str(path)


def test_config_roundtrip():
    ns = build_parser().parse_args(["steiner", "--body", "box:1,2,1/2", "-k", "1", "--grid", "1/2,1,3/2",
                                    "--seed", "3"])
    cfg = config_from_args(ns)
    assert cfg.grid == [0.5, 1.0, 1.5]
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


def test_parse_body_variants(tmp_path):
    assert parse_body("cube").f_vector == (8, 12, 6, 1)
    assert parse_body("simplex", 4).dim == 4
    assert parse_body("box:1,2,1/2").volume() == pytest.approx(1.0)
    assert parse_body("lift(1/8,3)").n_vertices > 0
    assert parse_body("lift:1/4").n_vertices > 0
    f = tmp_path / "tet.txt"
    f.write_text("0 0 0\n1 0 0\n0 1 0\n0 0 1\n")
    assert parse_body(str(f)).f_vector == (4, 6, 4, 1)
    with pytest.raises(DomainError):
        parse_body("dodecahedron")
    with pytest.raises(DomainError):
        parse_body("box:1,0,1")


def test_steiner_command(capsys):
    code, out, _ = run(["steiner", "--body", "simplex", "-k", "2", "-N", "20000", "--seed", "2"], capsys)
    assert code == 0
    assert json.loads(out)["command"] == "steiner"


def test_transform_check_command(capsys):
    code, out, _ = run(["transform-check", "-d", "3", "-N", "20000", "--seed", "2"], capsys)
    assert code == 0
    assert json.loads(out)["results"]


def test_counterexample_exit_codes(capsys):
    code, out, _ = run(["counterexample", "--t-grid", "1/8,1/16", "-N", "1000", "--seed", "4"], capsys)
    assert code == 0
    assert json.loads(out)["results"]["experiment"]["status"] == "success"
    code, _, _ = run(["counterexample", "--t-grid", "1/8", "-N", "1000", "--seed", "4"], capsys)
    assert code == 2
    code, out, _ = run(["counterexample", "--t-grid", "1/8,1/16", "--invariant-f", "-N", "1000"], capsys)
    assert code == 0
    assert json.loads(out)["results"]["experiment"]["status"] == "null-control passed"


def test_errors_exit_3(capsys):
    code, out, err = run(["measure", "--body", "nope"], capsys)
    assert code == 3 and "error" in err and out == ""
    code, _, err = run(["measure", "--body", "cube", "--tau", "-j", "5"], capsys)
    assert code == 3


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "flagmeasures", "measure", "--body", "cube", "--tau", "-j", "2"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0
    assert json.loads(res.stdout)["results"]["total"]["value"] == pytest.approx(6.0)
