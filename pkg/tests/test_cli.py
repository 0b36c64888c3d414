import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import SQRT3, random_field
from lipext.cli import main, parse_grid, parse_region
from lipext.field import dump_field
from lipext.kirszbraun import LipschitzMapData, save_map


@pytest.fixture
def e1_path(tmp_path, e1):
    p = tmp_path / "e1.json"
    p.write_text(dump_field(e1))
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_grid():
    g = parse_grid("-1,1,3;0,2,2")
    assert g.shape == (6, 2)
    assert g[:2].tolist() == [[-1.0, 0.0], [-1.0, 2.0]]
    with pytest.raises(Exception):
        parse_grid("0,1", dim=1)
    with pytest.raises(Exception):
        parse_grid("0,1,3", dim=2)


def test_parse_region():
    c, r = parse_region("0.5,-1;0.25")
    assert c.tolist() == [0.5, -1.0] and r == 0.25


def test_gamma_command(e1_path, capsys):
    code, out, _ = run(["gamma", "--input", e1_path], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["gamma1"] == pytest.approx(SQRT3, abs=1e-12)
    assert rep["lip_df"] == 1.0


def test_extend_csv_sandwich(e1_path, tmp_path, capsys):
    out = tmp_path / "ext.csv"
    code, _, _ = run(["extend", "--input", e1_path, "--grid", "-2,2,11;-2,2,11", "--sign", "both",
                      "--output", str(out)], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 121
    assert all(float(r["u_plus"]) >= float(r["u_minus"]) - 1e-8 for r in rows)


def test_extend_deterministic_across_threads(e1_path, tmp_path, capsys):
    outs = []
    for threads in ("1", "3"):
        p = tmp_path / f"out{threads}.json"
        assert main(["extend", "-i", e1_path, "--grid", "-1,1,5;-1,1,5", "--threads", threads, "-o", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_kappa_override_rules(e1_path, capsys):
    code, _, err = run(["extend", "--input", e1_path, "--kappa", "1.0", "--grid", "0,0,1;0,0,1"], capsys)
    assert code == 2
    assert "1.7320508" in err
    code, out, _ = run(["extend", "--input", e1_path, "--kappa", "2.0", "--grid", "0,0,1;2,2,1"], capsys)
    assert code == 0
    assert json.loads(out)["kappa"] == 2.0


def test_missing_input_is_usage_error(tmp_path, capsys):
    code, _, err = run(["gamma", "--input", str(tmp_path / "nope.json")], capsys)
    assert code == 2
    assert json.loads(err)["error"]


def test_wells_command(e1_path, tmp_path, capsys):
    cells = tmp_path / "cells.json"
    code, out, _ = run(["wells", "-i", e1_path, "--grid", "0,0,1;0.5773502691896258,0.5773502691896258,1",
                        "--sign", "plus", "--cells-out", str(cells)], capsys)
    assert code == 0
    rec = json.loads(out)["queries"][0]
    assert abs(rec["w_plus"]) < 1e-12
    assert len(json.loads(cells.read_text())) == 3


def test_kirszbraun_command(tmp_path, capsys):
    p = tmp_path / "map.json"
    save_map(LipschitzMapData([[0.0], [2.0]], [[0.0, 1.0], [2.0, 1.0]]), p)
    code, out, _ = run(["kirszbraun", "-i", str(p), "--grid", "0,2,3"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["lipschitz"] == pytest.approx(1.0)
    assert np.allclose(rep["queries"][1]["k_plus"], [1.0, 1.0], atol=1e-6)


def test_verify_command(tmp_path, capsys):
    p = tmp_path / "f.json"
    p.write_text(dump_field(random_field(4, m=3)))
    code, out, _ = run(["verify", "-i", str(p), "--n-queries", "10"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["pass"]
    assert {"interpolation", "sandwich", "mle_augmentation", "wells_equivalence"} <= set(rep["checks"])


def test_fixture_and_amle_pass(tmp_path, capsys):
    p = tmp_path / "f.json"
    p.write_text(dump_field(random_field(2, m=4)))
    code, out, _ = run(["check-amle", "-i", str(p), "--region", "5,5;0.5", "--n-interior", "60",
                        "--n-boundary", "40"], capsys)
    assert code == 0 and json.loads(out)["pass"]


def test_fixture_command(tmp_path, capsys):
    code, out, _ = run(["fixture", "two-circles-8"], capsys)
    assert code == 0
    assert len(json.loads(out)["samples"]) == 16
    code, _, _ = run(["fixture", "bogus"], capsys)
    assert code == 2


@pytest.mark.slow
def test_two_circle_amle_failure_exit_code(tmp_path, capsys):
    p = tmp_path / "c.json"
    assert main(["fixture", "two-circles-360", "-o", str(p)]) == 0
    code, out, _ = run(["check-amle", "-i", str(p), "--region", "0,0;0.75", "--threads", "4"], capsys)
    assert code == 1
    assert json.loads(out)["ratio"] == pytest.approx(3.0, abs=0.2)


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "lipext", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("gamma", "extend", "wells", "kirszbraun", "check-amle", "verify", "fixture"):
        assert cmd in r.stdout
