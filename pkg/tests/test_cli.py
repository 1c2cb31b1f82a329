import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from crn_planar.cli import EXIT_INTEGRATION, EXIT_NO_EQ, EXIT_PARSE, main

NETWORKS = Path(__file__).resolve().parents[1] / "networks"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def analyze(capsys, *argv):
    code, out, err = run(capsys, "analyze", *argv)
    assert code == 0, err
    return json.loads(out)


def rows(text):
    return list(csv.reader(io.StringIO(text)))


# --------------------------------------------------------------------------
# analyze

def test_analyze_zigzag(capsys):
    rep = analyze(capsys, NETWORKS / "zigzag.crn", "--kappa", "1.0")
    assert rep["structural"]["deficiency"] == 1
    assert rep["equilibrium"]["x"] == pytest.approx(1) and rep["equilibrium"]["y"] == pytest.approx(1)
    assert rep["local"]["trace"] == pytest.approx(-4)
    assert rep["local"]["classification"] == "stable"


def test_analyze_quadrangle_stable(capsys):
    rep = analyze(capsys, NETWORKS / "quadrangle31.crn")
    assert rep["structural"]["weakly_reversible"] is True
    assert rep["local"]["trace"] < 0 and rep["local"]["classification"] == "stable"
    assert rep["global"]["dulac"]["found"] is False


def test_analyze_chain_at_critical(capsys):
    rep = analyze(capsys, NETWORKS / "chain41.crn", "--at-critical")
    L = rep["scaled"]["focal_values"]
    assert abs(L[0]) < 1e-9 and abs(L[1]) < 1e-9 and L[2] < 0
    assert rep["scaled"]["classification"] == "weak-focus" and rep["scaled"]["focal_order"] == 3


def test_analyze_family_flag_and_depth(capsys):
    rep = analyze(capsys, "--family", "zigzag", "--param", "kappa=1.8", "--focal-depth", "1")
    assert rep["family"] == "zigzag"
    assert rep["local"]["focal_values"][0] == pytest.approx(5 * math.pi / 13, rel=1e-9)


def test_analyze_global_block(capsys):
    rep = analyze(capsys, NETWORKS / "chain42.crn")
    assert rep["global"]["reversible"] is True
    rep = analyze(capsys, NETWORKS / "unit_square.crn")
    assert rep["global"]["dulac"]["found"] is True
    assert rep["global"]["dulac"]["alpha"] == 0.5


def test_analyze_is_deterministic(capsys):
    _, a, _ = run(capsys, "analyze", NETWORKS / "three51.crn")
    _, b, _ = run(capsys, "analyze", NETWORKS / "three51.crn")
    assert a == b


def test_exit_codes(capsys, tmp_path):
    bad = tmp_path / "bad.crn"
    bad.write_text("0 0 -> 1 @ 1\n")
    code, out, err = run(capsys, "analyze", bad)
    assert code == EXIT_PARSE and out == "" and "line 1" in err
    code, out, _ = run(capsys, "analyze", NETWORKS / "zigzag.crn", "--kappa", "2.5")
    assert code == EXIT_NO_EQ and out == ""
    code, out, _ = run(capsys, "analyze", tmp_path / "missing.crn")
    assert code == EXIT_PARSE
    code, _, _ = run(capsys, "cycles", NETWORKS / "zigzag.crn", "--kappa", "2")
    assert code == EXIT_NO_EQ
    code, _, _ = run(capsys, "analyze", NETWORKS / "quadrangle31.crn", "--kappa", "1,x")
    assert code == EXIT_PARSE


# --------------------------------------------------------------------------
# simulate

def test_simulate_zigzag_to_axis(capsys):
    code, out, _ = run(capsys, "simulate", NETWORKS / "zigzag.crn", "--kappa", "1.95",
                       "--x0", 1, "--y0", 1.1, "--t", 2000)
    assert code == 0
    table = rows(out)
    assert table[0] == ["t", "x", "y"]
    assert float(table[-1][2]) < 1e-3


def test_simulate_center_closes(capsys):
    # one period of the closed orbit through (1.2, 0.9)
    code, out, _ = run(capsys, "simulate", NETWORKS / "chain42.crn", "--x0", 1.2, "--y0", 0.9,
                       "--t", 4.692773544307934, "--rtol", 1e-11, "--atol", 1e-13)
    assert code == 0
    x, y = map(float, rows(out)[-1][1:])
    assert math.hypot(x - 1.2, y - 0.9) < 1e-5


def test_simulate_zero_time_and_file(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", NETWORKS / "zigzag.crn", "--x0", 1.5, "--y0", 0.5, "--t", 0)
    assert code == 0 and rows(out) == [["t", "x", "y"], ["0", "1.5", "0.5"]]
    dest = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "simulate", NETWORKS / "zigzag.crn", "--x0", 1.5, "--y0", 0.5,
                       "--t", 1, "--out", dest)
    assert code == 0 and out == "" and dest.read_text().startswith("t,x,y\n")


# --------------------------------------------------------------------------
# portrait

def test_portrait_center(capsys, tmp_path):
    dest = tmp_path / "center.svg"
    code, _, err = run(capsys, "portrait", NETWORKS / "chain42.crn", "--scaled", "--xrange", "0.6:1.4",
                       "--yrange", "0.6:1.4", "--grid", 3, "--t", 6, "--out", dest)
    assert code == 0, err
    text = dest.read_text()
    assert text.startswith("<svg") or text.startswith("<?xml")
    assert text.count("<path") + text.count("<polyline") >= 9
    assert "<circle" in text


def test_portrait_empty_grid(capsys, tmp_path):
    dest = tmp_path / "empty.svg"
    code, _, _ = run(capsys, "portrait", NETWORKS / "quadrangle31.crn", "--kappa", "60,1,1,1",
                     "--xrange", "0.1:10", "--yrange", "0.1:10", "--log", "--grid", 0, "--out", dest)
    assert code == 0
    text = dest.read_text()
    assert "<circle" in text and "<polyline" not in text
    again = tmp_path / "again.svg"
    run(capsys, "portrait", NETWORKS / "quadrangle31.crn", "--kappa", "60,1,1,1",
        "--xrange", "0.1:10", "--yrange", "0.1:10", "--log", "--grid", 0, "--out", again)
    assert again.read_text() == text


def test_portrait_bad_range(capsys, tmp_path):
    code, _, _ = run(capsys, "portrait", NETWORKS / "zigzag.crn", "--xrange", "1:0.5",
                     "--yrange", "0.1:2", "--out", tmp_path / "x.svg")
    assert code == EXIT_PARSE


# --------------------------------------------------------------------------
# scan

def test_scan_quadrangle_l1_bracket(capsys):
    code, out, _ = run(capsys, "scan", "--family", "quadrangle32", "--param", "K=0.01:0.2:200",
                       "--track", "trace,L1")
    assert code == 0
    table = rows(out)
    assert table[0] == ["K", "trace", "L1", "sign_change"]
    flagged = [r for r in table[1:] if r[-1] == "1"]
    assert len(flagged) == 1
    i = table.index(flagged[0])
    assert float(table[i][0]) < 0.06862 < float(table[i + 1][0])


def test_scan_single_cell_and_errors(capsys):
    code, out, _ = run(capsys, "scan", "--family", "zigzag", "--param", "kappa=1.8:1.8:1", "--track", "trace")
    assert code == 0 and len(rows(out)) == 2
    code, _, err = run(capsys, "scan", "--family", "zigzag", "--param", "nope=0:1:3")
    assert code == EXIT_PARSE and "nope" in err
    code, _, _ = run(capsys, "scan", "--family", "zigzag", "--param", "kappa=0:1:3", "--track", "L9")
    assert code == EXIT_PARSE


def test_scan_two_axes_deterministic(capsys, monkeypatch):
    argv = ("scan", "--family", "three51", "--param", "a=0.9:1.1:3", "--param", "d=3:3.5:3",
            "--track", "L1,L2")
    monkeypatch.setenv("CRN_PLANAR_THREADS", "1")
    _, one, _ = run(capsys, *argv)
    monkeypatch.setenv("CRN_PLANAR_THREADS", "3")
    _, three, _ = run(capsys, *argv)
    assert one == three
    assert len(rows(one)) == 10


def test_scan_l2_curve_through_four_cycle_points(capsys):
    # L2 changes sign across d at a = 1 around 165/49
    code, out, _ = run(capsys, "scan", "--family", "three51", "--fix", "a=1",
                       "--param", f"d={165 / 49 - 0.05}:{165 / 49 + 0.05}:3", "--track", "L2")
    assert code == 0
    L2 = [float(r[1]) for r in rows(out)[1:]]
    assert L2[0] * L2[2] < 0 and abs(L2[1]) < 1e-9


# --------------------------------------------------------------------------
# cycles

def test_cycles_quadrangle(capsys):
    code, out, _ = run(capsys, "cycles", NETWORKS / "quadrangle31.crn", "--kappa", "60,1,1,1",
                       "--grid", 60)
    assert code == 0
    rep = json.loads(out)
    assert [fp["stability"] for fp in rep["fixed_points"]] == ["stable"]


def test_cycles_center(capsys):
    code, out, _ = run(capsys, "cycles", NETWORKS / "chain42.crn", "--scaled",
                       "--section-range", "0.001:0.15", "--grid", 30)
    assert code == 0
    rep = json.loads(out)
    assert rep["fixed_points"] == [] and rep["max_abs_displacement"] < 1e-6


# --------------------------------------------------------------------------
# entry point

def test_console_module_runs():
    res = subprocess.run([sys.executable, "-m", "crn_planar.cli", "analyze", str(NETWORKS / "zigzag.crn")],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["equilibrium"]["exists"] is True
    res = subprocess.run([sys.executable, "-m", "crn_planar.cli", "analyze", "--family", "zigzag",
                          "--param", "kappa=3"], capture_output=True, text=True, check=False)
    assert res.returncode == EXIT_NO_EQ and res.stdout == ""


def test_simulate_bad_start(capsys):
    code, out, _ = run(capsys, "simulate", NETWORKS / "zigzag.crn", "--x0", 0, "--y0", 1)
    assert code == EXIT_INTEGRATION and out == ""
