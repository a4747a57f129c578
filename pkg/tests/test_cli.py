import csv
import json
import math

import numpy as np
import pytest

import oracles
from qhpcodes import cli, io
from qhpcodes.codes import classical_distance, css_params


def run(*argv):
    return cli.main([str(a) for a in argv])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_code_fixture(tmp_path):
    assert run("code", "--fixture", "qhp-80-16-4", "--out", tmp_path) == 0
    code = io.load_code(tmp_path / "qhp-80-16-4.json")
    assert css_params(code) == (80, 16, 4, 4)
    man = json.loads((tmp_path / "qhp-80-16-4.json.manifest.json").read_text())
    assert man["subcommand"] == "code" and man["outputs"]


def test_code_gallager(tmp_path):
    assert run("code", "--gallager", "3,4,8", "--seed", 1, "--min-d1", 4, "--name", "g", "--out", tmp_path) == 0
    code = io.load_code(tmp_path / "g.json")
    H1 = code.meta["H1"]
    assert H1.cols == 8 and classical_distance(H1) >= 4
    assert code.n == 64 + H1.rows**2


def test_code_toric(tmp_path):
    assert run("code", "--toric", 6, "--out", tmp_path) == 0
    assert css_params(io.load_code(tmp_path / "toric-6.json")) == (36, 2, 6, 6)
    assert run("code", "--toric", 5, "--out", tmp_path) == 3


def test_bad_arguments(tmp_path):
    assert run("decode-bench", "--code", "toy-5-1-2", "--trials", 0) == 2
    assert run("decode-bench", "--code", "toy-5-1-2", "--p-grid", "0.1:0.05:0.01") == 2
    assert run("bounds", "--D", "-1") == 2
    assert run("nonsense") == 2


def test_missing_inputs(tmp_path):
    assert run("decode-bench", "--code", tmp_path / "nope.json", "--out", tmp_path / "c.csv") == 3
    assert run("decode-bench", "--code", "not-a-fixture", "--out", tmp_path / "c.csv") == 3
    assert run("fit", "--in", tmp_path / "none.csv") == 3
    assert run("report", "--heat", tmp_path / "none.csv", "--out-dir", tmp_path) == 3


def bench(tmp_path, name, *extra):
    out = tmp_path / name
    code = run("decode-bench", "--code", "toy-5-1-2", "--p-grid", "0.05:0.15:0.05", "--trials", 40,
               "--w1", 5, "--w2", 5, "--seed", 7, "--out", out, *extra)
    return code, out


def test_decode_bench_single_row(tmp_path):
    out = tmp_path / "one.csv"
    assert run("decode-bench", "--code", "toy-5-1-2", "--p-grid", "0.1", "--trials", 1,
               "--w1", 5, "--w2", 5, "--out", out) == 0
    r = rows(out)
    assert len(r) == 1
    assert list(r[0]) == list(cli.CURVE_COLUMNS)


def test_decode_bench_deterministic(tmp_path):
    a = bench(tmp_path, "a.csv")
    b = bench(tmp_path, "b.csv")
    c = bench(tmp_path, "c.csv", "--jobs", 2)
    assert a[0] == b[0] == c[0] == 0
    data = a[1].read_bytes()
    assert data == b[1].read_bytes() == c[1].read_bytes()
    assert b"\r\n" not in data
    r = rows(a[1])
    assert [float(x["p"]) for x in r] == [0.05, 0.1, 0.15]
    for x in r:
        assert float(x["ci_lo"]) <= float(x["rate"]) <= float(x["ci_hi"])


def test_decode_bench_two_codes_crossing(tmp_path, capsys):
    out = tmp_path / "two.csv"
    assert run("decode-bench", "--code", "toy-5-1-2", "--code", "toric-6", "--p-grid", "0.05,0.3",
               "--trials", 20, "--w1", 5, "--w2", 6, "--out", out) == 0
    assert "crossing" in capsys.readouterr().out
    man = json.loads((tmp_path / "two.csv.manifest.json").read_text())
    assert "crossing" in man["extra"]


def test_timeout_dominated_exit(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "_bench_chunk", lambda code, p, start, count, opts: (count, count))
    code, _ = bench(tmp_path, "t.csv")
    assert code == 4


def test_replay_reproduces_bytes(tmp_path):
    code, out = bench(tmp_path, "orig.csv")
    assert code == 0
    again = tmp_path / "again.csv"
    assert run("replay", str(out) + ".manifest.json", "--out", again) == 0
    assert again.read_bytes() == out.read_bytes()


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\ntrials = 3\np-grid = 0.1\nw1 = 5\nw2 = 5\ncode = toy-5-1-2\n")
    out = tmp_path / "cfg.csv"
    assert run("decode-bench", "--config", cfg, "--out", out) == 0
    assert rows(out)[0]["trials"] == "3"
    assert run("decode-bench", "--config", cfg, "--trials", 5, "--out", out) == 0
    assert rows(out)[0]["trials"] == "5"
    cfg.write_text("bogus = 1\n")
    assert run("decode-bench", "--config", cfg, "--code", "toy-5-1-2") == 3


def test_mc_exact_matches_enumeration(tmp_path):
    out = tmp_path / "heat.csv"
    assert run("mc-run", "--code", "toy-5-1-2", "--side", "gx", "--p", "0", "--t-grid", "0.5,1.0,2.0",
               "--exact", "--out", out) == 0
    toy = io.toy_code()
    for r in rows(out):
        T = float(r["T"])
        m1, m2 = oracles.thermal_moments(toy.Gx.to_dense(), np.zeros(5), 1 / T)
        assert float(r["C"]) == pytest.approx((m2 - m1 * m1) / (5 * T * T), rel=1e-9)
    assert list(rows(out)[0]) == list(cli.HEAT_COLUMNS)


def test_mc_run_sampled_both_sides(tmp_path):
    out = tmp_path / "heat.csv"
    pk = tmp_path / "peaks.csv"
    args = ("mc-run", "--code", "toy-5-1-2", "--p", "0,0.1", "--t-grid", "0.5:2.5:0.5", "--sweeps", 3000,
            "--realizations", 2, "--seed", 4, "--out", out, "--peaks-out", pk)
    assert run(*args) == 0
    first = out.read_bytes()
    r = rows(out)
    assert {x["side"] for x in r} == {"gx", "hstar"}
    assert len(r) == 2 * 2 * 5
    assert len(rows(pk)) == 4
    assert run(*args[:-4], "--out", out, "--jobs", 2) == 0
    assert out.read_bytes() == first


def test_mc_run_replica_ladder(tmp_path):
    out = tmp_path / "h.csv"
    assert run("mc-run", "--code", "toy-5-1-2", "--side", "gx", "--t-grid", "1.0:3.0:1.0", "--replicas", 6,
               "--sweeps", 2000, "--out", out) == 0
    T = [float(x["T"]) for x in rows(out)]
    assert len(T) == 6 and T[0] == pytest.approx(1.0) and T[-1] == pytest.approx(3.0)


def test_bounds_json(tmp_path):
    out = tmp_path / "b.json"
    assert run("bounds", "--m", 7, "--D", "inf", "--R", 0.04, "--Delta", 12, "--out", out) == 0
    b = json.loads(out.read_text())
    for key in ("p_bnd", "T_bnd", "K_max", "T_max", "T_max_dual", "theorem1_boundary"):
        assert key in b
    assert b["p_bnd"] == pytest.approx(0.00699, abs=1e-5)
    assert b["p_percolation"] == pytest.approx(1 / 11)
    curve = b["theorem1_boundary"]
    assert curve[0][0] == 0 and curve[0][1] == pytest.approx(2 / math.log(6))
    assert max(p for p, _ in curve) == pytest.approx(b["p_bnd"])


def test_fit_command(tmp_path):
    peaks = tmp_path / "peaks.csv"
    peaks.write_text("d,T_peak,T_peak_err\n4,2.4625,0.01\n6,2.3791666666666667,0.01\n8,2.35,0.01\n")
    out = tmp_path / "fit.json"
    assert run("fit", "--in", peaks, "--model", "linear", "--out", out) == 0
    f = json.loads(out.read_text())
    assert f["Tc"] == pytest.approx(2.3125, abs=1e-9)
    assert run("fit", "--in", peaks, "--model", "parabolic", "--weighted", "--out", out) == 0
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    assert run("fit", "--in", bad) == 3


def test_report_bounds_only(tmp_path):
    assert run("report", "--out-dir", tmp_path) == 0
    b = json.loads((tmp_path / "bounds.json").read_text())
    assert b["p_bnd"] == pytest.approx(0.00699, abs=1e-5)
    r = rows(tmp_path / "phase_diagram.csv")
    assert list(r[0]) == ["source", "p", "T", "value", "error"]


def test_report_full_and_deterministic(tmp_path):
    heat = tmp_path / "heat.csv"
    assert run("mc-run", "--code", "toy-5-1-2", "--p", "0", "--t-grid", "0.5:2.5:0.25", "--exact",
               "--out", heat) == 0
    curves = tmp_path / "curves.csv"
    curves.write_text(
        "code_label,n,k,d,p,trials,failures,rate,ci_lo,ci_hi\n"
        "a,80,16,4,0.05,10,1,0.1,0,1\na,80,16,4,0.08,10,4,0.4,0,1\n"
        "b,356,36,6,0.05,10,0,0.0,0,1\nb,356,36,6,0.08,10,6,0.6,0,1\n"
    )
    bj = tmp_path / "bounds.json"
    assert run("bounds", "--out", bj) == 0
    outs = []
    for sub in ("r1", "r2"):
        d = tmp_path / sub
        assert run("report", "--heat", heat, "--curves", curves, "--bounds", bj, "--reference",
                   "--out-dir", d) == 0
        outs.append((d / "phase_diagram.csv").read_bytes())
    assert outs[0] == outs[1]
    tags = {x["source"] for x in rows(tmp_path / "r1" / "phase_diagram.csv")}
    assert tags >= {"peak_gx", "peak_hstar", "nishimori", "theorem1_lower", "theorem1_upper", "tmax",
                    "tmax_dual", "decoder_threshold", "square_lattice_ref"}


def test_report_schema_mismatch(tmp_path):
    bad = tmp_path / "heat.csv"
    bad.write_text("a,b\n1,2\n")
    assert run("report", "--heat", bad, "--out-dir", tmp_path) == 3
