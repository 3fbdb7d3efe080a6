import csv
import io
import json
import subprocess
import sys

import pytest

from simdegree import asymptotics as asy
from simdegree.cli import main
from simdegree.exact_finite import read_profile_csv
from simdegree.model_gb import Instance


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def footer(text):
    # footer lines start with a letter; data rows start with S
    return dict(l.split("=", 1) for l in text.splitlines() if "=" in l and l[:1].isalpha())


# --- gen ---------------------------------------------------------------------

def test_gen_json(tmp_path, capsys):
    path = tmp_path / "inst.json"
    code, out, _ = run(capsys, "gen", "--n", 20, "--d", 2, "--k", 5, "--q", 1, "--t", 432, "--seed", 7, "-o", path)
    assert code == 0
    inst = Instance.from_json(path.read_text())
    assert len(inst.constraints) == 432 and inst.seed == 7
    assert "432 constraints" in out
    # deterministic given the seed
    path2 = tmp_path / "again.json"
    run(capsys, "gen", "--n", 20, "--d", 2, "--k", 5, "--q", 1, "--t", 432, "--seed", 7, "-o", path2)
    assert path.read_text() == path2.read_text()


def test_gen_dimacs(tmp_path, capsys):
    cnf = tmp_path / "inst.cnf"
    code, _, _ = run(capsys, "gen", "--ksat", "--n", 10, "--k", 3, "--t", 42, "--seed", 1, "--dimacs", cnf)
    assert code == 0
    lines = cnf.read_text().splitlines()
    assert lines[0] == "p cnf 10 42"
    assert len(lines) == 43 and all(l.endswith(" 0") for l in lines[1:])


def test_gen_param_errors(capsys):
    code, _, err = run(capsys, "gen", "--n", 10, "--d", 2, "--k", 3, "--q", 4, "--t", 5, "--seed", 1)
    assert code == 2 and "d^(k-1)" in err
    code, _, err = run(capsys, "gen", "--n", 10, "--d", 2, "--k", 3, "--q", 1, "--t", 5)
    assert code == 2 and "--seed" in err
    code, _, _ = run(capsys, "gen", "--n", 10, "--d", 3, "--k", 3, "--q", 1, "--t", 5, "--seed", 1, "--dimacs", "-")
    assert code == 2


# --- analyze ------------------------------------------------------------------

@pytest.mark.parametrize("k,target", [(6, 42.9)])
def test_analyze_six(capsys, k, target):
    code, out, _ = run(capsys, "analyze", "--d", 2, "--q", 1, "--k", k)
    assert code == 0
    assert json.loads(out)["r_cr"] == pytest.approx(target, abs=0.1)


def test_analyze_five_matches_library(capsys):
    code, out, _ = run(capsys, "analyze", "--d", 2, "--q", 1, "--k", 5)
    assert code == 0
    doc = json.loads(out)
    assert doc["r_cr"] == pytest.approx(asy.phase_portrait(5, 1, 2).r_cr, rel=1e-11)
    assert set(doc) == {"k", "q", "d", "s01", "s02", "s03", "r_at_s01", "r_at_s03", "r_cr"}


def test_analyze_no_transition(capsys):
    code, _, err = run(capsys, "analyze", "--d", 2, "--q", 1, "--k", 4)
    assert code == 3
    assert "r'(s02)" in err


def test_analyze_curve(tmp_path, capsys):
    curve = tmp_path / "curve.csv"
    code, out, _ = run(capsys, "analyze", "--k", 5, "--q", 1, "--d", 2, "-o", tmp_path / "p.json",
                       "--curve", curve, "--r-min", 5, "--r-max", 40, "--r-steps", 36)
    assert code == 0 and out.startswith("r_cr=")
    rows = list(csv.DictReader(io.StringIO(curve.read_text())))
    assert len(rows) == 38  # 36 grid points plus two threshold rows
    thr = [r for r in rows if r["branch"] == "threshold"]
    assert len(thr) == 2 and float(thr[0]["s_av_inf"]) < float(thr[1]["s_av_inf"])
    p = asy.phase_portrait(5, 1, 2)
    for row in rows:
        r, s = float(row["r"]), float(row["s_av_inf"])
        assert s + float(row["d_av_inf"]) == pytest.approx(1.0, abs=1e-11)
        if row["branch"] != "threshold":
            assert s == pytest.approx(asy.s_av_infinity(p, r).s, rel=1e-11)
    # no threshold rows when disabled
    run(capsys, "analyze", "--k", 5, "--q", 1, "--d", 2, "-o", tmp_path / "p.json", "--curve", curve,
        "--r-min", 5, "--r-max", 40, "--r-steps", 36, "--no-threshold-rows")
    assert "threshold" not in curve.read_text()


def test_analyze_bad_grid(capsys):
    code, _, _ = run(capsys, "analyze", "--k", 5, "--q", 1, "--d", 2, "--curve", "-", "--r-min", 9, "--r-max", 3)
    assert code == 2


# --- finite ---------------------------------------------------------------------

def test_finite_example(capsys):
    code, out, _ = run(capsys, "finite", "--n", 2, "--d", 2, "--k", 2, "--q", 1, "--t", 1, "--mass", "0.5,0.1")
    assert code == 0
    foot = footer(out)
    assert float(foot["s_av"]) == pytest.approx(5 / 9, rel=1e-11)
    assert float(foot["log_E_N2"]) == pytest.approx(2.19722457734, rel=1e-11)
    assert float(foot["mass(0.5,0.1)"]) == pytest.approx(4 / 9, rel=1e-11)
    rows = read_profile_csv(out)
    assert [r["E"] for r in rows] == pytest.approx([2, 4, 3], rel=1e-11)


def test_finite_t0(capsys):
    code, out, _ = run(capsys, "finite", "--n", 30, "--ksat", "--k", 3, "--t", 0)
    assert code == 0 and float(footer(out)["s_av"]) == pytest.approx(0.5, rel=1e-11)


def test_finite_approaches_limit(capsys):
    lim = asy.s_av_infinity(asy.phase_portrait(5, 1, 2), 10.0).s
    gaps = []
    for n in (50, 100, 200, 400):
        _, out, _ = run(capsys, "finite", "--ksat", "--k", 5, "--n", n, "--t", 10 * n)
        gaps.append(abs(float(footer(out)["s_av"]) - lim))
    assert gaps == sorted(gaps, reverse=True)


def test_finite_csv_file_round_trip(tmp_path, capsys):
    path = tmp_path / "prof.csv"
    code, out, _ = run(capsys, "finite", "--n", 12, "--d", 3, "--k", 3, "--q", 4, "--t", 30, "-o", path)
    assert code == 0 and out.startswith("s_av=")
    text = path.read_text()
    rows = read_profile_csv(text)
    for row in rows:
        printed = [l for l in text.splitlines() if l.startswith(f"{row['S']},")][0]
        assert printed.split(",")[2] == f"{row['log_E']:.12g}"


def test_finite_bad_mass(capsys):
    code, _, _ = run(capsys, "finite", "--n", 4, "--ksat", "--k", 2, "--t", 1, "--mass", "oops")
    assert code == 2
    code, _, _ = run(capsys, "finite", "--n", 4, "--ksat", "--k", 2, "--t", 1, "--mass", "0.5,0")
    assert code == 2


# --- verify ------------------------------------------------------------------------

def test_verify_exhaustive(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--n", 2, "--d", 2, "--k", 2, "--q", 1, "--t", 1,
                       "-o", tmp_path / "est.csv", "--manifest", tmp_path / "m.json")
    assert code == 0 and out.rstrip().endswith("PASS")
    assert json.loads((tmp_path / "m.json").read_text())["instances"] == 4
    assert (tmp_path / "est.csv").read_text().startswith("S,s,count_or_mean,std_err")


def test_verify_corrupt(capsys):
    code, out, _ = run(capsys, "verify", "--n", 2, "--d", 2, "--k", 2, "--q", 1, "--t", 1, "--corrupt", 1.01)
    assert code == 4 and out.rstrip().endswith("FAIL")


def test_verify_budget(capsys):
    code, _, err = run(capsys, "verify", "--n", 6, "--d", 2, "--k", 3, "--q", 1, "--t", 9)
    assert code == 5 and "budget" in err


def test_verify_mc_small(capsys):
    code, out, _ = run(capsys, "verify", "--n", 4, "--ksat", "--k", 2, "--t", 3, "--mode", "mc",
                       "--samples", 500, "--seed", 3, "--workers", 2)
    assert code == 0
    assert "mode=monte_carlo instances=500" in out


# --- sweep and config ------------------------------------------------------------------

def test_sweep(capsys):
    code, out, _ = run(capsys, "sweep", "--k", "4,5", "--q", 1, "--d", 2)
    assert code == 0
    docs = [json.loads(l) for l in out.splitlines()]
    assert docs[0]["regime"] == "no_transition" and docs[0]["r_prime_s02"] > 0
    assert docs[1]["regime"] == "two_roots" and 20 < docs[1]["r_cr"] < 21


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 2, "d": 2, "k": 2, "q": 1, "t": 1}))
    code, out, _ = run(capsys, "--config", cfg, "finite")
    assert code == 0 and float(footer(out)["s_av"]) == pytest.approx(5 / 9)
    # explicit flags override the file
    code, out, _ = run(capsys, "--config", cfg, "finite", "--t", 0)
    assert float(footer(out)["s_av"]) == pytest.approx(0.5)
    cfg.write_text(json.dumps({"k": [5, 6], "q": [1], "d": [2]}))
    code, out, _ = run(capsys, "--config", cfg, "sweep")
    assert code == 0 and len(out.splitlines()) == 2
    code, _, _ = run(capsys, "--config", tmp_path / "missing.json", "finite")
    assert code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "simdegree", "analyze", "--k", "4", "--q", "1", "--d", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 3
