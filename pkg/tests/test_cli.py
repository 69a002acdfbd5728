import csv
import io
import json
import os
import subprocess
import sys

import gmpy2
import pytest
from gmpy2 import mpfr

from qzeta import cli
from qzeta.identities import Verdict, classify


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def records(text):
    return json.loads(text)["records"]


def test_eval_zeta(capsys):
    code, out, _ = run(capsys, "eval", "zeta", "--s", "2", "--q", "2", "--prec-bits", "128")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema_version"] == "1"
    rec = doc["records"][0]
    assert rec["digits"] == 34
    assert float(rec["abs_error_bound"]) <= 2.0**-108
    assert rec["value"].startswith("2.74403388875948836048")
    assert rec["terms_used"] > 0


def test_eval_domain_error(capsys):
    code, out, _ = run(capsys, "eval", "zeta", "--s", "0.5", "--q", "2")
    assert code == 2
    assert records(out)[0]["status"] == "domain_error"


def test_eval_mt_and_complex(capsys):
    code, out, _ = run(capsys, "eval", "mt", "--s", "3,1", "--slast", "2", "--q", "2")
    assert code == 0 and records(out)[0]["value"].startswith("2.5906583443806")
    code, out, _ = run(capsys, "eval", "zeta", "--s", "2,1", "--q", "2")
    assert code == 0 and "," in records(out)[0]["value"]


def test_config_errors(capsys):
    assert run(capsys, "eval", "nosuch", "--q", "2")[0] == 2
    assert run(capsys, "eval", "zeta", "--s", "2", "--q", "1")[0] == 2
    assert run(capsys, "eval", "zeta", "--s", "2", "--q", "2", "--prec-bits", "32")[0] == 2
    assert run(capsys, "verify", "--id", "bogus")[0] == 2
    assert run(capsys, "verify", "--id", "nielsen_q", "--s", "2")[0] == 2
    assert run(capsys, "limits", "--order", "sideways")[0] == 2
    assert run(capsys)[0] == 2


def test_verify_pass(capsys):
    code, out, _ = run(capsys, "verify", "--id", "nielsen_q", "--s", "2", "--sprime", "3", "--q", "2")
    assert code == 0
    assert records(out)[0]["verdict"] == "pass"


def test_verify_fail_exit_code(capsys):
    code, out, _ = run(capsys, "verify", "--id", "t2_31", "--q", "2")
    assert code == 1
    assert len(records(out)[0]["links"]) == 2


def test_suite(capsys):
    argv = ["suite", "--ids", "t2_31,t2_41,t2_51,t2_weight6", "--q", "1.5,2,3"]
    code, out, _ = run(capsys, *argv, "--variant", "corrected")
    doc = json.loads(out)
    assert code == 0 and len(doc["records"]) == 12
    assert doc["summary"] == {"pass": 12, "fail": 0, "inconclusive": 0}
    code, out, _ = run(capsys, *argv)
    assert code == 1
    assert json.loads(out)["summary"] == {"pass": 3, "fail": 9, "inconclusive": 0}


def test_audit(capsys):
    code, out, _ = run(capsys, "audit", "--s-max", "6", "--q", "2")
    assert code == 1
    recs = records(out)
    counts = recs[-1]
    assert counts["pair_counts_match"] is True
    for rec in recs[:-1]:
        if rec["variant"] == "corrected":
            assert rec["verdict"] == "pass"
        if rec["variant"] == "as_stated":
            assert rec["verdict"] == "fail"
            if rec["prediction"].endswith("(q-1)W(s)"):
                assert rec["prediction_matches"] is True


def test_limits(capsys):
    code, out, _ = run(capsys, "limits", "--order", "s2_first", "--steps", "8", "--prec-bits", "512")
    assert code == 0
    last = records(out)[-1]
    assert abs(float(last["value"]) - 5 / 12) < 1e-8
    code, out, _ = run(capsys, "limits", "--order", "s1_first", "--steps", "1")
    assert code == 0 and abs(float(records(out)[-1]["value"]) - 1 / 3) < 1e-2


def test_sweep_zeta2(capsys):
    code, out, _ = run(capsys, "sweep", "zeta2", "--grid", "s1=2,3,4", "--grid", "s2=1,2", "--q", "1.5,2")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 12
    keys = [(int(r["s1"]), int(r["s2"]), float(r["q"])) for r in rows]
    assert keys == sorted(keys)
    assert "abs_error_bound" in rows[0]


def test_sweep_circ_monotone(capsys):
    code, out, _ = run(capsys, "sweep", "circ", "--grid", "s1=3..6", "--s2", "1", "--q", "2")
    vals = [float(r["value"]) for r in csv.DictReader(io.StringIO(out))]
    assert code == 0 and len(vals) == 4
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_sweep_guard(capsys, tmp_path):
    target = tmp_path / "big.csv"
    code, _, err = run(capsys, "sweep", "zeta", "--grid", "s=2..1000001", "--q", "2", "--output", str(target))
    assert code == 2 and "limit" in err
    assert not target.exists()


def test_output_atomic_and_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(capsys, "suite", "--ids", "nielsen_q", "--s-min", "2", "--s-max", "3", "--q", "2", "--output", str(path))[0] == 0
    strip = lambda p: [{k: v for k, v in r.items() if k != "elapsed_ms"} for r in json.loads(p.read_text())["records"]]
    assert strip(a) == strip(b)
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".qzeta")] == []


def test_json_round_trip_verdicts(capsys):
    code, out, _ = run(capsys, "suite", "--ids", "nielsen_q,t2_31", "--s-min", "2", "--s-max", "3", "--q", "2")
    for rec in records(out):
        res, tol = mpfr(rec["residual"], 256), mpfr(rec["tolerance"], 256)
        assert classify(res, tol).value == rec["verdict"]
        digits = rec["digits"]
        with gmpy2.context(precision=256):
            lhs = mpfr(rec["lhs"])
            rhs = mpfr(rec["rhs"])
            # decimal text is accurate to one unit in the last place
            assert abs(lhs - mpfr(rec["lhs"])) == 0
            assert digits == 34


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "verify", "id": "nielsen_q", "s": 2, "sprime": 3, "q": "2", "precision_bits": 96}))
    code, out, _ = run(capsys, "--config", str(cfg))
    assert code == 0 and records(out)[0]["precision_bits"] == 96
    # explicit flags beat the config file
    code, out, _ = run(capsys, "verify", "--config", str(cfg), "--prec-bits", "80")
    assert records(out)[0]["precision_bits"] == 80
    cfg.write_text(json.dumps({"command": "verify", "bogus": 1}))
    assert run(capsys, "--config", str(cfg))[0] == 2


def test_env_precision(capsys, monkeypatch):
    monkeypatch.setenv(cli.PREC_ENV, "100")
    _, out, _ = run(capsys, "eval", "zeta", "--s", "3", "--q", "2")
    assert records(out)[0]["precision_bits"] == 100
    _, out, _ = run(capsys, "eval", "zeta", "--s", "3", "--q", "2", "--prec-bits", "72")
    assert records(out)[0]["precision_bits"] == 72


def test_plain_and_csv_formats(capsys):
    code, out, _ = run(capsys, "verify", "--id", "nielsen_q", "--s", "2", "--sprime", "2", "--q", "2", "--format", "plain")
    assert code == 0 and "verdict=pass" in out and "summary: pass=1" in out
    code, out, _ = run(capsys, "verify", "--id", "nielsen_q", "--s", "2", "--sprime", "2", "--q", "2", "--format", "csv")
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["verdict"] == "pass"


def test_digits_rule():
    assert cli.digits_for(128) == 34
    assert cli.digits_for(512) == 150


def test_tol_override(capsys):
    code, out, _ = run(capsys, "verify", "--id", "t2_31", "--q", "2", "--tol", "10")
    assert code == 0 and records(out)[0]["tolerance"].startswith("1.0")


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "qzeta", "eval", "zeta", "--s", "2", "--q", "3", "--format", "plain"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and "value=" in proc.stdout
