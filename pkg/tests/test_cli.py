import csv
import io
import json
import subprocess
import sys

import pytest

from torix.cli import main, parse_B_list, UsageError

import oracles


def run(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_validate_builtin(capsys):
    code, out, _ = run(["validate", "--fan", "builtin:P2"], capsys)
    assert code == 0 and json.loads(out)["ok"]
    code, out, _ = run(["validate", "--fan", "builtin:F1"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["projective"]["ok"] and doc["projective"]["ample_basis"] == [[2, 1], [3, 1]]


def test_validate_lone_cone(tmp_path, capsys):
    bad = tmp_path / "bad_fan.json"
    bad.write_text(json.dumps({"dim": 2, "rays": [[1, 0], [0, 1]], "max_cones": [[0, 1]]}))
    code, out, _ = run(["validate", "--fan", str(bad)], capsys)
    doc = json.loads(out)
    assert code == 1 and not doc["ok"]
    failed = [c for c in doc["checks"] if not c["passed"]]
    assert failed and failed[0]["witness"]


def test_unreadable(capsys):
    code, _, err = run(["describe", "--fan", "/nonexistent/fan.json"], capsys)
    assert code == 1 and "cannot read" in err


def test_describe(capsys):
    code, out, _ = run(["describe", "--fan", "builtin:F1", "--sections", "--mobius"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["picard_rank"] == 2 and doc["f"] == 2
    assert [s["r"] for s in doc["sections"]] == [5, 7]
    assert doc["mobius"]["local_density"].startswith("1 - 2/p^2")


def test_count_p1(capsys):
    code, out, _ = run(["count", "--fan", "builtin:P1", "--B", "1,2,4,8"], capsys)
    assert code == 0
    r = rows(out)
    for row in r:
        B = int(row["B"])
        # default region 1 <= H/B < 2
        want = oracles.coprime_count(2 * B - 1, 2) - oracles.coprime_count(B - 1, 2)
        assert int(row["rational_count"]) == want
        assert int(row["torsor_count"]) == 2 * want
        assert int(row["boundary_count"]) == int(row["torsor_count"]) - int(row["torus_count"])


def test_count_region_file(tmp_path, capsys):
    reg = tmp_path / "r.json"
    reg.write_text(json.dumps([[{"divisor": [1, 0, 0], "min": 0, "max": "log(3)",
                                 "max_inclusive": True}]]))
    code, out, _ = run(["count", "--fan", "builtin:P2", "--region", str(reg), "--B", "1"], capsys)
    assert code == 0 and int(rows(out)[0]["rational_count"]) == oracles.coprime_count(3, 3)


def test_telescoping(capsys):
    _, out, _ = run(["count", "--fan", "builtin:P1", "--B", "4,8,16,32"], capsys)
    parts = sum(int(r["rational_count"]) for r in rows(out))
    assert parts == oracles.coprime_count(63, 2) - oracles.coprime_count(3, 2)


def test_compare_deterministic(tmp_path, capsys):
    args = ["compare", "--fan", "builtin:P1", "--B", "16,32,64", "--samples", "20000"]
    outs = []
    for k, th in enumerate(("1", "2", "1")):
        path = tmp_path / f"c{k}.csv"
        assert main(args + ["--threads", th, "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    r = rows(outs[0].decode())
    assert list(r[0]) == ["B", "rational_count", "torus_count", "boundary_count", "prediction",
                          "prediction_lo", "prediction_hi", "ratio", "residual_scale"]
    assert all(float(x["ratio"]) > 0 for x in r)


def test_predict(capsys):
    code, out, _ = run(["predict", "--fan", "builtin:P1", "--B", "64", "--samples", "100000"], capsys)
    doc = json.loads(out)
    assert code == 0
    tau = doc["tamagawa"]
    assert tau["lo"] <= 4 * 6 / 3.141592653589793 ** 2 <= tau["hi"]
    assert doc["provenance"]["samples"] == 100000 and len(doc["predictions"]) == 1


def test_budget_exit(capsys):
    code, _, err = run(["count", "--fan", "builtin:P1", "--B", "1000", "--budget", "100"], capsys)
    assert code == 2 and "budget" in err


@pytest.mark.parametrize("argv", [
    ["count", "--fan", "builtin:P1"],
    ["count", "--fan", "builtin:P1", "--B", "4,2"],
    ["count", "--fan", "builtin:P1", "--B", "0.5"],
    ["count", "--fan", "builtin:P1", "--B", "2", "--u", "1"],
    ["count", "--fan", "builtin:P9", "--B", "2"],
    ["predict", "--fan", "builtin:P1", "--samples", "10"],
    ["predict", "--fan", "builtin:P1", "--pmax", "5"],
    ["count", "--fan", "builtin:P1", "--B", "2", "--threads", "x"],
])
def test_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == 1


def test_parse_B():
    assert parse_B_list("1, 2,7/2") == [1, 2, __import__("fractions").Fraction(7, 2)]
    with pytest.raises(UsageError):
        parse_B_list("2,2")


def test_module_entry():
    p = subprocess.run([sys.executable, "-m", "torix", "validate", "--fan", "builtin:P1"],
                       capture_output=True, text=True)
    assert p.returncode == 0 and json.loads(p.stdout)["ok"]
