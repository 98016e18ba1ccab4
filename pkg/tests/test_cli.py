import json
import math
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from builders import EXAMPLE, PROBLEMS, ROOT, simple_doc
from conekit.cli import main, parse_ladder
from conekit.errors import LadderError
from conekit.report import load_schema

S3 = "0.125:star,1:one,11:zero"
GOLDEN = ROOT / "tests" / "golden" / "example_report.json"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def validate(text):
    doc = json.loads(text)
    jsonschema.validate(doc, load_schema())
    return doc


def test_constants_json(capsys):
    code, out, _ = run(capsys, "constants", EXAMPLE)
    assert code == 0
    doc = validate(out)
    c = doc["constants"]
    assert c["m_1"] == {"value": 8.0, "exact": "8"}
    assert c["c_2"]["value"] == pytest.approx(45 * math.sqrt(3) / 128, abs=1e-10)
    assert c["int_ab_K_22"]["exact"] == "3985/497664"


def test_constants_table(capsys):
    code, out, _ = run(capsys, "constants", EXAMPLE, "--format", "table")
    assert code == 0
    assert any(line.split() == ["m_1", "8"] for line in out.splitlines())
    assert "0.6089" in next(line for line in out.splitlines() if line.startswith("c_2 "))


def test_D_violation_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(simple_doc(h=("9/10", "9/10"), H="9/10*w")))
    code, _, err = run(capsys, "constants", path)
    assert code == 2
    assert "Dᵢ>0" in err


def test_missing_file_exit_1(tmp_path, capsys):
    assert run(capsys, "constants", tmp_path / "nope.json")[0] == 1


def test_invalid_json_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run(capsys, "constants", path)[0] == 2


def test_certify_S3(capsys):
    code, out, _ = run(capsys, "certify", EXAMPLE, "--ladder", S3)
    assert code == 0
    v = validate(out)["verdict"]
    assert (v["clause"], v["guaranteed_count"]) == ("S3", 2)


def test_certify_at_least_three(capsys):
    assert run(capsys, "certify", EXAMPLE, "--ladder", S3, "--at-least", 3)[0] == 4


def test_certify_empty_ladder(capsys):
    assert run(capsys, "certify", EXAMPLE, "--ladder", "")[0] == 2


def test_ladder_file_forms(tmp_path):
    text = tmp_path / "ladder.txt"
    text.write_text("1/8:star\n1:one\n11:zero\n")
    js = tmp_path / "ladder.json"
    js.write_text(json.dumps([["1/8", "star"], [1, "one"], [11, "zero"]]))
    assert parse_ladder(str(text)) == parse_ladder(str(js)) == parse_ladder(S3)
    with pytest.raises(LadderError):
        parse_ladder("1:one,-2:zero")
    with pytest.raises(LadderError):
        parse_ladder("1")


def test_check_single_rho(capsys):
    code, out, _ = run(capsys, "check", EXAMPLE, "--rho", "1", "--kind", "one")
    assert code == 0
    conds = validate(out)["conditions"]
    assert len(conds) == 1 and conds[0]["satisfied"]
    assert conds[0]["equations"]["1"]["extremum"]["source"] == "user-exact"


def test_check_needs_a_radius(capsys):
    assert run(capsys, "check", EXAMPLE)[0] == 2


def test_check_scan(capsys):
    code, out, _ = run(capsys, "check", EXAMPLE, "--scan", "0.0625:40:16")
    assert code == 0
    assert validate(out)["verdict"]["guaranteed_count"] >= 1


def test_solve_toy(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", PROBLEMS / "toy_linear.json", "--out", tmp_path, "--brackets", "0:1")
    assert code == 0
    data = np.loadtxt(tmp_path / "solution_1.csv", delimiter=",", skiprows=1)
    t, u = data[:, 0], data[:, 1]
    assert np.max(np.abs(u - t * (1 - t) / 2)) < 1e-10
    validate((tmp_path / "solve.json").read_text())
    assert "in_cone=(True, True)" in out


def test_solve_example(tmp_path, capsys):
    code, _, _ = run(capsys, "solve", EXAMPLE, "--out", tmp_path)
    assert code == 0
    sols = validate((tmp_path / "solve.json").read_text())["solutions"]
    assert sols and all(s["residual"] < 1e-8 for s in sols)


@pytest.mark.parametrize("nodes", [33, 257])
def test_solve_node_counts(tmp_path, capsys, nodes):
    code, _, _ = run(capsys, "solve", EXAMPLE, "--out", tmp_path, "--nodes", nodes, "--brackets", "0:1")
    assert code == 0
    sols = json.loads((tmp_path / "solve.json").read_text())["solutions"]
    assert sols[0]["residual"] < 1e-8


def test_solve_universal_divergence(tmp_path, capsys):
    code, _, err = run(capsys, "solve", EXAMPLE, "--out", tmp_path, "--seed-norm", 30)
    assert code == 3
    assert err


# ---------------------------------------------------------------- golden report

def close(got, want, path=""):
    """Per-field comparison: exact strings equal, floats to 1e-9 relative, solver fields looser."""
    if isinstance(want, dict):
        assert set(got) == set(want), path
        for k in want:
            if k == "wall_time":
                continue
            close(got[k], want[k], f"{path}.{k}")
    elif isinstance(want, list):
        assert len(got) == len(want), path
        for n, (g, w) in enumerate(zip(got, want)):
            close(g, w, f"{path}[{n}]")
    elif isinstance(want, float) and not isinstance(want, bool):
        if path.endswith(".residual"):
            assert got < 1e-8, path
        elif path.endswith(".norm"):
            assert got == pytest.approx(want, abs=1e-8), path
        else:
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12), path
    elif path.endswith(".iterations"):
        assert abs(got - want) <= 5, path
    else:
        assert got == want, path


def report_args(out):
    return ["report", EXAMPLE, "--ladder", S3, "--solve", "--brackets", "0.125:1,1:44", "--out", out]


def test_golden_report(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert run(capsys, *report_args(out))[0] == 0
    got = validate(out.read_text())
    close(got, json.loads(GOLDEN.read_text()))


def test_regeneration_is_byte_identical(tmp_path, capsys):
    texts = []
    for n in range(2):
        out = tmp_path / f"r{n}.json"
        assert run(capsys, *report_args(out))[0] == 0
        doc = json.loads(out.read_text())
        doc["wall_time"] = 0
        texts.append(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False))
    assert texts[0] == texts[1]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "conekit", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("conekit ")
