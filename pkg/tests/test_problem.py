import json
from fractions import Fraction

import numpy as np
import pytest

from builders import EXAMPLE, example_doc, simple_doc
from conekit.constants import compute_all
from conekit.errors import ProblemError
from conekit.problem import (ASSUMPTIONS, SchemaError, build, dump, dumps, load, loads,
                             validate_HL_consistency)


def rejection(doc):
    with pytest.raises(ProblemError) as info:
        build(doc)
    return info.value


def assert_single_label(err, key):
    label = ASSUMPTIONS[key]
    assert any(label in str(v) for v in err.violations), str(err)
    for v in err.violations:
        named = [k for k, lab in ASSUMPTIONS.items() if f"'{lab}'" in str(v)]
        assert len(named) == 1, str(v)


def test_example_loads(example):
    assert example.tilde_c(1) == Fraction(1, 4)
    assert example.tilde_c(2) == Fraction(1, 4)
    assert example.c == Fraction(1, 4)
    assert example.has_solver_terms()
    assert len(example.digest) == 64


def test_beta_gamma_table(example):
    want = {(1, 1, 1): Fraction(3, 4), (1, 1, 2): Fraction(1, 4), (1, 2, 1): Fraction(1, 4),
            (1, 2, 2): Fraction(3, 4), (2, 1, 1): Fraction(2, 3), (2, 1, 2): Fraction(4, 81),
            (2, 2, 1): Fraction(1, 3), (2, 2, 2): Fraction(5, 81)}
    assert example.beta_gamma == want


# ---------------------------------------------------------------- the six standing-assumption rejections

def test_negative_measure_weight():
    doc = example_doc()
    doc["boundary"][0]["beta"]["atoms"][0]["weight"] = -1
    assert_single_label(rejection(doc), "measure")


def test_h_beta_at_least_one():
    doc = example_doc()
    doc["boundary"][0]["h_hi"] = "4/3"  # (4/3)*(3/4) = 1
    err = rejection(doc)
    assert_single_label(err, "h_beta")
    assert "hᵢⱼ₂βᵢⱼ[γᵢⱼ]<1" in str(err)


def test_D_not_positive():
    doc = simple_doc(h=("9/10", "9/10"), H="9/10*w")
    err = rejection(doc)
    assert_single_label(err, "D")
    assert "Dᵢ>0" in str(err)


def test_gamma_negative():
    doc = example_doc()
    doc["boundary"][1]["gamma"] = "t - 1/2"
    assert_single_label(rejection(doc), "gamma")


def test_g_negative():
    doc = example_doc()
    doc["equations"][0]["g"] = "s - 1/2"
    assert_single_label(rejection(doc), "g")


def test_phi_g_zero_on_subinterval():
    doc = example_doc()
    doc["equations"][1]["g"] = "piecewise(s in [0, 1/4): 1; s in [1/4, 3/4]: 0; s in (3/4, 1]: 1)"
    assert_single_label(rejection(doc), "phi_g")


# ---------------------------------------------------------------- other checks

def test_f_negative():
    doc = example_doc()
    doc["equations"][0]["f"] = "u - 1"
    assert_single_label(rejection(doc), "f")


def test_f_undefined_on_domain():
    doc = example_doc()
    doc["equations"][0]["f"] = "log(u)"
    assert_single_label(rejection(doc), "f")


def test_hl_order():
    doc = example_doc()
    doc["boundary"][1]["h_lo"] = "1/2"
    assert_single_label(rejection(doc), "hl")


def test_gamma_vanishing_on_subinterval():
    doc = example_doc()
    doc["boundary"][1]["gamma"] = "(t - 1/2)^2"
    assert_single_label(rejection(doc), "gamma_c")


def test_bad_interval():
    doc = example_doc()
    doc["equations"][0]["interval"] = ["3/4", "1/4"]
    assert_single_label(rejection(doc), "interval")


def test_H_outside_sandwich():
    doc = example_doc()
    doc["boundary"][1]["H"] = "w"
    assert_single_label(rejection(doc), "hl")


@pytest.mark.parametrize("mutate, needle", [
    (lambda d: d.pop("equations"), "equations"),
    (lambda d: d.update(spec_version=2), "spec_version"),
    (lambda d: d["boundary"].pop(), "boundary"),
    (lambda d: d["equations"][0].update(kernel="builtin9"), "builtin9"),
    (lambda d: d["equations"][0].update(f="u +"), "equation 1.f"),
    (lambda d: d.update(options={"bogus": 1}), "bogus"),
])
def test_schema_errors(mutate, needle):
    doc = example_doc()
    mutate(doc)
    with pytest.raises((SchemaError, ProblemError, ValueError)) as info:
        build(doc)
    assert needle in str(info.value)


def test_invalid_json():
    with pytest.raises(SchemaError, match="invalid JSON"):
        loads("{")


def test_empty_measures_and_degenerate_gamma():
    doc = simple_doc(gamma="0", beta={"atoms": []}, delta={"atoms": []})
    p = build(doc)
    assert p.bt(1, 1).gamma.sup_norm == 0
    assert p.bt(1, 1).gamma.c_gamma == 1


# ---------------------------------------------------------------- H/L sandwich sampling

def test_hl_example_margins(example):
    report = validate_HL_consistency(example, W_max=100, n=10_000)
    assert report.ok
    h11 = [e for e in report.entries if (e["i"], e["j"], e["which"]) == (1, 1, "H")][0]
    assert h11["worst_margin"] >= 0


def test_l11_dense_oracle():
    """(1 - cos w)/11 <= w/15 on a dense grid, confirming the Example's l_112."""
    w = np.linspace(0, 200, 100_001)
    assert np.all((1 - np.cos(w)) / 11 <= w / 15 + 1e-15)
    assert np.all((1 + np.sin(w - np.pi / 2)) / 11 >= -1e-17)


def test_hl_equality_case_has_zero_margins():
    p = build(simple_doc(h=("1/3", "1/3"), H="w/3", l="1/5", L="w/5"))
    report = validate_HL_consistency(p, W_max=10, n=200)
    for e in report.entries:
        assert e["worst_margin"] == pytest.approx(0, abs=1e-14)
    assert report.ok


# ---------------------------------------------------------------- determinism

def test_reserialised_problem_has_identical_constants(example, consts):
    again = loads(dumps(example))
    assert compute_all(again).table() == consts.table()
    assert dump(again) == dump(example)


def test_digest_is_content_hash():
    import hashlib
    assert load(EXAMPLE).digest == hashlib.sha256(EXAMPLE.read_bytes()).hexdigest()
    assert load(EXAMPLE).digest == load(EXAMPLE).digest


def test_custom_kernel_document():
    doc = simple_doc()
    doc["equations"][0]["kernel"] = {"lower": "s*(1 - t)", "upper": "t*(1 - s)", "phi": "s*(1 - s)", "c": "1/4"}
    p = build(doc)
    assert p.eq(1).c == Fraction(1, 4)
    assert json.loads(dumps(p))["equations"][0]["kernel"]["c"] == "1/4"


def test_custom_kernel_violating_sandwich():
    doc = simple_doc()
    doc["equations"][0]["kernel"] = {"lower": "2*s*(1 - t)", "upper": "2*t*(1 - s)", "phi": "s*(1 - s)"}
    assert_single_label(rejection(doc), "kernel")


def test_density_measure():
    doc = simple_doc(beta={"atoms": [], "density": "2*t"}, h=("1/8", "1/4"), H="w/5")
    p = build(doc)
    assert p.beta_gamma[(1, 1, 1)] == 1
