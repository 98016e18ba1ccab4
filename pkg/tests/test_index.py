from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import example_doc, simple_doc
from conekit import index as ix
from conekit.constants import compute_all
from conekit.errors import ConekitError, LadderError
from conekit.problem import build

S3_LADDER = [(F(1, 8), "star"), (1, "one"), (11, "zero")]


@pytest.fixture(scope="module")
def sampled():
    """The Example without its exact f overrides, so every extremum is sampled."""
    doc = example_doc()
    doc.pop("f_bounds")
    p = build(doc)
    return p, compute_all(p)


def box(t, u, v):
    return tuple(tuple(F(x) for x in r) for r in (t, u, v))


# ---------------------------------------------------------------- f extrema

def test_sup_over_unit_cube(sampled):
    p, _ = sampled
    e = ix.f_extremum(p, 1, box((0, 1), (0, 1), (0, 1)), "sup", rho=1)
    assert e.value == 2.25
    assert e.source == "sampled"
    assert e.arg == (1.0, 1.0, 1.0)


def test_inf_on_star_box(sampled):
    p, _ = sampled
    e = ix.f_extremum(p, 1, ix.index0_box(p, 1, F(1, 8), star=True), "inf", rho=F(1, 8))
    assert e.value == pytest.approx(16, abs=1e-12)


def test_inf_on_index0_box_second_equation(sampled):
    p, _ = sampled
    b = ix.index0_box(p, 2, 11)
    assert b == box(("1/4", "3/4"), (0, 44), (11, 44))
    e = ix.f_extremum(p, 2, b, "inf", rho=11)
    assert e.value == pytest.approx(143, abs=1e-9)
    assert e.arg[1:] == (0.0, 11.0)


def test_user_override_wins(example):
    e = ix.f_extremum(example, 2, box(("1/4", "3/4"), (0, 44), (11, 44)), "inf", rho=11)
    assert e.source == "user-exact"
    assert e.value == 143


def test_boxes():
    p = build(example_doc())
    assert ix.index1_box(p, 2, 3) == ((0, 1), (0, 3), (0, 3))
    assert ix.index0_box(p, 1, 2) == ((F(1, 4), F(3, 4)), (2, 8), (0, 8))
    assert ix.index0_box(p, 2, 2) == ((F(1, 4), F(3, 4)), (0, 8), (2, 8))


def test_bad_grid(sampled):
    p, _ = sampled
    with pytest.raises(ValueError):
        ix.f_extremum(p, 1, box((0, 1), (0, 1), (0, 1)), "sup", grid=1)
    with pytest.raises(ValueError):
        ix.f_extremum(p, 1, box((0, 1), (0, 1), (0, 1)), "max")


def test_eval_failure_inside_box():
    p = build(simple_doc(f1="sqrt(u)"))
    with pytest.raises(ConekitError, match="inside box"):
        ix.f_extremum(p, 1, box((0, 1), (-1, 0), (0, 1)), "sup")


# ---------------------------------------------------------------- thresholds

def test_exact_thresholds(consts, example):
    th = ix.thresholds(example, consts)
    assert th.index1[1] == F(1052, 345)
    assert th.index0[1] == F(2768, 187)
    assert float(th.index1[2]) == pytest.approx(54.5787, abs=1e-4)
    assert float(th.index0[2]) == pytest.approx(141.489, abs=1e-3)


def test_unperturbed_index1_is_classical():
    p = build(simple_doc(beta={"atoms": []}, delta={"atoms": []}, f1="u", f2="v"))
    k = compute_all(p)
    A, C = ix.index1_coefficients(p, k, 1)
    assert (A, C) == (F(1, 8), 0)
    cond = ix.check_index1(p, k, 5)
    assert cond.lhs[1] == pytest.approx(1 / 8)
    assert cond.satisfied


# ---------------------------------------------------------------- conditions

def test_example_conditions_hold(example, consts):
    star = ix.check(example, consts, F(1, 8), "star")
    assert star.satisfied and star.margins[1] > 0
    one = ix.check(example, consts, 1, "one")
    assert one.satisfied and all(m > 0 for m in one.margins.values())
    zero = ix.check(example, consts, 11, "zero")
    assert zero.satisfied
    assert set(zero.provenance.values()) == {"user-exact"}


def test_index1_fails_for_large_rho(sampled):
    p, k = sampled
    assert not ix.check_index1(p, k, 4).satisfied


def test_zero_nonlinearity_never_index0(zero):
    k = compute_all(zero)
    for rho in (F(1, 100), 1, 100):
        cond = ix.check_index0(zero, k, rho)
        assert cond.lhs == {1: 0, 2: 0}
        assert not cond.satisfied
        assert not ix.check_index0(zero, k, rho, star=True).satisfied


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 100))
def test_scale_coherence(lam):
    base = simple_doc(f1="u^2 + sin(t)*v + 1")
    scaled = simple_doc(f1=f"{lam!r}*(u^2 + sin(t)*v + 1)")
    p0, p1 = build(base), build(scaled)
    for b, mode in [(box((0, 1), (0, 2), (0, 2)), "sup"), (box(("1/4", "3/4"), (1, 4), (0, 4)), "inf")]:
        e0 = ix.f_extremum(p0, 1, b, mode, grid=16)
        e1 = ix.f_extremum(p1, 1, b, mode, grid=16)
        assert e1.value == pytest.approx(lam * e0.value, rel=1e-12)


poly_coeff = st.fractions(0, 5, max_denominator=8)


@settings(max_examples=25, deadline=None)
@given(poly_coeff, poly_coeff, poly_coeff, poly_coeff, st.sampled_from([F(1, 2), 1, 3]))
def test_star_inf_never_exceeds_plain_inf(a, b, c, d, rho):
    # non-negative coefficients make f monotone in u and v, so both boxes' infima sit on grid corners
    f = f"{a} + {b}*u + {c}*v^2 + {d}*t*u*v"
    p = build(simple_doc(f1=f, f2=f))
    for i in (1, 2):
        star = ix.f_extremum(p, i, ix.index0_box(p, i, rho, star=True), "inf", rho, grid=12)
        plain = ix.f_extremum(p, i, ix.index0_box(p, i, rho), "inf", rho, grid=12)
        assert star.value <= plain.value


# ---------------------------------------------------------------- ladders

def test_example_ladder_is_S3(example, consts):
    v = ix.multiplicity(example, consts, S3_LADDER)
    assert (v.clause, v.guaranteed_count) == ("S3", 2)
    assert [g.constraint for g in v.gap_checks] == ["rho1/c < rho2", "rho2 < rho3"]
    assert [(g.lhs, g.rhs) for g in v.gap_checks] == [(F(1, 2), 1), (1, 11)]
    assert all(g.satisfied for g in v.gap_checks)


def test_example_ladder_sampled(sampled):
    p, k = sampled
    assert ix.multiplicity(p, k, S3_LADDER).clause == "S3"


def test_single_index1_certifies_nothing(example, consts):
    v = ix.multiplicity(example, consts, [(1, "one")])
    assert (v.clause, v.guaranteed_count) == ("none", 0)


def test_S2(example, consts):
    v = ix.multiplicity(example, consts, [(1, "one"), (11, "zero")])
    assert (v.clause, v.guaranteed_count) == ("S2", 1)


def test_gap_failure_breaks_window(example, consts):
    # 1/8 / c = 1/2 is not below 0.4
    v = ix.multiplicity(example, consts, [(F(1, 8), "star"), (F(2, 5), "one")])
    assert not v.gap_checks[0].satisfied
    assert v.guaranteed_count == 0


@pytest.mark.parametrize("ladder, needle", [
    ([], "empty"),
    ([(1, "one"), (2, "one")], "alternate"),
    ([(2, "one"), (1, "zero")], "increasing"),
    ([(1, "one"), (2, "star")], "first rung"),
    ([(1, "bogus")], "unknown"),
])
def test_malformed_ladders(ladder, needle):
    with pytest.raises(LadderError, match=needle):
        ix.validate_ladder(ladder)


def test_clause_names():
    Z, O = ix.INDEX0, ix.INDEX1
    assert ix.clause_name([Z, O]) == "S1"
    assert ix.clause_name([O, Z, O]) == "S4"
    assert ix.clause_name([Z, O, Z, O]) == "S5"
    assert ix.clause_name([O, Z, O, Z]) == "S6"
    assert ix.clause_name([Z, O, Z, O, Z]) == "extended(4)"


def fake_conditions(kinds_sat, rhos):
    return [ix.RhoCondition(kd, r, {}, {}, {}, {}, sat) for (kd, sat), r in zip(kinds_sat, rhos)]


alternating = st.integers(1, 7).flatmap(
    lambda n: st.tuples(st.booleans(), st.lists(st.booleans(), min_size=n, max_size=n),
                        st.lists(st.fractions(F(1, 10), 10, max_denominator=20), min_size=n, max_size=n)))


@settings(max_examples=200, deadline=None)
@given(alternating)
def test_removing_end_rungs_never_increases_count(data):
    first_zero, sats, steps = data
    kinds, r = [], F(1, 10)
    rhos = []
    for n, _ in enumerate(sats):
        kinds.append(ix.INDEX0 if (n % 2 == 0) == first_zero else ix.INDEX1)
        r = r + steps[n]
        rhos.append(r)
    conds = fake_conditions(list(zip(kinds, sats)), rhos)
    full = ix.verdict_from_conditions(conds, F(1, 4)).guaranteed_count
    if len(conds) > 1:
        assert ix.verdict_from_conditions(conds[1:], F(1, 4)).guaranteed_count <= full
        assert ix.verdict_from_conditions(conds[:-1], F(1, 4)).guaranteed_count <= full
    flipped = [ix.RhoCondition(c.kind, c.rho, {}, {}, {}, {}, False if n == 0 else c.satisfied)
               for n, c in enumerate(conds)]
    assert ix.verdict_from_conditions(flipped, F(1, 4)).guaranteed_count <= full


def test_propose_ladder_is_reverified(example, consts):
    ladder = ix.propose_ladder(example, consts, F(1, 16), 40, n=24)
    assert len(ladder) >= 3
    v = ix.multiplicity(example, consts, ladder)
    assert v.guaranteed_count == len(ladder) - 1
