import math
import time
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import example_doc, simple_doc
from conekit.constants import (Matrix2, compute_all, inverse_order_preserving, kernel_functional,
                               mu_monotonicity_check)
from conekit.errors import MatrixError
from conekit.problem import build

C2 = 45 * math.sqrt(3) / 128
D1_MATRIX = Matrix2(F(5, 8), F(1, 12), F(1, 8), F(3, 4))


def test_example_masses(consts):
    assert (consts.eq(1).m, consts.eq(1).M) == (8, 16)
    assert (consts.eq(2).m, consts.eq(2).M) == (F(384, 5), F(768, 5))


def test_example_c_values(consts):
    t = consts.table()
    assert t["c_1"] == F(1, 4)
    assert t["c_2"] == pytest.approx(C2, abs=1e-10)
    assert (t["c_11"], t["c_12"], t["c_21"]) == (F(1, 4),) * 3
    assert t["c_22"] == pytest.approx(C2, abs=1e-10)
    assert t["c"] == F(1, 4)


def test_example_D_theta_QS(consts):
    e1, e2 = consts.eq(1), consts.eq(2)
    # (1 - 3/8)(1 - 1/4) - (1/2)(1/3)(1/4)(1/4)
    assert e1.D == F(11, 24)
    assert e1.D_under == F(173, 216)
    assert (e2.D, e2.D_under) == (F(43, 54), F(209, 243))
    assert e1.theta == (F(18, 11), F(2, 11), F(3, 11), F(15, 11))
    assert e2.theta == (F(466, 387), F(16, 387), F(9, 86), F(45, 43))
    assert (e1.Q, e1.S) == (F(1, 16), F(13, 240))
    assert (e2.Q, e2.S) == (F(89, 2430), F(101, 4860))


def test_example_kernel_functionals(example, consts):
    assert kernel_functional(example, 1, 1, 0, 1) == F(3, 32)
    assert kernel_functional(example, 1, 1, F(1, 4), F(3, 4)) == F(1, 16)
    assert kernel_functional(example, 2, 2, F(1, 4), F(3, 4)) == F(3985, 497664)
    t = consts.table()
    assert [t[f"int_K_{ij}"] for ij in ("11", "12", "21", "22")] == [F(3, 32), F(3, 32), F(11, 972), F(11, 972)]
    # the (2,1) functional equals the (2,2) one: atoms at 1/3 and 2/3 are mirror images
    assert t["int_ab_K_21"] == t["int_ab_K_22"] == F(3985, 497664)


def test_all_exact_rationals(consts):
    for name, value in consts.table().items():
        if name not in ("c_2", "c_22", "gamma_norm_22"):  # 45*sqrt(3)/128 and sqrt(3)/27
            assert isinstance(value, (int, F)), name


def test_unperturbed_case():
    k = compute_all(build(simple_doc(beta={"atoms": []}, delta={"atoms": []})))
    for i in (1, 2):
        e = k.eq(i)
        assert (e.D, e.D_under) == (1, 1)
        assert e.theta == (1, 0, 0, 1)
        assert (e.Q, e.S) == (0, 0)


def test_theta_times_D_is_identity(consts, example):
    for i in (1, 2):
        h = (example.bt(i, 1).h_hi, example.bt(i, 2).h_hi)
        theta = consts.theta_matrix(i)
        D = np.array(consts.d_matrix(i, h).rows(), dtype=object)
        prod = np.array(theta, dtype=object) @ D
        assert prod.tolist() == [[1, 0], [0, 1]]


@pytest.mark.parametrize("i, j", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_D_decreases_in_h_hi(i, j):
    base = compute_all(build(example_doc())).eq(i).D
    doc = example_doc()
    term = next(b for b in doc["boundary"] if (b["i"], b["j"]) == (i, j))
    term["h_hi"] = str(F(term["h_hi"]) + F(1, 100))
    assert compute_all(build(doc)).eq(i).D < base


def test_numeric_route_agrees_with_exact_route(example):
    """A non-polynomial spelling of g = 1 forces the nested-quadrature fallback."""
    doc = example_doc()
    for eq in doc["equations"]:
        eq["g"] = "exp(0*s)"
    numeric = build(doc)
    for i, j in [(1, 1), (2, 1), (2, 2)]:
        for lo, hi in [(0, 1), (F(1, 4), F(3, 4))]:
            want = kernel_functional(example, i, j, lo, hi)
            got = kernel_functional(numeric, i, j, lo, hi, tol=1e-13)
            assert isinstance(got, float)
            assert got == pytest.approx(float(want), abs=1e-12)
    k = compute_all(numeric)
    assert k.eq(2).m == pytest.approx(384 / 5, abs=1e-8)
    assert k.eq(2).M == pytest.approx(768 / 5, abs=1e-8)


def test_density_measure_exact():
    doc = simple_doc(beta={"atoms": [], "density": "1"})
    p = build(doc)
    # K(s) = int_0^1 k_1(t, s) dt = s(1 - s)/2 ; its integral over [0,1] is 1/12
    assert kernel_functional(p, 1, 1, 0, 1) == F(1, 12)


# ---------------------------------------------------------------- the matrix lemma

def test_identity_inverse():
    I = Matrix2(1, 0, 0, 1)
    assert inverse_order_preserving(I) == I


def test_D1_matrix_inverse():
    inv = inverse_order_preserving(D1_MATRIX)
    assert D1_MATRIX.det == F(11, 24)
    assert 1 / D1_MATRIX.det == F(24, 11)
    assert min(inv.a, -inv.b, -inv.c, inv.d) >= 0
    assert (inv.a, -inv.b, -inv.c, inv.d) == (F(18, 11), F(2, 11), F(3, 11), F(15, 11))


def test_matrix_errors():
    with pytest.raises(MatrixError):
        inverse_order_preserving(Matrix2(1, 2, 2, 1))
    with pytest.raises(MatrixError):
        inverse_order_preserving(Matrix2(1, -1, 0, 1))
    with pytest.raises(MatrixError):
        mu_monotonicity_check(D1_MATRIX, 1, 1, 1)
    with pytest.raises(MatrixError):
        mu_monotonicity_check(D1_MATRIX, 2, -1, 1)


def test_mu_examples():
    assert mu_monotonicity_check(Matrix2(F(1), 0, 0, F(1)), 2, 1, 1)
    assert mu_monotonicity_check(Matrix2(F(1, 2), 0, 0, F(1, 2)), 2, 1, 1)
    assert mu_monotonicity_check(D1_MATRIX, F(3, 2), 1, 2)


def random_lemma_matrices(rng, n):
    a, b, c, d = rng.uniform(0, 2, (4, n))
    keep = a * d - b * c > 1e-3
    return a[keep], b[keep], c[keep], d[keep]


def test_order_preservation_ten_thousand():
    rng = np.random.default_rng(7)
    count = 0
    start = time.perf_counter()
    while count < 10_000:
        for a, b, c, d in zip(*random_lemma_matrices(rng, 4000)):
            inv = inverse_order_preserving(Matrix2(a, b, c, d))
            p0, q0 = rng.uniform(-5, 5, 2)
            dp, dq = rng.uniform(0, 5, 2)
            x0 = inv.apply(p0, q0)
            x1 = inv.apply(p0 + dp, q0 + dq)
            assert x1[0] >= x0[0] - 1e-12 and x1[1] >= x0[1] - 1e-12
            count += 1
            if count == 10_000:
                break
    assert time.perf_counter() - start < 5


def test_mu_monotonicity_ten_thousand():
    rng = np.random.default_rng(11)
    count = 0
    while count < 10_000:
        for a, b, c, d in zip(*random_lemma_matrices(rng, 4000)):
            mu = 1 + rng.uniform(1e-3, 5)
            p, q = rng.uniform(0, 5, 2)
            assert mu_monotonicity_check(Matrix2(F(a), F(b), F(c), F(d)), F(mu), F(p), F(q))
            count += 1
            if count == 10_000:
                break


fracs = st.fractions(0, 3, max_denominator=50)


@settings(max_examples=300, deadline=None)
@given(fracs, fracs, fracs, fracs, fracs, fracs)
def test_inverse_is_inverse(a, b, c, d, p, q):
    M = Matrix2(a, b, c, d)
    if M.det <= 0:
        with pytest.raises(MatrixError):
            inverse_order_preserving(M)
        return
    inv = inverse_order_preserving(M)
    assert M.apply(*inv.apply(p, q)) == (p, q)
    assert inv.a >= 0 and inv.d >= 0 and inv.b <= 0 and inv.c <= 0
