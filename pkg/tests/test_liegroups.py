"""Tests for the matrix group catalog.

Exponentials are pinned against high-precision series references (mpmath)
and against scipy-free matrix-power series computed in the test itself;
derivative flow through exp is compared to central differences.
"""

import mpmath
import numpy as np
import pytest

from lpmech import _dual
from lpmech.errors import DimensionMismatch
from lpmech.liegroups import (
    Ad,
    MatrixLieGroup,
    abelian,
    ad,
    coad,
    heisenberg3,
    so3,
    structure_constants,
)


def series_expm(M, terms=30):
    """Plain truncated exponential series; independent reference route."""
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


# ---------------------------------------------------------------------------
# rotation group


def test_so3_exp_matches_series_reference():
    G = so3()
    rng = np.random.default_rng(2)
    for _ in range(20):
        xi = rng.standard_normal(3)
        R = G.exp(xi)
        ref = series_expm(G.hat(xi), terms=40)
        assert np.allclose(R, ref, atol=1e-13)
        assert G.is_element(R)


def test_so3_exp_high_precision_value():
    # rotation about a skew axis, reference entries from 50-digit arithmetic
    mpmath.mp.dps = 50
    xi = np.array([0.3, -0.4, 0.12])
    th = mpmath.sqrt(mpmath.mpf("0.3") ** 2 + mpmath.mpf("-0.4") ** 2 + mpmath.mpf("0.12") ** 2)
    A = mpmath.sin(th) / th
    B = (1 - mpmath.cos(th)) / th**2
    K = np.array(
        [[0, -0.12, -0.4], [0.12, 0, -0.3], [0.4, 0.3, 0]], dtype=object
    )
    Kf = K.astype(float)
    ref = np.eye(3) + float(A) * Kf + float(B) * (Kf @ Kf)
    R = so3().exp(xi)
    assert np.max(np.abs(R - ref)) < 1e-15


def test_so3_exp_small_angle_series_branch():
    G = so3()
    xi = np.array([1e-6, -2e-6, 0.5e-6])
    R = G.exp(xi)
    ref = series_expm(G.hat(xi), terms=6)
    assert np.allclose(R, ref, atol=1e-18, rtol=0.0)
    # derivative through the series branch agrees with finite differences
    lev = _dual.fresh_level()
    dxi = np.array(
        [_dual.Dual(1e-6, 1.0, lev), _dual.Dual(-2e-6, 0.0, lev), _dual.Dual(0.5e-6, 0.0, lev)],
        dtype=object,
    )
    Rd = G.exp(dxi)
    h = 1e-7
    Rp = G.exp(xi + [h, 0, 0])
    Rm = G.exp(xi - [h, 0, 0])
    fd = (Rp - Rm) / (2 * h)
    got = np.array([[_dual.tangent_part(Rd[i, j], lev) for j in range(3)] for i in range(3)])
    assert np.allclose(got, fd, atol=1e-6)


def test_so3_exp_log_round_trip():
    G = so3()
    rng = np.random.default_rng(3)
    for _ in range(30):
        xi = rng.standard_normal(3)
        nrm = np.linalg.norm(xi)
        if nrm >= np.pi:
            xi *= (np.pi - 1e-3) / nrm
        back = G.log(G.exp(xi))
        assert np.allclose(back, xi, atol=1e-9)


def test_so3_log_near_pi():
    G = so3()
    axis = np.array([1.0, 2.0, 2.0]) / 3.0
    xi = (np.pi - 1e-8) * axis
    back = G.log(G.exp(xi))
    assert np.allclose(back, xi, atol=1e-6)


def test_so3_dual_exp_derivative_matches_fd():
    G = so3()
    xi = np.array([0.4, 0.7, -0.3])
    lev = _dual.fresh_level()
    for j in range(3):
        seed = np.array(
            [_dual.Dual(xi[i], 1.0 if i == j else 0.0, lev) for i in range(3)],
            dtype=object,
        )
        Rd = G.exp(seed)
        h = 1e-6
        e = np.zeros(3)
        e[j] = h
        fd = (G.exp(xi + e) - G.exp(xi - e)) / (2 * h)
        got = np.array(
            [[_dual.tangent_part(Rd[i, k], lev) for k in range(3)] for i in range(3)]
        )
        assert np.allclose(got, fd, atol=1e-9)


def test_so3_structure_constants_are_cross_product():
    G = so3()
    c = structure_constants(G)
    eps = np.zeros((3, 3, 3))
    for a, b, g in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[g, a, b] = 1.0
        eps[g, b, a] = -1.0
    assert np.allclose(c, eps, atol=1e-12)


def test_so3_is_element_rejects_reflections_and_junk():
    G = so3()
    assert not G.is_element(np.diag([1.0, 1.0, -1.0]))
    assert not G.is_element(np.eye(3) * 1.1)
    assert G.is_element(np.eye(3))


def test_hat_unhat_round_trip_and_dual_preservation():
    G = so3()
    v = np.array([0.2, -0.7, 1.1])
    assert np.allclose(G.unhat(G.hat(v)), v, atol=1e-13)
    lev = _dual.fresh_level()
    vd = np.array([_dual.Dual(0.2, 1.0, lev), -0.7, 1.1], dtype=object)
    back = G.unhat(G.hat(vd))
    assert _dual.tangent_part(back[0], lev) == pytest.approx(1.0)
    assert _dual.real_part(back[1]) == pytest.approx(-0.7)


def test_hat_rejects_wrong_length():
    with pytest.raises(DimensionMismatch):
        so3().hat(np.array([1.0, 2.0]))


# ---------------------------------------------------------------------------
# adjoint machinery


def test_ad_equals_structure_constant_contraction():
    G = so3()
    c = structure_constants(G)
    rng = np.random.default_rng(5)
    for _ in range(10):
        xi, eta = rng.standard_normal(3), rng.standard_normal(3)
        direct = ad(G, xi, eta)
        contracted = np.einsum("gab,a,b->g", c, xi, eta)
        assert np.allclose(direct, contracted, atol=1e-12)
        assert np.allclose(direct, np.cross(xi, eta), atol=1e-12)


def test_Ad_is_rotation_action_for_so3():
    G = so3()
    rng = np.random.default_rng(6)
    for _ in range(10):
        xi = rng.standard_normal(3) * 0.8
        v = rng.standard_normal(3)
        R = G.exp(xi)
        assert np.allclose(Ad(G, R, v), R @ v, atol=1e-12)


def test_coad_pairing_identity():
    G = so3()
    c = structure_constants(G)
    rng = np.random.default_rng(7)
    for _ in range(20):
        xi, mu, eta = (rng.standard_normal(3) for _ in range(3))
        lhs = np.dot(coad(c, xi, mu), eta)
        rhs = np.dot(mu, np.einsum("gab,a,b->g", c, xi, eta))
        assert np.isclose(lhs, rhs, atol=1e-12)


def test_closure_failure_raises():
    # [E01, E10] = diag(1, -1) leaves the span of {E01, E10}
    bad = MatrixLieGroup(
        "bad",
        2,
        np.array([[[0.0, 1.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]),
        lambda xi: np.eye(2),
        lambda g: np.zeros(2),
    )
    with pytest.raises(ValueError):
        structure_constants(bad)


# ---------------------------------------------------------------------------
# Heisenberg family


def test_heisenberg_multiplication_law():
    G = heisenberg3(1.0)
    rng = np.random.default_rng(8)
    for _ in range(10):
        a = rng.standard_normal(3)
        b = rng.standard_normal(3)
        ga, gb = G.exp(a), G.exp(b)
        prod = ga @ gb
        # the composition in exp coordinates (BCH with a single correction)
        expect = a + b + 0.5 * np.array([0.0, 0.0, a[0] * b[1] - a[1] * b[0]])
        assert np.allclose(G.log(prod), expect, atol=1e-12)


def test_heisenberg_exp_matches_series():
    G = heisenberg3(0.7)
    rng = np.random.default_rng(9)
    for _ in range(10):
        xi = rng.standard_normal(3)
        assert np.allclose(G.exp(xi), series_expm(G.hat(xi)), atol=1e-12)
        assert G.is_element(G.exp(xi))


def test_heisenberg_structure_constants_scale_with_coupling():
    for s in (1.0, 0.25, 0.0):
        c = structure_constants(heisenberg3(s))
        expect = np.zeros((3, 3, 3))
        expect[2, 0, 1] = s
        expect[2, 1, 0] = -s
        assert np.allclose(c, expect, atol=1e-12)


def test_heisenberg_zero_coupling_is_faithful_abelian():
    G = heisenberg3(0.0)
    xi = np.array([0.7, -0.4, 0.9])
    back = G.log(G.exp(xi))
    assert np.allclose(back, xi, atol=1e-14)
    c = structure_constants(G)
    assert np.max(np.abs(c)) == 0.0


def test_heisenberg_log_exp_round_trip_and_check():
    G = heisenberg3(1.3)
    rng = np.random.default_rng(10)
    for _ in range(10):
        xi = rng.standard_normal(3)
        assert np.allclose(G.log(G.exp(xi)), xi, atol=1e-12)
    assert not G.is_element(np.eye(4) + np.diag([0.1, 0, 0, 0]))


# ---------------------------------------------------------------------------
# translations


def test_abelian_group_behaves_additively():
    G = abelian(4)
    rng = np.random.default_rng(11)
    a, b = rng.standard_normal(4), rng.standard_normal(4)
    assert np.allclose(G.log(G.exp(a) @ G.exp(b)), a + b, atol=1e-13)
    assert np.max(np.abs(structure_constants(G))) == 0.0
    assert G.is_element(G.exp(a))
    assert not G.is_element(np.ones((5, 5)))


def test_abelian_exp_with_duals():
    G = abelian(2)
    lev = _dual.fresh_level()
    xi = np.array([_dual.Dual(0.3, 1.0, lev), 0.5], dtype=object)
    g = G.exp(xi)
    assert _dual.tangent_part(g[0, 2], lev) == pytest.approx(1.0)
    assert _dual.real_part(g[1, 2]) == pytest.approx(0.5)
