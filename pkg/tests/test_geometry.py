import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochbidomain.geometry import (ConductivityField, Domain, assemble_stiffness, build_basis, evaluate,
                                    project)


def test_first_mode_closed_form(dn_domain):
    b = build_basis(dn_domain, 1, quad_order=40)
    assert b.eigenvalues[0] == pytest.approx((math.pi / 2) ** 2, rel=1e-14)
    assert b.eigenvalues[0] == pytest.approx(2.4674, abs=1e-4)
    x = np.linspace(0, 1, 7)[:, None]
    np.testing.assert_allclose(evaluate([1.0], b, x), math.sqrt(2) * np.sin(math.pi * x[:, 0] / 2), atol=1e-14)
    assert b.mass_matrix()[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_second_mode_and_h1_orthogonality(dn_domain):
    b = build_basis(dn_domain, 2)
    assert b.eigenvalues[1] == pytest.approx((3 * math.pi / 2) ** 2, rel=1e-14)
    assert b.eigenvalues[1] == pytest.approx(22.2066, abs=1e-4)
    S = b.laplacian_stiffness()
    assert abs(S[0, 1]) < 1e-10
    np.testing.assert_allclose(np.diag(S), b.eigenvalues, rtol=1e-10)


@pytest.mark.parametrize("faces,lengths", [({"x0"}, (1.0,)), ({"x0", "x1"}, (2.0,)), ({"x1"}, (0.7,)),
                                           ({"x0", "y1"}, (1.0, 0.5)), ({"y0"}, (1.0, 1.0))])
def test_orthonormal_and_dirichlet_trace(faces, lengths):
    dom = Domain(lengths, frozenset(faces))
    b = build_basis(dom, 12)
    assert np.abs(b.mass_matrix() - np.eye(12)).max() < 1e-10
    S = b.laplacian_stiffness()
    assert np.abs(S - np.diag(b.eigenvalues)).max() < 1e-9 * b.eigenvalues.max()
    assert np.all(np.diff(b.eigenvalues) >= -1e-12)
    for face in faces:
        assert np.abs(b.mode_values(dom.face_points(face))).max() < 1e-12


def test_mode_ordering_is_reproducible():
    dom = Domain((1.0, 1.0), frozenset({"x0", "y0"}))
    assert build_basis(dom, 9).modes == build_basis(dom, 9).modes


def test_domain_rejections():
    with pytest.raises(ValueError, match="nonempty"):
        Domain((1.0,), frozenset())
    with pytest.raises(ValueError):
        Domain((1.0, -1.0), frozenset({"x0"}))
    with pytest.raises(ValueError):
        Domain((1.0,), frozenset({"y0"}))
    with pytest.raises(ValueError):
        build_basis(Domain((1.0,), frozenset({"x0"})), 0)


def test_identity_conductivity_gives_eigenvalues(dn_domain):
    b = build_basis(dn_domain, 6)
    K = assemble_stiffness(b, ConductivityField(1, 1.0, 1.0, 1.0, 1.0), "intra")
    np.testing.assert_allclose(K, np.diag(b.eigenvalues), atol=1e-9)


def test_stiffness_bilinear_and_symmetric(geo2d):
    b, c = geo2d.basis, geo2d.conductivity
    K = assemble_stiffness(b, c, "extra")
    assert np.array_equal(K, K.T)
    np.testing.assert_allclose(assemble_stiffness(b, c.scaled(2.0), "extra"), 2 * K, rtol=1e-13, atol=1e-12)


def test_stiffness_dimension_mismatch(geo2d, cond1d):
    with pytest.raises(ValueError, match="1D"):
        assemble_stiffness(geo2d.basis, cond1d, "intra")


def test_project_examples(dn_domain):
    b = build_basis(dn_domain, 5)
    e = lambda k: (lambda x: b.mode_values(x)[k])
    np.testing.assert_allclose(project(e(1), b), np.eye(5)[1], atol=1e-12)
    np.testing.assert_allclose(project(lambda x: np.zeros(len(x)), b), np.zeros(5))
    f = lambda x: 3 * b.mode_values(x)[0] - 5 * b.mode_values(x)[2]
    np.testing.assert_allclose(project(f, b), [3, 0, -5, 0, 0], atol=1e-10)


def test_evaluate_zero_and_length_check(dn_domain):
    b = build_basis(dn_domain, 3)
    assert np.all(evaluate(np.zeros(3), b, np.array([[0.2], [0.9]])) == 0)
    with pytest.raises(ValueError):
        evaluate(np.zeros(4), b, np.array([[0.2]]))


def test_conductivity_checks(geo2d):
    rep = geo2d.conductivity.check(geo2d.basis.points)
    assert rep["ok"]
    fib = lambda p: np.column_stack([np.cos(p[:, 1]), np.sin(p[:, 1])])
    c = ConductivityField(2, 1.0, 0.2, 1.5, 0.4, kind="axisymmetric", fiber_direction=fib)
    assert c.check(geo2d.basis.points)["ok"]
    assert c.proportionality() is None
    assert ConductivityField(2, 2.0, 1.0, 1.0, 0.5).proportionality() == pytest.approx(2.0)
    with pytest.raises(ValueError):
        ConductivityField(1, 0.0, 1.0, 1.0, 1.0)


@given(st.lists(st.floats(-3, 3), min_size=10, max_size=10))
def test_parseval(u):
    b = build_basis(Domain((1.0, 0.5), frozenset({"x0", "y1"})), 10)
    u = np.array(u)
    assert b.integrate(b.field(u) ** 2) == pytest.approx(u @ u, rel=1e-8, abs=1e-8)


@given(st.lists(st.floats(-1, 1), min_size=10, max_size=10).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_stiffness_sandwich_and_poincare(xi):
    dom = Domain((1.0, 0.5), frozenset({"x0", "y1"}))
    cond = ConductivityField(2, 1.2, 0.3, 0.9, 0.6, fiber_angle=0.4)
    b = build_basis(dom, 10)
    xi = np.array(xi) / np.linalg.norm(xi)
    lam_form = xi @ (b.eigenvalues * xi)
    m, M = cond.ellipticity
    for which in ("intra", "extra"):
        q = xi @ assemble_stiffness(b, cond, which) @ xi
        assert m * lam_form * (1 - 1e-10) <= q <= M * lam_form * (1 + 1e-10)
    assert xi @ xi <= lam_form / b.eigenvalues[0] * (1 + 1e-12)
