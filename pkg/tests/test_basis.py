from __future__ import annotations

import math

import numpy as np
import pytest

from fracldg.basis import (
    BasisSpec,
    DgField,
    edge_trace,
    edge_values,
    field_eval,
    gauss_rule,
    l2_project,
    legendre_derivatives,
    legendre_values,
    quad_l2_norm,
)
from fracldg.errors import InvalidArgumentError
from fracldg.meshes import build_spatial_mesh

from oracles import orthonormal_legendre_derivative, orthonormal_legendre_value


def test_gauss_rule_exactness():
    for npoints in (1, 2, 4, 7):
        quad = gauss_rule(npoints)
        assert quad.weights.sum() == pytest.approx(2.0, abs=1e-14)
        for p in range(2 * npoints):
            exact = 0.0 if p % 2 else 2.0 / (p + 1)
            got = float(np.sum(quad.weights * quad.nodes**p))
            assert got == pytest.approx(exact, abs=1e-13)


def test_gauss_rule_validation():
    with pytest.raises(InvalidArgumentError):
        gauss_rule(0)
    with pytest.raises(InvalidArgumentError):
        gauss_rule(65)


def test_legendre_values_match_pointwise_oracle():
    x = np.array([-1.0, -0.3, 0.0, 0.77, 1.0])
    V = legendre_values(4, x)
    Vd = legendre_derivatives(4, x)
    for q, xq in enumerate(x):
        for r in range(5):
            assert V[q, r] == pytest.approx(orthonormal_legendre_value(r, xq), abs=1e-13)
            assert Vd[q, r] == pytest.approx(
                orthonormal_legendre_derivative(r, xq), abs=1e-12
            )


def test_legendre_orthonormality():
    k = 5
    quad = gauss_rule(k + 1)
    V = legendre_values(k, quad.nodes)
    gram = (V * quad.weights[:, None]).T @ V
    np.testing.assert_allclose(gram, np.eye(k + 1), atol=1e-13)


def test_edge_values_are_endpoint_traces():
    e_minus, e_plus = edge_values(3)
    V = legendre_values(3, np.array([-1.0, 1.0]))
    np.testing.assert_allclose(e_minus, V[0], atol=1e-14)
    np.testing.assert_allclose(e_plus, V[1], atol=1e-14)


def test_basis_spec_properties():
    basis = BasisSpec(2)
    assert basis.dofs_per_cell == 9
    assert basis.default_quad_points == 5
    with pytest.raises(InvalidArgumentError):
        BasisSpec(-1)


def test_projection_reproduces_piecewise_polynomials():
    mesh = build_spatial_mesh(3, 4)
    basis = BasisSpec(2)
    rng = np.random.default_rng(7)
    f = DgField(rng.standard_normal((3, 4, 3, 3)), basis, mesh)
    # Evaluate the field away from interfaces and project it back.
    g = l2_project(lambda x, y: field_eval(f, x, y), mesh, basis)
    np.testing.assert_allclose(g.coeffs, f.coeffs, atol=1e-12)


def test_projection_error_decays_at_order_k_plus_1():
    basis = BasisSpec(1)

    def u(x, y):
        return np.sin(2 * math.pi * x) * np.cos(2 * math.pi * y)

    errs = []
    for n in (8, 16, 32):
        mesh = build_spatial_mesh(n, n)
        quad = gauss_rule(6)
        proj = l2_project(u, mesh, basis, quad)
        X = mesh.x_centers()[:, None, None, None] + 0.5 * mesh.hx * quad.nodes[None, None, :, None]
        Y = mesh.y_centers()[None, :, None, None] + 0.5 * mesh.hy * quad.nodes[None, None, None, :]
        diff = u(X, Y) - proj.eval_volume_quad(quad)
        errs.append(quad_l2_norm(diff, mesh, quad))
    rate = math.log(errs[0] / errs[-1]) / math.log(4.0)
    assert rate == pytest.approx(2.0, abs=0.1)


def test_l2_norm_matches_quadrature_norm():
    mesh = build_spatial_mesh(5, 3)
    basis = BasisSpec(2)
    rng = np.random.default_rng(11)
    f = DgField(rng.standard_normal((5, 3, 3, 3)), basis, mesh)
    quad = gauss_rule(5)
    assert f.l2_norm() == pytest.approx(
        quad_l2_norm(f.eval_volume_quad(quad), mesh, quad), rel=1e-12
    )


def test_field_shape_validation_and_arithmetic():
    mesh = build_spatial_mesh(2, 2)
    basis = BasisSpec(1)
    with pytest.raises(InvalidArgumentError):
        DgField(np.zeros((2, 2, 3, 3)), basis, mesh)
    f = DgField.zeros(mesh, basis)
    g = DgField(np.ones((2, 2, 2, 2)), basis, mesh)
    assert (f + g).coeffs.sum() == pytest.approx(16.0)
    assert (g - g).l2_norm() == 0.0
    assert (2.0 * g).coeffs[0, 0, 0, 0] == pytest.approx(2.0)


def test_field_eval_periodic_wrap():
    mesh = build_spatial_mesh(4, 4)
    basis = BasisSpec(1)
    rng = np.random.default_rng(3)
    f = DgField(rng.standard_normal((4, 4, 2, 2)), basis, mesh)
    x = np.array([0.1, 0.37, 0.61])
    y = np.array([0.2, 0.55, 0.9])
    np.testing.assert_allclose(
        field_eval(f, x, y), field_eval(f, x + 1.0, y - 1.0), atol=1e-13
    )


def test_edge_trace_consistent_with_field_eval():
    mesh = build_spatial_mesh(4, 3)
    basis = BasisSpec(2)
    rng = np.random.default_rng(5)
    f = DgField(rng.standard_normal((4, 3, 3, 3)), basis, mesh)
    # x-interface at x = 0.5 between cells (1, j) and (2, j), cell (1, 1).
    t = 0.3  # tangential reference coordinate inside cell (., 1)
    y_phys = 0.5 * (mesh.y_edges[1] + mesh.y_edges[2]) + 0.5 * mesh.hy * t
    left = edge_trace(f, (1, 1), "E", "-", t)
    right = edge_trace(f, (1, 1), "E", "+", t)
    assert left == pytest.approx(field_eval(f, 0.5, y_phys, side_x="-"), abs=1e-12)
    assert right == pytest.approx(field_eval(f, 0.5, y_phys, side_x="+"), abs=1e-12)
    # Periodic wrap: the W edge of column 0 sees column nx-1 from the left.
    xw = 0.0
    y_mid = 0.5 * (mesh.y_edges[0] + mesh.y_edges[1])
    assert edge_trace(f, (0, 0), "W", "-", 0.0) == pytest.approx(
        field_eval(f, xw, y_mid, side_x="-"), abs=1e-12
    )
    with pytest.raises(InvalidArgumentError):
        edge_trace(f, (0, 0), "Q", "-", 0.0)
    with pytest.raises(InvalidArgumentError):
        edge_trace(f, (0, 0), "E", "?", 0.0)


def test_save_debug_roundtrip(tmp_path):
    mesh = build_spatial_mesh(2, 3)
    basis = BasisSpec(1)
    rng = np.random.default_rng(9)
    f = DgField(rng.standard_normal((2, 3, 2, 2)), basis, mesh)
    csv = tmp_path / "field.txt"
    f.save_debug(csv)
    vals = np.loadtxt(csv)
    np.testing.assert_allclose(vals, f.coeffs.ravel(), atol=0.0)
    raw = tmp_path / "field.bin"
    f.save_debug(raw, binary=True)
    np.testing.assert_allclose(np.fromfile(raw), f.coeffs.ravel(), atol=0.0)
