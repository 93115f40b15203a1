import numpy as np
import pytest

from miscible_slip.exceptions import ConfigError
from miscible_slip.forms import (assemble_constant_forms, assemble_convection, assemble_korteweg_load,
                                 convection_forms, korteweg_gradient_defect, korteweg_tensor, load_vector,
                                 reaction_matrix, skew_convection_matrix, symmetric_gradient_norm_sq)
from miscible_slip.geometry import build_rect_mesh
from miscible_slip.spaces import build_spaces, interpolate


@pytest.fixture(scope="module")
def S():
    return build_spaces(build_rect_mesh(4, 4))


@pytest.fixture(scope="module")
def F(S):
    return assemble_constant_forms(S, nu0=0.7, d=0.3, g=0.25)


def vec(S, f):
    return interpolate(S, f)


def test_mass_row_sums_are_basis_integrals(S, F):
    # P2 vertex functions integrate to 0 and edge functions to |T|/3 per triangle
    rows = np.asarray(F.M_c.sum(axis=1)).ravel()
    assert np.allclose(rows[:S.n_vertices], 0.0, atol=1e-15)
    area = S.mesh.areas()
    expect = np.zeros(S.n_nodes)
    np.add.at(expect, S.elem_dofs[:, 3:].ravel(), np.repeat(area / 3, 3))
    assert np.allclose(rows, expect, atol=1e-15)
    assert rows.sum() == pytest.approx(1.0, rel=1e-14)


def test_mass_and_stiffness_on_quadratics(S, F):
    c = vec(S, lambda p: p[:, 0] ** 2)
    assert c @ F.M_c @ c == pytest.approx(1 / 5, rel=1e-13)
    assert c @ F.S @ c == pytest.approx(4 / 3, rel=1e-13)
    assert np.allclose(F.S @ np.ones(S.n_nodes), 0.0, atol=1e-13)
    assert np.allclose((F.B0 - 0.3 * F.S).data, 0.0)


def test_reaction_matrix(S, F):
    assert abs(F.G - 0.25 * F.M_c).max() < 1e-15
    Gx = reaction_matrix(S, lambda p: p[:, 0])
    c = np.ones(S.n_nodes)
    assert c @ Gx @ c == pytest.approx(0.5, rel=1e-14)
    assert abs(reaction_matrix(S, None)).max() == 0


def test_viscous_form_kernel_and_value(S, F):
    for rigid in (lambda p: np.column_stack([np.ones(len(p)), np.zeros(len(p))]),
                  lambda p: np.column_stack([-p[:, 1], p[:, 0]])):
        assert np.allclose(F.A0 @ vec(S, rigid), 0.0, atol=1e-12)
    u = vec(S, lambda p: np.column_stack([p[:, 1] ** 2, np.zeros(len(p))]))
    # eps(u) has off-diagonal entries y, so 2 nu0 |eps|^2 = 2 nu0 * 2 * int y^2
    assert u @ F.A0 @ u == pytest.approx(2 * 0.7 * 2 / 3, rel=1e-13)
    assert abs(F.A0 - F.A0.T).max() < 1e-14


def test_divergence_matrix(S, F):
    u = vec(S, lambda p: np.column_stack([p[:, 0] ** 2, np.zeros(len(p))]))
    # sum over all pressure functions gives -int div u = -int 2x
    assert (F.B_div @ u).sum() == pytest.approx(-1.0, rel=1e-13)
    sol = vec(S, lambda p: np.column_stack([p[:, 1] ** 2, p[:, 0] ** 2]))
    assert np.allclose(F.B_div @ sol, 0.0, atol=1e-15)


def test_invalid_coefficients(S):
    with pytest.raises(ConfigError):
        assemble_constant_forms(S, 0.0, 1.0)
    with pytest.raises(ConfigError):
        assemble_constant_forms(S, 1.0, -1.0)


def test_load_vector(S):
    f = load_vector(S, lambda p: np.column_stack([np.full(len(p), 2.0), p[:, 0]]))
    N = S.n_nodes
    assert f[:N].sum() == pytest.approx(2.0, rel=1e-14)
    assert f[N:].sum() == pytest.approx(0.5, rel=1e-14)
    g = load_vector(S, lambda p: p[:, 0] * p[:, 1])
    assert g @ vec(S, lambda p: p[:, 0]) == pytest.approx(1 / 6, rel=1e-13)


def test_skew_convection_antisymmetric_and_consistent(S, rng):
    u = rng.standard_normal(S.n_velocity)
    Ns = skew_convection_matrix(S, u)
    assert abs(Ns + Ns.T).max() < 1e-15
    Nu, Nc = assemble_convection(S, u)
    assert Nu.shape == (S.n_velocity,) * 2 and Nc is not None
    v, w = rng.standard_normal(S.n_velocity), rng.standard_normal(S.n_velocity)
    raw, skew = convection_forms(S, u, v, w)
    assert w @ (Nu @ v) == pytest.approx(skew, rel=1e-12)
    assert np.isfinite(raw)


def test_skew_equals_raw_without_boundary_flux(S):
    # div u = 0 and w = 0 where u . n != 0, so the skew part is the raw form
    u = vec(S, lambda p: np.column_stack([p[:, 1] * (1 - p[:, 1]), np.zeros(len(p))]))
    v = vec(S, lambda p: np.column_stack([p[:, 0] * p[:, 1], p[:, 1]]))
    w = vec(S, lambda p: np.column_stack([p[:, 0] * (1 - p[:, 0]), np.zeros(len(p))]))
    raw, skew = convection_forms(S, u, v, w)
    # int y(1-y) * y * x(1-x) = (1/12)(1/6)
    assert raw == pytest.approx(1 / 72, rel=1e-13)
    assert skew == pytest.approx(raw, rel=1e-12)


def test_korteweg_tensor_formula(rng):
    g = rng.standard_normal((7, 2))
    K = korteweg_tensor(g, 0.3)
    assert np.allclose(K[:, 0, 0], 0.3 * g[:, 1] ** 2)
    assert np.allclose(K[:, 1, 1], 0.3 * g[:, 0] ** 2)
    assert np.array_equal(K[:, 0, 1], K[:, 1, 0])
    # trace equals k |grad C|^2
    assert np.allclose(np.trace(K, axis1=1, axis2=2), 0.3 * (g**2).sum(axis=1))
    with pytest.raises(ConfigError):
        korteweg_tensor(g, -1.0)


def test_korteweg_load_on_polynomials(S):
    k = 0.4
    C = vec(S, lambda p: p[:, 0] ** 2)
    v = vec(S, lambda p: np.column_stack([p[:, 1] ** 2, p[:, 0] * p[:, 1]]))
    # -k int lap(C) grad(C) . v = -k int 2 * 2x * y^2 = -2k/3
    assert assemble_korteweg_load(S, C, k) @ v == pytest.approx(-2 * k / 3, rel=1e-13)
    assert np.all(assemble_korteweg_load(S, C, 0.0) == 0)
    with pytest.raises(ConfigError):
        assemble_korteweg_load(S, C, -0.1)


def test_korteweg_gradient_defect(S):
    C = vec(S, lambda p: p[:, 0] + p[:, 1])
    u_free = vec(S, lambda p: np.column_stack([p[:, 1] ** 2, p[:, 0] ** 2]))
    assert abs(korteweg_gradient_defect(S, C, u_free, 1.0)) < 1e-14
    u = vec(S, lambda p: np.column_stack([p[:, 0], np.zeros(len(p))]))
    # -(k/2) int |grad C|^2 div u = -(1/2) * 2 * 1
    assert korteweg_gradient_defect(S, C, u, 1.0) == pytest.approx(-1.0, rel=1e-13)


def test_symmetric_gradient_norm(S):
    u = vec(S, lambda p: np.column_stack([p[:, 0] ** 2, p[:, 0]]))
    # eps = [[2x, 1/2], [1/2, 0]] -> int 4x^2 + 1/2
    assert symmetric_gradient_norm_sq(S, u) == pytest.approx(4 / 3 + 0.5, rel=1e-13)
