"""Finite element forms of the momentum and concentration equations.

Sign conventions follow the weak momentum balance

    (u_t, v) + a0(u, v) + a1(u, u, v) + c(v, p) + friction = (Div K(C) + f, v)

with ``a0(u, v) = 2 nu0 (eps(u), eps(v))`` and ``c(v, q) = -(div v, q)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigError
from .spaces import DiscreteSpaces

BILINEAR_DEGREE = 4
TRILINEAR_DEGREE = 6


def _assemble_scalar(spaces: DiscreteSpaces, local: np.ndarray, rows=None, cols=None,
                     shape=None) -> sp.csr_matrix:
    """Sum element matrices ``local[e, i, j]`` into a sparse matrix.

    The COO -> CSR conversion sums duplicates in a fixed order, so the
    result is bit-reproducible.
    """
    rows = spaces.elem_dofs if rows is None else rows
    cols = spaces.elem_dofs if cols is None else cols
    if shape is None:
        shape = (spaces.n_nodes, spaces.n_nodes)
    I = np.broadcast_to(rows[:, :, None], local.shape).ravel()
    J = np.broadcast_to(cols[:, None, :], local.shape).ravel()
    return sp.coo_matrix((local.ravel(), (I, J)), shape=shape).tocsr()


def _assemble_vector(spaces: DiscreteSpaces, local: np.ndarray, n: int | None = None) -> np.ndarray:
    n = spaces.n_nodes if n is None else n
    return np.bincount(spaces.elem_dofs.ravel(), weights=local.ravel(), minlength=n)


def local_mass(q) -> np.ndarray:
    return np.einsum("eq,qi,qj->eij", q.weights, q.phi, q.phi)


def local_gradient_products(q) -> np.ndarray:
    """``S[e, a, b, i, j] = int d_a phi_i d_b phi_j`` on each element."""
    return np.einsum("eq,eqia,eqjb->eabij", q.weights, q.grad, q.grad)


def local_divergence(q) -> np.ndarray:
    """``D[e, c, k, j] = -int psi_k d_c phi_j``."""
    return -np.einsum("eq,qk,eqjc->eckj", q.weights, q.psi, q.grad)


@dataclass
class FormsCache:
    """Matrices that do not change during a run.

    ``S`` is the scalar P2 Laplacian (without coefficient) and ``H1_u`` the
    velocity H1 Gram matrix, used by diagnostics.
    """

    M_u: sp.csr_matrix
    A0: sp.csr_matrix
    B_div: sp.csr_matrix
    M_c: sp.csr_matrix
    B0: sp.csr_matrix
    G: sp.csr_matrix
    S: sp.csr_matrix
    H1_u: sp.csr_matrix
    nu0: float
    d: float


def viscous_matrix(spaces: DiscreteSpaces, nu0: float, degree: int = BILINEAR_DEGREE) -> sp.csr_matrix:
    S = local_gradient_products(spaces.quad(degree))
    blocks = [[2 * S[:, 0, 0] + S[:, 1, 1], S[:, 1, 0]],
              [S[:, 0, 1], S[:, 0, 0] + 2 * S[:, 1, 1]]]
    mats = [[_assemble_scalar(spaces, nu0 * blk) for blk in row] for row in blocks]
    return sp.bmat(mats, format="csr")


def assemble_constant_forms(spaces: DiscreteSpaces, nu0: float, d: float,
                            g=None, degree: int = BILINEAR_DEGREE) -> FormsCache:
    """Assemble mass, viscous, divergence, diffusion and reaction matrices.

    Parameters
    ----------
    nu0, d : float
        Viscosity and mass diffusivity, both strictly positive.
    g : callable or float, optional
        Reaction coefficient of the concentration equation, evaluated at
        quadrature points (n, 2) -> (n,). Zero when omitted.
    """
    if not nu0 > 0:
        raise ConfigError(f"viscosity nu0 must be positive, got {nu0}")
    if not d > 0:
        raise ConfigError(f"diffusivity d must be positive, got {d}")
    q = spaces.quad(degree)
    M = _assemble_scalar(spaces, local_mass(q))
    Sl = local_gradient_products(q)
    S = _assemble_scalar(spaces, Sl[:, 0, 0] + Sl[:, 1, 1])
    Z = sp.csr_matrix(M.shape)
    M_u = sp.bmat([[M, None], [None, M]], format="csr")
    A0 = viscous_matrix(spaces, nu0, degree)
    D = local_divergence(q)
    shape = (spaces.n_pressure, spaces.n_nodes)
    B_div = sp.hstack([
        _assemble_scalar(spaces, D[:, c], rows=spaces.p1_dofs, shape=shape) for c in (0, 1)
    ], format="csr")
    G = reaction_matrix(spaces, g, degree=max(degree, 6))
    H1 = sp.bmat([[M + S, Z], [Z, M + S]], format="csr")
    return FormsCache(M_u=M_u, A0=A0, B_div=B_div, M_c=M, B0=(d * S).tocsr(), G=G,
                      S=S, H1_u=H1, nu0=float(nu0), d=float(d))


def reaction_matrix(spaces: DiscreteSpaces, g, degree: int = 6) -> sp.csr_matrix:
    q = spaces.quad(degree)
    if g is None:
        gv = np.zeros(q.weights.shape)
    elif np.isscalar(g):
        gv = np.full(q.weights.shape, float(g))
    else:
        gv = np.asarray(g(q.points.reshape(-1, 2)), dtype=float).reshape(q.weights.shape)
    return _assemble_scalar(spaces, np.einsum("eq,qi,qj->eij", q.weights * gv, q.phi, q.phi))


def load_vector(spaces: DiscreteSpaces, f, degree: int = 6) -> np.ndarray:
    """``int f . v`` for a vector field (n, 2) -> (n, 2), or ``int f v`` for a scalar."""
    q = spaces.quad(degree)
    vals = np.asarray(f(q.points.reshape(-1, 2)), dtype=float)
    ne, nq = q.weights.shape
    if vals.ndim == 1:
        return _assemble_vector(spaces, np.einsum("eq,eq,qi->ei", q.weights, vals.reshape(ne, nq), q.phi))
    vals = vals.reshape(ne, nq, 2)
    return np.concatenate([
        _assemble_vector(spaces, np.einsum("eq,eq,qi->ei", q.weights, vals[..., c], q.phi))
        for c in (0, 1)
    ])


def skew_convection_matrix(spaces: DiscreteSpaces, u: np.ndarray,
                           degree: int = TRILINEAR_DEGREE) -> sp.csr_matrix:
    """Scalar P2 matrix of ``xi -> b1_sk(u, xi, .)``.

    ``N[i, j] = 1/2 int (u . grad phi_j) phi_i - (u . grad phi_i) phi_j``,
    antisymmetric by construction.
    """
    q = spaces.quad(degree)
    N = spaces.n_nodes
    uc = np.asarray(u).reshape(2, N)[:, spaces.elem_dofs]     # (2, ne, 6)
    uq = np.einsum("cei,qi->eqc", uc, q.phi)                  # (ne, nq, 2)
    adv = np.einsum("eqc,eqjc->eqj", uq, q.grad)              # u . grad phi_j
    T = np.einsum("eq,eqj,qi->eij", q.weights, adv, q.phi)
    return _assemble_scalar(spaces, 0.5 * (T - T.transpose(0, 2, 1)))


def assemble_convection(spaces: DiscreteSpaces, u: np.ndarray,
                        degree: int = TRILINEAR_DEGREE) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Skew-symmetrized convection for a frozen advecting velocity ``u``.

    Returns the velocity matrix (for ``a1_sk(u, ., .)``, block diagonal) and
    the concentration matrix (for ``b1_sk(u, ., .)``).
    """
    Ns = skew_convection_matrix(spaces, u, degree)
    return sp.bmat([[Ns, None], [None, Ns]], format="csr"), Ns


def convection_forms(spaces: DiscreteSpaces, u, v, w, degree: int = TRILINEAR_DEGREE):
    """Raw and skew trilinear forms ``a1(u, v, w)`` for velocity coefficient vectors."""
    q = spaces.quad(degree)
    N = spaces.n_nodes

    def at_q(x):
        xc = np.asarray(x).reshape(2, N)[:, spaces.elem_dofs]
        vals = np.einsum("cei,qi->eqc", xc, q.phi)
        grads = np.einsum("cei,eqia->eqca", xc, q.grad)
        return vals, grads

    uq, _ = at_q(u)
    vq, gv = at_q(v)
    wq, gw = at_q(w)
    raw = np.sum(q.weights * np.einsum("eqa,eqca,eqc->eq", uq, gv, wq))
    swap = np.sum(q.weights * np.einsum("eqa,eqca,eqc->eq", uq, gw, vq))
    return float(raw), float(0.5 * (raw - swap))


def korteweg_tensor(gradC, k: float) -> np.ndarray:
    """Korteweg stress for concentration gradient(s) ``gradC`` (..., 2).

    Returns an array (..., 2, 2) with ``K11 = k C_y^2``, ``K22 = k C_x^2``
    and ``K12 = K21 = -k C_x C_y``.
    """
    if k < 0:
        raise ConfigError(f"Korteweg coefficient k must be nonnegative, got {k}")
    g = np.asarray(gradC, dtype=float)
    cx, cy = g[..., 0], g[..., 1]
    K = np.empty(g.shape[:-1] + (2, 2))
    K[..., 0, 0] = k * cy * cy
    K[..., 1, 1] = k * cx * cx
    K[..., 0, 1] = -k * cx * cy
    K[..., 1, 0] = K[..., 0, 1]
    return K


def assemble_korteweg_load(spaces: DiscreteSpaces, C: np.ndarray, k: float,
                           degree: int = TRILINEAR_DEGREE) -> np.ndarray:
    """Velocity load ``v -> -k sum_T int_T lap(C) grad(C) . v``.

    The Laplacian of the P2 concentration is constant on each triangle.
    """
    if k < 0:
        raise ConfigError(f"Korteweg coefficient k must be nonnegative, got {k}")
    if k == 0:
        return np.zeros(spaces.n_velocity)
    q = spaces.quad(degree)
    C = np.asarray(C, dtype=float)
    lap = spaces.elementwise_laplacian(C)
    gradC = np.einsum("ei,eqia->eqa", C[spaces.elem_dofs], q.grad)
    coef = -k * lap[:, None] * q.weights
    return np.concatenate([
        _assemble_vector(spaces, np.einsum("eq,eq,qi->ei", coef, gradC[..., c], q.phi))
        for c in (0, 1)
    ])


def korteweg_gradient_defect(spaces: DiscreteSpaces, C: np.ndarray, u: np.ndarray, k: float,
                             degree: int = TRILINEAR_DEGREE) -> float:
    """``-(k/2) int |grad C|^2 div u``: the term dropped by the reduced Korteweg form.

    It vanishes for exactly divergence-free ``u``; for discrete velocities it
    measures the consistency gap of the reduced form.
    """
    q = spaces.quad(degree)
    N = spaces.n_nodes
    gradC = np.einsum("ei,eqia->eqa", np.asarray(C)[spaces.elem_dofs], q.grad)
    uc = np.asarray(u).reshape(2, N)[:, spaces.elem_dofs]
    div = np.einsum("ei,eqi->eq", uc[0], q.grad[..., 0]) + np.einsum("ei,eqi->eq", uc[1], q.grad[..., 1])
    return float(-0.5 * k * np.sum(q.weights * np.sum(gradC**2, axis=-1) * div))


def symmetric_gradient_norm_sq(spaces: DiscreteSpaces, u: np.ndarray, degree: int = BILINEAR_DEGREE) -> float:
    """``||eps(u)||^2`` in L2, computed pointwise at quadrature nodes."""
    q = spaces.quad(degree)
    N = spaces.n_nodes
    uc = np.asarray(u).reshape(2, N)[:, spaces.elem_dofs]
    g = np.einsum("cei,eqia->eqca", uc, q.grad)
    eps = 0.5 * (g + np.swapaxes(g, -1, -2))
    return float(np.sum(q.weights * np.sum(eps**2, axis=(-1, -2))))
