"""Taylor-Hood (P2 velocity / P1 pressure) and P2 concentration spaces.

Velocity coefficient vectors are blocked by component: entries ``0..N-1``
hold the x-component at the N quadratic nodes and ``N..2N-1`` the
y-component. Quadratic nodes are the mesh vertices followed by the edge
midpoints.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .exceptions import ConstraintError
from .geometry import GAMMA0, GAMMA1, Mesh
from .quadrature import triangle_rule

_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))
_REF_DLAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def p2_basis(ref: np.ndarray) -> np.ndarray:
    """Values of the six quadratic shape functions at reference points (n, 2)."""
    r, s = ref[:, 0], ref[:, 1]
    l0, l1, l2 = 1.0 - r - s, r, s
    return np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])


def p2_ref_gradients(ref: np.ndarray) -> np.ndarray:
    """Reference gradients, shape (n, 6, 2)."""
    r, s = ref[:, 0], ref[:, 1]
    lam = np.column_stack([1.0 - r - s, r, s])
    d = _REF_DLAMBDA
    g = np.empty((len(ref), 6, 2))
    for i in range(3):
        g[:, i] = (4 * lam[:, i] - 1)[:, None] * d[i]
    for k, (a, b) in enumerate(_LOCAL_EDGES):
        g[:, 3 + k] = 4 * (lam[:, a, None] * d[b] + lam[:, b, None] * d[a])
    return g


def p1_basis(ref: np.ndarray) -> np.ndarray:
    r, s = ref[:, 0], ref[:, 1]
    return np.column_stack([1.0 - r - s, r, s])


@dataclass(frozen=True)
class ConstraintSet:
    """Homogeneous essential constraints: ``x[indices] = 0``."""

    indices: np.ndarray
    size: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if len(np.unique(idx)) != len(idx):
            raise ConstraintError("duplicate constrained indices")
        if len(idx) and (idx.min() < 0 or idx.max() >= self.size):
            raise ConstraintError("constrained index out of range")
        idx = np.sort(idx)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def values(self) -> np.ndarray:
        return np.zeros(len(self.indices))

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        mask[self.indices] = False
        return np.flatnonzero(mask)

    def merge(self, other: "ConstraintSet", offset: int, size: int) -> "ConstraintSet":
        return ConstraintSet(np.concatenate([self.indices, other.indices + offset]), size)


class QuadratureData:
    """Per-element geometry and basis data for one triangle rule."""

    def __init__(self, spaces: "DiscreteSpaces", degree: int):
        ref, w = triangle_rule(degree)
        self.degree = degree
        self.ref = ref
        self.phi = p2_basis(ref)                       # (nq, 6)
        self.psi = p1_basis(ref)                       # (nq, 3)
        refg = p2_ref_gradients(ref)                   # (nq, 6, 2)
        self.points = spaces.x0[:, None, :] + np.einsum("eab,qb->eqa", spaces.J, ref)
        self.weights = np.abs(spaces.detJ)[:, None] * w[None, :]
        self.grad = np.einsum("qib,eba->eqia", refg, spaces.Jinv)   # (ne, nq, 6, 2)


class DiscreteSpaces:
    """Degree-of-freedom maps, constraints and element geometry for a mesh.

    Parameters
    ----------
    mesh : Mesh
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        tri = mesh.triangles
        nv = mesh.n_vertices
        local = np.concatenate([tri[:, [a, b]] for a, b in _LOCAL_EDGES])
        key = np.sort(local, axis=1)
        edges, inverse = np.unique(key, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).ravel()
        nt = len(tri)
        self.edges = edges
        self.n_vertices = nv
        self.n_edges = len(edges)
        self.n_nodes = nv + len(edges)
        edge_of = inverse.reshape(3, nt).T
        self.elem_dofs = np.column_stack([tri, nv + edge_of])
        self.p1_dofs = tri
        mids = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
        self.node_coords = np.vstack([mesh.nodes, mids])

        p = mesh.nodes[tri]
        self.x0 = p[:, 0]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)   # columns
        self.J = J
        self.detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        self.Jinv = np.linalg.inv(J)
        # physical gradients of the barycentric coordinates, (ne, 3, 2)
        self.dlambda = np.einsum("kb,eba->eka", _REF_DLAMBDA, self.Jinv)

        # boundary P2 nodes per boundary edge: (a, b, midpoint)
        bkey = np.sort(mesh.boundary_edges, axis=1)
        lookup = {tuple(e): i for i, e in enumerate(map(tuple, edges))}
        bedge_ids = np.array([lookup[tuple(e)] for e in bkey], dtype=np.int64)
        self.boundary_edge_ids = bedge_ids
        self.boundary_nodes = np.column_stack([mesh.boundary_edges, nv + bedge_ids])
        self._build_constraints()
        self._quad: dict[int, QuadratureData] = {}

    # -- sizes -------------------------------------------------------------
    @property
    def n_velocity(self) -> int:
        return 2 * self.n_nodes

    @property
    def n_pressure(self) -> int:
        return self.n_vertices

    @property
    def n_concentration(self) -> int:
        return self.n_nodes

    @property
    def n_saddle(self) -> int:
        return self.n_velocity + self.n_pressure

    # -- constraints -------------------------------------------------------
    def _build_constraints(self):
        mesh = self.mesh
        N = self.n_nodes
        gamma0 = np.unique(self.boundary_nodes[mesh.edge_tags == GAMMA0])
        comp = {}
        for k in np.flatnonzero(mesh.edge_tags == GAMMA1):
            side = mesh.boundary_side[k]
            c = 1 if side in ("bottom", "top") else 0
            for n in self.boundary_nodes[k]:
                comp.setdefault(int(n), set()).add(c)
        g0 = set(gamma0.tolist())
        idx = [c * N + n for n in sorted(g0) for c in (0, 1)]
        for n in sorted(comp):
            if n in g0:
                continue
            idx.extend(c * N + n for c in sorted(comp[n]))
        self.gamma0_nodes = gamma0
        self.gamma1_nodes = np.array(sorted(set(comp) - g0), dtype=np.int64)
        self.velocity_constraints = ConstraintSet(np.array(idx, dtype=np.int64), 2 * N)
        self.pressure_pin = 0
        self.saddle_constraints = self.velocity_constraints.merge(
            ConstraintSet(np.array([self.pressure_pin]), self.n_pressure),
            offset=2 * N, size=2 * N + self.n_pressure)

    # -- quadrature --------------------------------------------------------
    def quad(self, degree: int) -> QuadratureData:
        if degree not in self._quad:
            self._quad[degree] = QuadratureData(self, degree)
        return self._quad[degree]

    # -- evaluation --------------------------------------------------------
    def evaluate(self, coeffs: np.ndarray, points: np.ndarray, gradient: bool = False):
        """Evaluate a P2 scalar (length N) or velocity (length 2N) field at points.

        Returns values of shape (n,) or (n, 2); with ``gradient=True`` also
        returns gradients of shape (n, 2) or (n, 2, 2) (``[..., c, a] = d u_c / d x_a``).
        """
        coeffs = np.asarray(coeffs, dtype=float)
        tri, ref = self.mesh.locate(points)
        phi = p2_basis(ref)
        dofs = self.elem_dofs[tri]
        N = self.n_nodes
        if coeffs.shape == (N,):
            comps = coeffs[None, :]
        elif coeffs.shape == (2 * N,):
            comps = coeffs.reshape(2, N)
        else:
            raise ValueError(f"coefficient vector of length {coeffs.shape} matches no P2 space")
        loc = comps[:, dofs]                                 # (c, n, 6)
        vals = np.einsum("cni,ni->nc", loc, phi)
        if not gradient:
            return vals[:, 0] if len(comps) == 1 else vals
        refg = p2_ref_gradients(ref)
        g = np.einsum("nib,nba->nia", refg, self.Jinv[tri])
        grads = np.einsum("cni,nia->nca", loc, g)
        if len(comps) == 1:
            return vals[:, 0], grads[:, 0]
        return vals, grads

    def evaluate_pressure(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        tri, ref = self.mesh.locate(points)
        return np.einsum("ni,ni->n", np.asarray(coeffs)[self.p1_dofs[tri]], p1_basis(ref))

    def pressure_mean(self, coeffs: np.ndarray) -> float:
        area = np.abs(self.detJ) / 2.0
        return float(np.sum(area * np.asarray(coeffs)[self.p1_dofs].mean(axis=1)) / area.sum())

    def elementwise_laplacian(self, coeffs: np.ndarray) -> np.ndarray:
        """Constant Laplacian of a P2 scalar field on each triangle."""
        dl = self.dlambda
        lap = np.empty((len(dl), 6))
        for i in range(3):
            lap[:, i] = 4.0 * np.einsum("ea,ea->e", dl[:, i], dl[:, i])
        for k, (a, b) in enumerate(_LOCAL_EDGES):
            lap[:, 3 + k] = 8.0 * np.einsum("ea,ea->e", dl[:, a], dl[:, b])
        return np.einsum("ei,ei->e", lap, np.asarray(coeffs)[self.elem_dofs])


def build_spaces(mesh: Mesh) -> DiscreteSpaces:
    return DiscreteSpaces(mesh)


def interpolate(spaces: DiscreteSpaces, field) -> np.ndarray:
    """Nodal P2 interpolant of ``field``.

    ``field`` maps an (n, 2) array of points to values of shape (n,) or
    (n, 2); vector fields give a blocked velocity vector.
    """
    if np.isscalar(field):
        return np.full(spaces.n_nodes, float(field))
    vals = np.asarray(field(spaces.node_coords), dtype=float)
    if vals.ndim == 1:
        return vals.copy()
    return np.concatenate([vals[:, 0], vals[:, 1]])


@dataclass
class ReducedSystem:
    matrix: sp.csc_matrix
    rhs: np.ndarray
    free: np.ndarray
    size: int

    def extend(self, x_free: np.ndarray) -> np.ndarray:
        x = np.zeros(self.size)
        x[self.free] = x_free
        return x


def _constraints_for(spaces: DiscreteSpaces, size: int) -> ConstraintSet:
    if size == spaces.n_velocity:
        return spaces.velocity_constraints
    if size == spaces.n_saddle:
        return spaces.saddle_constraints
    if size == spaces.n_concentration:
        return ConstraintSet(np.zeros(0, dtype=np.int64), size)
    raise ConstraintError(f"no constraint set for a system of size {size}")


def apply_constraints(spaces: DiscreteSpaces | None, matrix, rhs,
                      constraints: ConstraintSet | None = None) -> ReducedSystem:
    """Eliminate constrained rows and columns symmetrically.

    Constraints are homogeneous, so no lifting of the right-hand side is
    needed. With ``constraints`` omitted the set is chosen from the system
    size (velocity, saddle point, or unconstrained concentration).
    """
    A = sp.csr_matrix(matrix)
    n = A.shape[0]
    if constraints is None:
        constraints = _constraints_for(spaces, n)
    if constraints.size != n:
        raise ConstraintError("constraint set size does not match the system")
    free = constraints.free
    Ar = A[free][:, free].tocsc()
    b = np.asarray(rhs, dtype=float)
    return ReducedSystem(Ar, b[free].copy(), free, n)
