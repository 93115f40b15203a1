"""Structured triangular meshes of a rectangle with tagged boundary sides."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import MeshError

GAMMA0 = "Gamma0"
GAMMA1 = "Gamma1"
SIDES = ("bottom", "right", "top", "left")

_SIDE_NORMALS = {
    "bottom": (0.0, -1.0),
    "right": (1.0, 0.0),
    "top": (0.0, 1.0),
    "left": (-1.0, 0.0),
}


@dataclass(frozen=True)
class BoundaryFrame:
    """Outward unit normal and the tangent obtained by a +90 degree turn.

    The tangent is always ``(-normal[1], normal[0])``, so the boundary is
    traversed counterclockwise.
    """

    normal: np.ndarray
    tangent: np.ndarray


@dataclass(eq=False)
class Mesh:
    """Triangulated axis-aligned rectangle ``[0, Lx] x [0, Ly]``.

    Attributes
    ----------
    nodes : ndarray, shape (nv, 2)
    triangles : ndarray, shape (nt, 3)
        Counterclockwise vertex indices.
    boundary_edges : ndarray, shape (nb, 2)
        Vertex pairs, oriented counterclockwise along the boundary.
    boundary_owner : ndarray, shape (nb,)
        Index of the triangle containing each boundary edge.
    boundary_side : ndarray of str, shape (nb,)
    edge_tags : ndarray of str, shape (nb,)
        ``"Gamma0"`` (no slip) or ``"Gamma1"`` (slip with friction).
    """

    nx: int
    ny: int
    Lx: float
    Ly: float
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_owner: np.ndarray
    boundary_side: np.ndarray
    edge_tags: np.ndarray
    partition: dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.nodes, self.triangles, self.boundary_edges,
                    self.boundary_owner, self.boundary_side, self.edge_tags):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edge_lengths(self, tag: str | None = None) -> np.ndarray:
        sel = slice(None) if tag is None else self.edge_tags == tag
        p = self.nodes[self.boundary_edges[sel]]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    def locate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Find the triangle containing each point and its reference coordinates.

        Points on shared edges are assigned to one neighbour; points outside
        the rectangle (beyond a rounding slack) raise ``MeshError``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        slack = 1e-12 * max(self.Lx, self.Ly)
        if (np.any(pts[:, 0] < -slack) or np.any(pts[:, 0] > self.Lx + slack)
                or np.any(pts[:, 1] < -slack) or np.any(pts[:, 1] > self.Ly + slack)):
            raise MeshError("point outside the mesh rectangle")
        i = np.clip(np.floor(pts[:, 0] / self.hx).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor(pts[:, 1] / self.hy).astype(int), 0, self.ny - 1)
        xi = pts[:, 0] / self.hx - i
        eta = pts[:, 1] / self.hy - j
        rising = _rising_diagonal(i, j, self.nx, self.ny)
        # cell-local triangle: 0 is below the diagonal, 1 above
        upper = np.where(rising, eta > xi, eta > 1.0 - xi)
        tri = 2 * (j * self.nx + i) + upper.astype(int)
        p = self.nodes[self.triangles[tri]]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        d = pts - p[:, 0]
        r = (d[:, 0] * e2[:, 1] - d[:, 1] * e2[:, 0]) / det
        s = (e1[:, 0] * d[:, 1] - e1[:, 1] * d[:, 0]) / det
        return tri, np.column_stack([r, s])


def _rising_diagonal(i, j, nx, ny):
    """Diagonal orientation per cell: rising ('/') in the lower-left and
    upper-right quadrants, falling elsewhere.

    Every diagonal at a domain corner then passes through that corner, so no
    triangle has all three vertices on the boundary once nx, ny >= 2.
    """
    left = 2 * np.asarray(i) + 1 <= nx
    lower = 2 * np.asarray(j) + 1 <= ny
    return left == lower


def _check_partition(partition) -> dict:
    if partition is None:
        partition = {}
    unknown = set(partition) - set(SIDES)
    if unknown:
        raise MeshError(f"unknown boundary side(s) {sorted(unknown)}; expected {SIDES}")
    missing = [s for s in SIDES if s not in partition]
    if missing:
        raise MeshError(f"partition does not cover side(s) {missing}")
    for side, tag in partition.items():
        if tag not in (GAMMA0, GAMMA1):
            raise MeshError(f"side {side!r} has tag {tag!r}; expected {GAMMA0} or {GAMMA1}")
    if all(partition[s] == GAMMA1 for s in SIDES):
        raise MeshError("all sides tagged Gamma1: the no-slip part Gamma0 must have positive length")
    return {s: partition[s] for s in SIDES}


def partition_from_slip_sides(slip_sides) -> dict:
    """Partition with the listed sides on Gamma1 and the rest on Gamma0."""
    slip_sides = list(slip_sides)
    bad = [s for s in slip_sides if s not in SIDES]
    if bad:
        raise MeshError(f"unknown boundary side(s) {bad}")
    return {s: (GAMMA1 if s in slip_sides else GAMMA0) for s in SIDES}


def build_rect_mesh(nx: int, ny: int, Lx: float = 1.0, Ly: float = 1.0,
                    partition: dict | None = None) -> Mesh:
    """Build a structured mesh of ``[0, Lx] x [0, Ly]`` with two triangles per cell.

    Parameters
    ----------
    nx, ny : int
        Cell counts along x and y.
    Lx, Ly : float
        Side lengths.
    partition : dict
        Maps each of ``"bottom"``, ``"right"``, ``"top"``, ``"left"`` to
        ``"Gamma0"`` or ``"Gamma1"``. Defaults to all ``"Gamma0"``.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError(f"cell counts must be positive integers, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    if not (Lx > 0 and Ly > 0):
        raise MeshError(f"side lengths must be positive, got Lx={Lx}, Ly={Ly}")
    if partition is None:
        partition = {s: GAMMA0 for s in SIDES}
    partition = _check_partition(partition)

    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    v00, v10 = vid(ii, jj), vid(ii + 1, jj)
    v01, v11 = vid(ii, jj + 1), vid(ii + 1, jj + 1)
    rising = _rising_diagonal(ii, jj, nx, ny)
    lower = np.where(rising[:, None],
                     np.column_stack([v00, v10, v11]),
                     np.column_stack([v00, v10, v01]))
    upper = np.where(rising[:, None],
                     np.column_stack([v00, v11, v01]),
                     np.column_stack([v10, v11, v01]))
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    # boundary edges, counterclockwise, with owner triangles
    edges, owners, sides = [], [], []
    for i in range(nx):
        edges.append((vid(i, 0), vid(i + 1, 0)))
        owners.append(2 * (0 * nx + i))
        sides.append("bottom")
    for j in range(ny):
        edges.append((vid(nx, j), vid(nx, j + 1)))
        cell = j * nx + nx - 1
        owners.append(2 * cell + (0 if _rising_diagonal(nx - 1, j, nx, ny) else 1))
        sides.append("right")
    for i in reversed(range(nx)):
        edges.append((vid(i + 1, ny), vid(i, ny)))
        owners.append(2 * ((ny - 1) * nx + i) + 1)
        sides.append("top")
    for j in reversed(range(ny)):
        edges.append((vid(0, j + 1), vid(0, j)))
        cell = j * nx
        owners.append(2 * cell + (1 if _rising_diagonal(0, j, nx, ny) else 0))
        sides.append("left")
    sides = np.array(sides)
    tags = np.array([partition[s] for s in sides])
    mesh = Mesh(nx=nx, ny=ny, Lx=float(Lx), Ly=float(Ly), nodes=nodes,
                triangles=triangles, boundary_edges=np.array(edges, dtype=np.int64),
                boundary_owner=np.array(owners, dtype=np.int64),
                boundary_side=sides, edge_tags=tags, partition=partition)
    return mesh


def classify_boundary(mesh: Mesh, partition: dict) -> np.ndarray:
    """Tag every boundary edge of ``mesh`` according to ``partition``."""
    partition = _check_partition(partition)
    tags = np.array([partition[s] for s in mesh.boundary_side])
    lengths = mesh.edge_lengths()
    if lengths[tags == GAMMA0].sum() <= 0.0:
        raise MeshError("Gamma0 has zero total length")
    return tags


def boundary_frame(mesh: Mesh, edge: int) -> BoundaryFrame:
    """Frame of boundary edge number ``edge`` (an index into ``mesh.boundary_edges``)."""
    if not (0 <= edge < len(mesh.boundary_edges)):
        raise MeshError(f"{edge} is not a boundary edge index")
    a, b = mesh.nodes[mesh.boundary_edges[edge]]
    t = (b - a) / np.linalg.norm(b - a)
    # counterclockwise traversal: interior on the left, outward normal on the right
    n = np.array([t[1], -t[0]])
    expected = np.array(_SIDE_NORMALS[mesh.boundary_side[edge]])
    if not np.allclose(n, expected):
        raise MeshError("boundary edge orientation is inconsistent with its side")
    return BoundaryFrame(normal=n, tangent=np.array([-n[1], n[0]]))


def side_frame(side: str) -> BoundaryFrame:
    n = np.array(_SIDE_NORMALS[side])
    return BoundaryFrame(normal=n, tangent=np.array([-n[1], n[0]]))
