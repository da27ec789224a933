"""Tensor-product simplicial meshes of the cylinder and its cross-section.

The cylinder is ``(-l/2, l/2)^m x omega_2`` with ``omega_2`` a box.  Nodes are
stored in C order with the axis indices outermost, so the slice of the first
``prod(cross_counts)`` nodes reproduces the cross-section mesh node for node.
Every grid cell is cut into ``d!`` simplices along the main diagonal (Kuhn).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class MeshError(ValueError):
    pass


def _node_count(edge: float, h: float) -> int:
    if not (h > 0 and edge > 0):
        raise MeshError("mesh steps and box edges must be positive")
    return max(int(round(edge / h)), 1) + 1


def _kuhn_cells(counts):
    """Simplices (node index tuples) of the Kuhn triangulation of a grid."""
    d = len(counts)
    cell_idx = np.indices([c - 1 for c in counts]).reshape(d, -1).T
    simplices = []
    for perm in itertools.permutations(range(d)):
        verts = [np.zeros(d, dtype=int)]
        for k in perm:
            nxt = verts[-1].copy()
            nxt[k] += 1
            verts.append(nxt)
        # even permutations give positively oriented simplices
        inversions = sum(1 for i in range(d) for j in range(i + 1, d) if perm[i] > perm[j])
        if inversions % 2:
            verts[-1], verts[-2] = verts[-2], verts[-1]
        cols = [np.ravel_multi_index((cell_idx + v).T, counts) for v in verts]
        simplices.append(np.stack(cols, axis=1))
    # group the d! simplices of one cell together
    return np.stack(simplices, axis=1).reshape(-1, d + 1)


@dataclass(eq=False)
class SimplexMesh:
    """Structured box mesh; shared machinery for cylinder and cross-section."""

    points: np.ndarray
    simplices: np.ndarray
    dirichlet: np.ndarray
    counts: tuple

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def num_nodes(self) -> int:
        return len(self.points)

    @property
    def num_simplices(self) -> int:
        return len(self.simplices)

    @property
    def num_cells(self) -> int:
        return math.prod(c - 1 for c in self.counts)

    @cached_property
    def _edges(self):
        P = self.points[self.simplices]
        return P[:, 1:, :] - P[:, :1, :]

    @cached_property
    def signed_volumes(self) -> np.ndarray:
        return np.linalg.det(self._edges) / math.factorial(self.dim)

    @cached_property
    def volumes(self) -> np.ndarray:
        return np.abs(self.signed_volumes)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Array (T, d, d+1): gradient of each local hat function."""
        inv = np.linalg.inv(self._edges)  # columns: gradients of phi_1..phi_d
        g = np.empty((self.num_simplices, self.dim, self.dim + 1))
        g[:, :, 1:] = inv
        g[:, :, 0] = -inv.sum(axis=2)
        return g

    @cached_property
    def gradient_operator(self) -> sp.csr_matrix:
        """Sparse B with ``(B @ u).reshape(T, d)`` the per-simplex gradients."""
        T, d = self.num_simplices, self.dim
        rows = np.repeat(np.arange(T * d), d + 1)
        cols = np.repeat(self.simplices, d, axis=0).ravel()
        vals = self.basis_gradients.reshape(-1)
        return sp.csr_matrix((vals, (rows, cols)), shape=(T * d, self.num_nodes))

    @cached_property
    def lumped_mass(self) -> np.ndarray:
        m = np.zeros(self.num_nodes)
        np.add.at(m, self.simplices.ravel(), np.repeat(self.volumes / (self.dim + 1), self.dim + 1))
        return m

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        B = self.gradient_operator
        w = np.repeat(self.volumes, self.dim)
        return (B.T @ sp.diags(w) @ B).tocsr()

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet)

    def summary(self) -> str:
        """Plain-text header used for golden files."""
        lines = [
            f"# {type(self).__name__}",
            f"# dim = {self.dim}",
            f"# nodes = {self.num_nodes}",
            f"# cells = {self.num_cells}",
            f"# simplices = {self.num_simplices}",
            f"# dirichlet_nodes = {int(self.dirichlet.sum())}",
            f"# volume = {float(np.sum(self.volumes))!r}",
        ]
        return "\n".join(lines) + "\n"


def _grid(intervals, counts):
    axes = [np.linspace(a, b, n) for (a, b), n in zip(intervals, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def _boundary_mask(counts, dims):
    idx = np.indices(counts).reshape(len(counts), -1)
    mask = np.zeros(idx.shape[1], dtype=bool)
    for k in dims:
        mask |= (idx[k] == 0) | (idx[k] == counts[k] - 1)
    return mask


def _normalize_box(box):
    box = tuple((float(a), float(b)) for a, b in (box if isinstance(box[0], (tuple, list)) else [box]))
    for a, b in box:
        if not b > a:
            raise MeshError(f"empty interval ({a}, {b})")
    return box


@dataclass(eq=False)
class CrossSectionMesh(SimplexMesh):
    cross_box: tuple = ()
    h_cross: float = 0.0

    @property
    def measure(self) -> float:
        return math.prod(b - a for a, b in self.cross_box)


@dataclass(eq=False)
class CylinderMesh(SimplexMesh):
    length: float = 0.0
    axis_dim: int = 1
    cross_box: tuple = ()
    h_axis: float = 0.0
    h_cross: float = 0.0
    dirichlet_kind: str = "all"
    half_cylinder: np.ndarray = field(default=None, repr=False)

    @property
    def cross_dim(self) -> int:
        return self.dim - self.axis_dim

    @property
    def axis_count(self) -> int:
        return self.counts[0]

    @property
    def cross_counts(self) -> tuple:
        return self.counts[self.axis_dim:]

    @property
    def num_cross_nodes(self) -> int:
        return math.prod(self.cross_counts)

    @property
    def axis_measure(self) -> float:
        """|l omega_1| = l^m for the centered unit box."""
        return self.length ** self.axis_dim

    @property
    def measure(self) -> float:
        return self.axis_measure * math.prod(b - a for a, b in self.cross_box)

    def cross_points(self) -> np.ndarray:
        return self.points[: self.num_cross_nodes, self.axis_dim:]


def build_cross_section(cross_box, h_cross: float) -> CrossSectionMesh:
    box = _normalize_box(cross_box)
    counts = tuple(_node_count(b - a, h_cross) for a, b in box)
    pts = _grid(box, counts)
    return CrossSectionMesh(
        points=pts,
        simplices=_kuhn_cells(counts),
        dirichlet=_boundary_mask(counts, range(len(counts))),
        counts=counts,
        cross_box=box,
        h_cross=(box[0][1] - box[0][0]) / (counts[0] - 1),
    )


def build_cylinder(length: float, m: int, cross_box, h_axis: float, h_cross: float,
                   dirichlet: str = "all") -> CylinderMesh:
    """Mesh of ``(-l/2, l/2)^m x cross_box``.

    ``dirichlet="all"`` flags the whole box boundary, ``"strip"`` only the
    lateral part ``l omega_1 x boundary(omega_2)`` (axis ends left free).
    """
    if not length > 0:
        raise MeshError("cylinder length must be positive")
    if m < 1:
        raise MeshError("axis dimension must be at least 1")
    if dirichlet not in ("all", "strip"):
        raise MeshError(f"unknown dirichlet kind {dirichlet!r}")
    box = _normalize_box(cross_box)
    na = _node_count(length, h_axis)
    cross_counts = tuple(_node_count(b - a, h_cross) for a, b in box)
    counts = (na,) * m + cross_counts
    intervals = ((-length / 2, length / 2),) * m + box
    pts = _grid(intervals, counts)
    # reuse the exact cross-section coordinates so slices match bitwise
    cross = _grid(box, cross_counts)
    pts[:, m:] = np.tile(cross, (na**m, 1))
    dims = range(len(counts)) if dirichlet == "all" else range(m, len(counts))
    mesh = CylinderMesh(
        points=pts,
        simplices=_kuhn_cells(counts),
        dirichlet=_boundary_mask(counts, dims),
        counts=counts,
        length=float(length),
        axis_dim=m,
        cross_box=box,
        h_axis=length / (na - 1),
        h_cross=(box[0][1] - box[0][0]) / (cross_counts[0] - 1),
        dirichlet_kind=dirichlet,
    )
    mesh.half_cylinder = tag_half_cylinder(mesh)
    return mesh


def tag_half_cylinder(mesh: CylinderMesh) -> np.ndarray:
    """Simplices whose closure lies in ``(l/2) omega_1 x omega_2``."""
    limit = mesh.length / 4 * (1 + 1e-12)
    X1 = mesh.points[:, : mesh.axis_dim]
    inside_node = np.all(np.abs(X1) <= limit, axis=1)
    return np.all(inside_node[mesh.simplices], axis=1)


def aligned(cyl: CylinderMesh, cross: CrossSectionMesh) -> bool:
    return (cyl.cross_counts == cross.counts
            and np.array_equal(cyl.cross_points(), cross.points))
