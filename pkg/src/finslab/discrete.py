"""Discrete energy, its gradient, and norms of piecewise-linear fields.

Gradients are constant per simplex, so the Dirichlet part
``sum_T |T| H^p(grad u|_T) / p`` is exact for a given H.  The load term uses
nodal (mass-lumped) quadrature with f extended constantly along the axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import CrossSectionMesh, CylinderMesh, SimplexMesh, aligned
from .norms import NormSpec, norm_eval, value_and_grad, SingularPointError, ParameterError


class MeshMismatchError(ValueError):
    pass


@dataclass(eq=False)
class Field:
    """Nodal values of a piecewise-linear function on ``mesh``."""

    mesh: SimplexMesh
    values: np.ndarray
    constrained: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.num_nodes,):
            raise MeshMismatchError(
                f"field has {self.values.shape} values, mesh has {self.mesh.num_nodes} nodes")
        if self.constrained and np.any(self.values[self.mesh.dirichlet] != 0):
            raise ValueError("constrained field must vanish on dirichlet nodes")

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros(mesh.num_nodes))

    @classmethod
    def from_function(cls, mesh, fn, constrained=True):
        vals = np.asarray(fn(mesh.points), dtype=float) * np.ones(mesh.num_nodes)
        if constrained:
            vals = np.where(mesh.dirichlet, 0.0, vals)
        return cls(mesh, vals, constrained)

    @classmethod
    def constant(cls, mesh, value: float):
        return cls(mesh, np.full(mesh.num_nodes, float(value)), constrained=False)

    def __sub__(self, other):
        _same_mesh(self, other)
        return Field(self.mesh, self.values - other.values, self.constrained and other.constrained)

    def __add__(self, other):
        _same_mesh(self, other)
        return Field(self.mesh, self.values + other.values, self.constrained and other.constrained)

    def __mul__(self, t):
        return Field(self.mesh, float(t) * self.values, self.constrained)

    __rmul__ = __mul__

    def gradients(self) -> np.ndarray:
        return simplex_gradients(self.mesh, self.values)


def _same_mesh(a, b):
    if a.mesh is not b.mesh:
        raise MeshMismatchError("fields live on different meshes")


def simplex_gradients(mesh: SimplexMesh, values) -> np.ndarray:
    return (mesh.gradient_operator @ values).reshape(mesh.num_simplices, mesh.dim)


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet_part: float
    load_part: float
    total: float
    half_dirichlet_part: float | None = None
    half_load_part: float | None = None

    @property
    def half_total(self):
        if self.half_dirichlet_part is None:
            return None
        return self.half_dirichlet_part - self.half_load_part


def load_vector(mesh: SimplexMesh, f) -> np.ndarray:
    """Nodal values of the load on ``mesh`` (f constant along the axis)."""
    if isinstance(f, (int, float)):
        return np.full(mesh.num_nodes, float(f))
    if f.mesh is mesh:
        return f.values
    if isinstance(mesh, CylinderMesh) and isinstance(f.mesh, CrossSectionMesh):
        if not aligned(mesh, f.mesh):
            raise MeshMismatchError("load is given on a misaligned cross-section mesh")
        return np.tile(f.values, mesh.num_nodes // mesh.num_cross_nodes)
    raise MeshMismatchError("load does not live on a compatible mesh")


def _check_field(mesh, u):
    if u.mesh is not mesh:
        raise MeshMismatchError("field does not live on this mesh")


def energy(mesh: SimplexMesh, norm: NormSpec, p: float, f, u: Field) -> EnergyBreakdown:
    """Discrete ``J(u) = int H^p(grad u)/p - f u`` with exact H."""
    _check_field(mesh, u)
    if norm.dimension != mesh.dim:
        raise MeshMismatchError("norm dimension differs from mesh dimension")
    exact = norm.smoothed(0.0)
    Hp = norm_eval(exact, u.gradients()) ** p
    vol = mesh.volumes
    dpart = math.fsum(vol * Hp) / p
    fvals = load_vector(mesh, f)
    lpart = math.fsum(mesh.lumped_mass * fvals * u.values)
    half_d = half_l = None
    tags = getattr(mesh, "half_cylinder", None)
    if tags is not None:
        half_d = math.fsum(vol[tags] * Hp[tags]) / p
        nodal = (fvals * u.values)[mesh.simplices[tags]].sum(axis=1)
        half_l = math.fsum(vol[tags] * nodal / (mesh.dim + 1))
    return EnergyBreakdown(dpart, lpart, dpart - lpart, half_d, half_l)


def flux_assembly(mesh: SimplexMesh, norm: NormSpec, p: float, values, scale=1.0,
                  operator=None, weights=None):
    """``(sum |T| H^p, B^T (|T| flux))`` for nodal values; raises on singular simplices."""
    B = mesh.gradient_operator if operator is None else operator
    k = norm.dimension
    Z = (B @ values).reshape(-1, k)
    H, G, sing = value_and_grad(norm, Z, scale)
    zero = H == 0
    if np.any(sing & ~zero):
        raise SingularPointError("energy gradient undefined: singular gradient on some simplex")
    vol = mesh.volumes if weights is None else weights
    Hp1 = H ** (p - 1)
    flux = np.where(zero[:, None], 0.0, Hp1[:, None] * G)
    g = B.T @ (vol[:, None] * flux).ravel()
    return float(np.sum(vol * Hp1 * H)), g


def energy_gradient(mesh: SimplexMesh, norm: NormSpec, p: float, f, u: Field,
                    scale: float = 1.0) -> Field:
    """Gradient of the discrete energy w.r.t. nodal values, zero on dirichlet nodes.

    Uses the smoothed norm when ``norm.smoothing_eps > 0`` (with the given
    gradient scale), the exact one otherwise.
    """
    _check_field(mesh, u)
    _, g = flux_assembly(mesh, norm, p, u.values, scale)
    g = g - mesh.lumped_mass * load_vector(mesh, f)
    g[mesh.dirichlet] = 0.0
    return Field(mesh, g)


def _region_mask(mesh, region):
    if region == "all":
        return np.ones(mesh.num_simplices, dtype=bool)
    if region == "inside_half_cylinder":
        tags = getattr(mesh, "half_cylinder", None)
        if tags is None:
            raise ValueError("mesh has no half-cylinder tagging")
        return tags
    raise ValueError(f"unknown region {region!r}")


def grad_lp_norm(mesh: SimplexMesh, u: Field, p: float, region: str = "all",
                 part: str = "full") -> float:
    """``(sum_T |T| |grad u|^p)^(1/p)`` with the euclidean gradient magnitude.

    ``part`` selects the full gradient, only its cross-section components
    (``"cross"``), or only the axis components (``"axis"``).
    """
    if p < 1:
        raise ParameterError("p must be at least 1")
    _check_field(mesh, u)
    mask = _region_mask(mesh, region)
    if not mask.any():
        raise ValueError("empty region")
    G = u.gradients()[mask]
    m = getattr(mesh, "axis_dim", 0)
    if part == "cross":
        G = G[:, m:]
    elif part == "axis":
        G = G[:, :m]
    mag = np.linalg.norm(G, axis=1)
    return math.fsum(mesh.volumes[mask] * mag**p) ** (1.0 / p)


def lp_norm(mesh: SimplexMesh, u: Field, p: float) -> float:
    if p < 1:
        raise ParameterError("p must be at least 1")
    return math.fsum(mesh.lumped_mass * np.abs(u.values) ** p) ** (1.0 / p)


def extend_constant(w: Field, target: CylinderMesh) -> Field:
    """Constant extension along the axis of a cross-section field."""
    if not isinstance(w.mesh, CrossSectionMesh) or not aligned(target, w.mesh):
        raise MeshMismatchError("cross-section field is not aligned with the cylinder")
    # not constrained: the extension is nonzero on the axis end faces
    vals = np.tile(w.values, target.num_nodes // target.num_cross_nodes)
    return Field(target, vals, constrained=False)


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


def axis_average(u: Field, cross: CrossSectionMesh | None = None) -> Field:
    """``w(X2) = |l omega_1|^-1 int u(X1, X2) dX1`` by the trapezoid rule."""
    mesh = u.mesh
    if cross is None:
        from .mesh import build_cross_section
        cross = build_cross_section(mesh.cross_box, mesh.h_cross)
    if not aligned(mesh, cross):
        raise MeshMismatchError("cross-section mesh is not aligned with the cylinder")
    m = mesh.axis_dim
    w1 = _trapezoid_weights(mesh.axis_count, mesh.h_axis)
    W = w1
    for _ in range(m - 1):
        W = np.multiply.outer(W, w1)
    U = u.values.reshape(-1, mesh.num_cross_nodes)
    # average the deviation from the first slice, so constant extensions come back exactly
    vals = U[0] + W.ravel() @ (U - U[0]) / mesh.axis_measure
    vals = np.where(cross.dirichlet, 0.0, vals)
    return Field(cross, vals)
