"""Minimizers: Dirichlet problem, cross-section problem, first eigenpair.

Energies are minimized over the free nodal values with limited-memory BFGS,
preconditioned by the factorized p = 2 stiffness matrix of the same mesh,
with Armijo backtracking.  Non-smooth norms (exponents below 2) and
1 < p < 2 go through an epsilon-continuation of smoothed problems; the
reported energy and residual always use the exact norm where it is
differentiable.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import factorized

from .discrete import (EnergyBreakdown, Field, MeshMismatchError, energy, flux_assembly,
                       load_vector)
from .mesh import CrossSectionMesh, SimplexMesh
from .norms import (BlockNorm, MatrixQNorm, NormSpec, ParameterError, QNorm, Restricted,
                    SingularPointError, SplitNorm, cross_restriction, norm_eval, value_and_grad)

ARMIJO_SLOPE = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 60
ROUNDOFF = 1e-15


@dataclass
class SolveOptions:
    tol_grad: float = 1e-10
    tol_energy: float = 1e-15
    max_iters: int = 5000
    eps_schedule: tuple | None = None  # None: chosen from the norm and p
    seed: int = 0
    memory: int = 12

    def __post_init__(self):
        if not (self.tol_grad > 0 and self.tol_energy > 0):
            raise ParameterError("tolerances must be positive")
        if self.eps_schedule is not None:
            sch = tuple(float(e) for e in self.eps_schedule)
            if any(b >= a for a, b in zip(sch, sch[1:])) or not sch or sch[-1] < 0:
                raise ParameterError("eps_schedule must be strictly decreasing and end >= 0")
            self.eps_schedule = sch


@dataclass
class SolveResult:
    field: Field
    energy: EnergyBreakdown
    weak_residual: float
    iterations: int
    converged: bool
    energy_trace: list
    stage_starts: list = field(default_factory=list)
    threshold: float = 0.0


@dataclass
class EigenResult:
    eigenvalue: float
    field: Field
    rayleigh_trace: list
    converged: bool
    weak_residual: float = math.nan
    iterations: int = 0

    @property
    def lam(self):
        return self.eigenvalue


# --------------------------------------------------------------------------
# helpers


def _exponents(spec: NormSpec):
    fam = spec.family
    if isinstance(fam, (QNorm, MatrixQNorm)):
        return [fam.q]
    if isinstance(fam, BlockNorm):
        return [fam.q, *fam.exponents]
    if isinstance(fam, SplitNorm):
        return [fam.q, *_exponents(fam.axis), *_exponents(fam.cross)]
    if isinstance(fam, Restricted):
        return _exponents(fam.parent)
    return [2.0]


def default_schedule(norm: NormSpec, p: float) -> tuple:
    ex = _exponents(norm)
    if p >= 2 and min(ex) >= 2:
        return (0.0,)
    last = 1e-8 if min(ex) == 1 else 0.0
    return (1e-2, 1e-4, 1e-6, last)


class _Functional:
    """Energy pieces on the free nodes of a mesh."""

    def __init__(self, mesh: SimplexMesh, norm: NormSpec, p: float, f=None, part="full"):
        if not p > 1:
            raise ParameterError(f"p must exceed 1, got {p}")
        self.mesh, self.p = mesh, p
        self.free = mesh.free
        d = mesh.dim
        B = mesh.gradient_operator
        if part == "cross":
            m = mesh.axis_dim
            rows = (np.arange(mesh.num_simplices)[:, None] * d + np.arange(m, d)).ravel()
            B = B[rows]
            k = d - m
        else:
            k = d
        if norm.dimension != k:
            raise MeshMismatchError(f"norm dimension {norm.dimension} does not match {k}")
        self.norm = norm
        self.B = B[:, self.free].tocsr()
        self.k = k
        self.vol = mesh.volumes
        self.mass = mesh.lumped_mass[self.free]
        self.load = np.zeros(len(self.free)) if f is None else \
            (mesh.lumped_mass * load_vector(mesh, f))[self.free]
        K = (self.B.T @ sp.diags(np.repeat(self.vol, k)) @ self.B).tocsc()
        self.precond = factorized(K)

    def full(self, x):
        out = np.zeros(self.mesh.num_nodes)
        out[self.free] = x
        return out

    def dirichlet(self, x, spec, scale):
        """``(sum |T| H^p, gradient of that sum / p)``."""
        return flux_assembly(self.mesh, spec, self.p, x, scale, operator=self.B,
                             weights=self.vol)

    def energy(self, x, spec, scale):
        hp, g = self.dirichlet(x, spec, scale)
        return hp / self.p - self.load @ x, g - self.load

    def grad_scale(self, x):
        Z = (self.B @ x).reshape(-1, self.k)
        s = float(np.max(np.linalg.norm(Z, axis=1))) if len(Z) else 0.0
        return s if s > 0 else 1.0


def _lbfgs(fun, x, precond, tol_grad, tol_energy, max_iters, memory, trace):
    """Preconditioned L-BFGS with Armijo backtracking.

    Returns ``(x, J, g, iterations)``; ``trace`` receives every accepted energy.
    """
    J, g = fun(x)
    trace.append(J)
    S, Y = deque(maxlen=memory), deque(maxlen=memory)
    gamma = 1.0
    flat = 0
    it = 0
    best_g, since_best = math.inf, 0
    while it < max_iters:
        gnorm = np.max(np.abs(g), initial=0.0)
        if gnorm <= tol_grad:
            break
        if gnorm < 0.99 * best_g:
            best_g, since_best = gnorm, 0
        else:
            since_best += 1
            if since_best > 50:
                break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(S), reversed(Y)):
            a = (s @ q) / (s @ y)
            alphas.append(a)
            q -= a * y
        r = gamma * precond(q)
        for (s, y), a in zip(zip(S, Y), reversed(alphas)):
            b = (y @ r) / (s @ y)
            r += s * (a - b)
        d = -r
        slope = g @ d
        if not slope < 0:
            S.clear(), Y.clear()
            d = -gamma * precond(g)
            slope = g @ d
            if not slope < 0:
                d, slope = -g, -(g @ g)
        t = 1.0
        roundoff = ROUNDOFF * max(abs(J), 1e-300)
        for _ in range(MAX_BACKTRACKS):
            xn = x + t * d
            Jn, gn = fun(xn)
            if Jn <= J + ARMIJO_SLOPE * t * slope:
                break
            # energy differences lost in roundoff: accept on the directional
            # derivative instead (approximate Wolfe condition)
            if Jn <= J + roundoff and abs(gn @ d) <= 0.8 * abs(slope):
                break
            t *= BACKTRACK
        else:
            if S:
                S.clear(), Y.clear()
                gamma = 1.0
                continue
            break  # no decrease possible at working precision
        it += 1
        s, y = xn - x, gn - g
        sy = s @ y
        if sy > 1e-300:
            S.append(s), Y.append(y)
            gamma = sy / (y @ precond(y))
        else:
            S.clear(), Y.clear()
        rel = (J - Jn) / max(abs(J), abs(Jn), 1e-300)
        x, J, g = xn, Jn, gn
        trace.append(J)
        flat = flat + 1 if (rel < tol_energy and since_best >= 10) else 0
        if flat >= 5:
            break
    return x, J, g, it


# --------------------------------------------------------------------------
# Dirichlet problems


def certification_threshold(load_inf: float, tol_grad: float) -> float:
    return max(tol_grad, 1e-8 * load_inf)


def solve_dirichlet(mesh: SimplexMesh, norm: NormSpec, p: float, f,
                    opts: SolveOptions | None = None) -> SolveResult:
    """Minimize the discrete energy with zero Dirichlet data."""
    opts = opts or SolveOptions()
    exact = norm.smoothed(0.0)
    F = _Functional(mesh, exact, p, f)
    trace, starts = [], []
    x = np.zeros(len(F.free))
    threshold = certification_threshold(float(np.max(np.abs(F.load), initial=0.0)), opts.tol_grad)
    scale = 1.0
    iterations = 0
    schedule = opts.eps_schedule or default_schedule(norm, p)
    if np.any(F.load) or opts.seed:
        if np.any(F.load):
            lin = F.precond(F.load)
            scale = F.grad_scale(lin)
            a = F.dirichlet(lin, exact, 1.0)[0]
            b = F.load @ lin
            x = (b / a) ** (1.0 / (p - 1)) * lin if a > 0 and b > 0 else lin
        if opts.seed:
            rng = np.random.default_rng(opts.seed)
            amp = 0.05 * max(float(np.max(np.abs(x), initial=0.0)), 1e-3)
            x = x + amp * rng.uniform(-1, 1, len(x))
        for k, eps in enumerate(schedule):
            spec = exact.smoothed(eps)
            last = k == len(schedule) - 1
            starts.append(len(trace))
            tol = threshold if last else 100 * threshold
            x, _, _, n_it = _lbfgs(lambda v, s=spec: F.energy(v, s, scale), x, F.precond,
                                   tol, opts.tol_energy, opts.max_iters - iterations,
                                   opts.memory, trace)
            iterations += n_it
    else:
        starts.append(0)
        trace.append(0.0)
    try:
        _, g = F.energy(x, exact, scale)
    except SingularPointError:
        _, g = F.energy(x, exact.smoothed(schedule[-1] or 1e-8), scale)
    residual = float(np.max(np.abs(g), initial=0.0))
    u = Field(mesh, F.full(x))
    return SolveResult(u, energy(mesh, exact, p, f, u), residual, iterations,
                       residual <= threshold, trace, starts, threshold)


def solve_cross_section(cross: CrossSectionMesh, norm: NormSpec, p: float, f,
                        opts: SolveOptions | None = None) -> SolveResult:
    """Cross-section problem; a full-dimensional norm is restricted to ``H(0, .)``."""
    if norm.dimension != cross.dim:
        norm = cross_restriction(norm, norm.dimension - cross.dim)
    return solve_dirichlet(cross, norm, p, f, opts)


# --------------------------------------------------------------------------
# first eigenpair


def _bump(mesh: SimplexMesh, free_axis: bool) -> np.ndarray:
    """Positive tensor-product sine profile on the mesh box."""
    pts = mesh.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    prof = np.ones(mesh.num_nodes)
    m = getattr(mesh, "axis_dim", 0)
    for k in range(mesh.dim):
        if free_axis and k < m:
            continue
        prof *= np.sin(math.pi * (pts[:, k] - lo[k]) / (hi[k] - lo[k]))
    return np.clip(prof, 0.0, None)


def _rayleigh(F: _Functional, spec, x, scale=1.0):
    p = F.p
    hp, g = F.dirichlet(x, spec, scale)
    ax = np.abs(x)
    den = F.mass @ ax**p
    R = hp / den
    grad = p * (g - R * F.mass * ax ** (p - 1) * np.sign(x)) / den
    return R, grad, g


def _normalize(F, x):
    return x / (F.mass @ np.abs(x) ** F.p) ** (1.0 / F.p)


def eigen_threshold(F: _Functional, R: float, x, tol_grad: float) -> float:
    """Certification level for the eigen residual, relative to ``lambda M |x|^(p-1)``."""
    scale = float(np.max(F.mass * np.abs(x) ** (F.p - 1), initial=0.0))
    return max(tol_grad, 1e-8 * R * scale)


def solve_eigen(mesh: SimplexMesh, norm: NormSpec, p: float, opts: SolveOptions | None = None,
                part: str = "full") -> EigenResult:
    """First eigenpair by preconditioned L-BFGS on the Rayleigh quotient.

    The quotient is invariant under scaling, so the iterate is only
    renormalized at the end; it is then replaced by its absolute value (same
    quotient, the first eigenfunction does not change sign) and scaled to unit
    L^p norm.  On a cross-section mesh a full-dimensional norm is restricted
    to ``H(0, .)``, giving mu_infinity.  ``part="cross"`` uses only the cross-section components of the
    gradient (the strip Poincare quotient).
    """
    opts = opts or SolveOptions(tol_grad=1e-9, tol_energy=1e-13)
    if isinstance(mesh, CrossSectionMesh) and norm.dimension > mesh.dim:
        norm = cross_restriction(norm, norm.dimension - mesh.dim)
    F = _Functional(mesh, norm.smoothed(0.0), p, part=part)
    free_axis = getattr(mesh, "dirichlet_kind", "all") == "strip"
    x = _bump(mesh, free_axis)[F.free]
    rng = np.random.default_rng(opts.seed)
    x = x * (1 + 0.05 * rng.uniform(-1, 1, len(x)))
    x = _normalize(F, x)
    schedule = opts.eps_schedule or default_schedule(norm, p)
    trace = []
    it = 0
    scale = F.grad_scale(x)
    for k, eps in enumerate(schedule):
        spec = F.norm.smoothed(eps)
        R0 = _rayleigh(F, spec, x, scale)[0]
        # margin: the quotient gradient is p times the residual only at unit norm
        tol = 0.1 * p * eigen_threshold(F, R0, x, opts.tol_grad)
        if k < len(schedule) - 1:
            tol *= 100
        x, _, _, n_it = _lbfgs(lambda v, s=spec: _rayleigh(F, s, v, scale)[:2], x, F.precond,
                               tol, opts.tol_energy, opts.max_iters - it, opts.memory, trace)
        x = _normalize(F, np.abs(x))
        it += n_it
    exact = F.norm
    try:
        R, _, g = _rayleigh(F, exact, x)
    except SingularPointError:
        R, _, g = _rayleigh(F, exact.smoothed(schedule[-1] or 1e-8), x, scale)
    residual = float(np.max(np.abs(g - R * F.mass * x ** (p - 1)), initial=0.0))
    converged = residual <= eigen_threshold(F, R, x, opts.tol_grad)
    return EigenResult(float(R), Field(mesh, F.full(x)), trace, converged, residual, it)


def rayleigh_quotient(mesh: SimplexMesh, norm: NormSpec, p: float, v: Field) -> float:
    Hp = norm_eval(norm.smoothed(0.0), v.gradients()) ** p
    return float(np.sum(mesh.volumes * Hp) / np.sum(mesh.lumped_mass * np.abs(v.values) ** p))


# --------------------------------------------------------------------------
# certification


def weak_residual(mesh: SimplexMesh, norm: NormSpec, p: float, u: Field, f=None,
                  eigenvalue: float | None = None, scale: float = 1.0) -> float:
    """Max over interior hat functions of the weak-form defect.

    Dirichlet variant when ``f`` is given, eigen variant
    ``flux - lambda |v|^(p-2) v`` when ``eigenvalue`` is given.
    """
    _, g = flux_assembly(mesh, norm, p, u.values, scale)
    if eigenvalue is not None:
        v = u.values
        g = g - eigenvalue * mesh.lumped_mass * np.sign(v) * np.abs(v) ** (p - 1)
    elif f is not None:
        g = g - mesh.lumped_mass * load_vector(mesh, f)
    return float(np.max(np.abs(g[mesh.free]), initial=0.0))


# --------------------------------------------------------------------------
# Picone identity


@dataclass
class PiconeReport:
    max_abs_R_minus_L: float
    min_L: float
    skipped: int = 0


def picone_check(mesh: SimplexMesh, norm: NormSpec, p: float, u: Field, v: Field,
                 floor: float = 1e-8) -> PiconeReport:
    """Evaluate both sides of Picone's identity simplex by simplex.

    Gradients are the piecewise-linear ones; the ratio u/v uses simplex
    averages.  Simplices where the exact norm is not differentiable are
    skipped and counted.
    """
    interior = mesh.free
    if np.any(v.values[interior] < floor):
        raise ValueError(f"v must be at least {floor} at interior nodes")
    if np.any(u.values < 0):
        raise ValueError("u must be nonnegative")
    exact = norm.smoothed(0.0)
    du, dv = u.gradients(), v.gradients()
    ub = u.values[mesh.simplices].mean(axis=1)
    vb = v.values[mesh.simplices].mean(axis=1)
    keep = vb >= floor
    ratio = np.where(keep, ub / np.where(keep, vb, 1.0), 0.0)

    Hu = norm_eval(exact, du)
    Hv, Gv, sing = value_and_grad(exact, dv)
    bad = sing & (Hv > 0)
    ok = keep & ~bad
    Hv_p1 = np.where(Hv > 0, Hv ** (p - 1), 0.0)
    flux_v = Hv_p1[:, None] * np.where(Hv[:, None] > 0, Gv, 0.0)
    # grad(u^p / v^(p-1)) with simplex-averaged u, v
    dquot = p * ratio[:, None] ** (p - 1) * du - (p - 1) * ratio[:, None] ** p * dv
    R = Hu**p - np.sum(flux_v * dquot, axis=1)
    scaled = ratio[:, None] * dv
    Hs = norm_eval(exact, scaled)
    L = Hu**p + (p - 1) * Hs**p - p * Hs ** (p - 1) * np.sum(
        np.where(Hv[:, None] > 0, Gv, 0.0) * du, axis=1)
    diff = np.abs(R - L)[ok]
    return PiconeReport(float(diff.max(initial=0.0)), float(L[ok].min(initial=math.inf)),
                        int((~ok).sum()))
