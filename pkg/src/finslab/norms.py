"""Finsler (Minkowski) norm families: values, gradients, duals and p-fluxes.

Every family is evaluated through one vectorized kernel working on stacks of
vectors of shape ``(N, n)``.  The block formula

    H(z) = ( sum_b  w_b * ||(A z)_b||_{p_b}^q )^(1/q)

covers q-norms, matrix q-norms, weighted block norms and scaled euclidean
norms; split norms ``(F^q(Z1) + G^q(Z2))^(1/q)`` and cross-section
restrictions are handled recursively on top of it.

Smoothing replaces each inner absolute value ``|y_i|`` by
``sqrt(y_i**2 + delta**2)`` with ``delta = smoothing_eps * scale`` and then
subtracts the value at the origin, so the smoothed gauge is still convex,
nonnegative and vanishes at 0.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np


class NormError(ValueError):
    """Invalid norm parameters, descriptor or argument shape."""


class SingularPointError(ArithmeticError):
    """Exact-mode gradient requested where the norm is not differentiable."""


class ParameterError(ValueError):
    """Parameter outside the admissible range of an operation."""


# --------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class QNorm:
    q: float


@dataclass(frozen=True)
class MatrixQNorm:
    q: float
    matrix: tuple  # tuple of row tuples


@dataclass(frozen=True)
class BlockNorm:
    q: float
    sizes: tuple
    exponents: tuple
    weights: tuple


@dataclass(frozen=True)
class SplitNorm:
    q: float
    axis: "NormSpec"
    cross: "NormSpec"


@dataclass(frozen=True)
class ScaledEuclidean:
    t: float


@dataclass(frozen=True)
class Restricted:
    """``z2 -> H(0, z2)``: the norm seen by fields constant along the axis."""

    parent: "NormSpec"
    axis_dim: int


Family = Union[QNorm, MatrixQNorm, BlockNorm, SplitNorm, ScaledEuclidean, Restricted]


@dataclass(frozen=True)
class NormSpec:
    family: Family
    dimension: int
    smoothing_eps: float = 0.0

    def __post_init__(self):
        if self.dimension < 1:
            raise NormError("dimension must be positive")
        if self.smoothing_eps < 0:
            raise NormError("smoothing_eps must be nonnegative")
        _validate(self.family, self.dimension)

    @property
    def exact(self) -> bool:
        return self.smoothing_eps == 0

    def smoothed(self, eps: float) -> "NormSpec":
        fam = self.family
        if isinstance(fam, SplitNorm):
            fam = SplitNorm(fam.q, fam.axis.smoothed(eps), fam.cross.smoothed(eps))
        elif isinstance(fam, Restricted):
            fam = Restricted(fam.parent.smoothed(eps), fam.axis_dim)
        return replace(self, family=fam, smoothing_eps=float(eps))

    def descriptor(self) -> str:
        return format_norm(self)

    def __str__(self):
        return self.descriptor()


def _check_exp(x, what):
    if not (1 <= x < math.inf):
        raise NormError(f"{what} must lie in [1, inf), got {x}")


def _validate(fam, n):
    if isinstance(fam, QNorm):
        _check_exp(fam.q, "q")
    elif isinstance(fam, MatrixQNorm):
        _check_exp(fam.q, "q")
        a = np.asarray(fam.matrix, dtype=float)
        if a.shape != (n, n):
            raise NormError(f"matrix must be {n}x{n}, got {a.shape}")
        if abs(np.linalg.det(a)) < 1e-14 * max(1.0, np.abs(a).max()) ** n:
            raise NormError("matrix must be invertible")
    elif isinstance(fam, BlockNorm):
        _check_exp(fam.q, "q")
        if not (len(fam.sizes) == len(fam.exponents) == len(fam.weights)):
            raise NormError("block sizes, exponents and weights differ in length")
        if sum(fam.sizes) != n or any(m < 1 for m in fam.sizes):
            raise NormError(f"block sizes must be positive and sum to {n}")
        for pb in fam.exponents:
            _check_exp(pb, "block exponent")
        if any(w <= 0 for w in fam.weights):
            raise NormError("block weights must be positive")
    elif isinstance(fam, SplitNorm):
        _check_exp(fam.q, "q")
        if fam.axis.dimension + fam.cross.dimension != n:
            raise NormError("split parts must have dimensions summing to n")
    elif isinstance(fam, ScaledEuclidean):
        if not fam.t > 0:
            raise NormError("t must be positive")
    elif isinstance(fam, Restricted):
        if fam.parent.dimension - fam.axis_dim != n:
            raise NormError("restricted dimension mismatch")
    else:
        raise NormError(f"unknown norm family {fam!r}")


# constructors ---------------------------------------------------------------


def qnorm(q: float, n: int, eps: float = 0.0) -> NormSpec:
    return NormSpec(QNorm(float(q)), n, eps)


def matrix_qnorm(q: float, matrix, eps: float = 0.0) -> NormSpec:
    a = np.asarray(matrix, dtype=float)
    rows = tuple(tuple(float(v) for v in r) for r in a)
    return NormSpec(MatrixQNorm(float(q), rows), a.shape[0], eps)


def block_norm(q: float, sizes, exponents, weights, eps: float = 0.0) -> NormSpec:
    fam = BlockNorm(float(q), tuple(int(m) for m in sizes),
                    tuple(float(x) for x in exponents), tuple(float(x) for x in weights))
    return NormSpec(fam, int(sum(sizes)), eps)


def split_norm(q: float, axis: NormSpec, cross: NormSpec, eps: float = 0.0) -> NormSpec:
    spec = NormSpec(SplitNorm(float(q), axis, cross), axis.dimension + cross.dimension)
    return spec.smoothed(eps) if eps else spec


def scaled_euclidean(t: float, n: int, eps: float = 0.0) -> NormSpec:
    return NormSpec(ScaledEuclidean(float(t)), n, eps)


def cross_restriction(spec: NormSpec, axis_dim: int) -> NormSpec:
    """Norm acting on cross-section gradients, ``z2 -> H(0, z2)``.

    For split norms this is exactly the cross part G; q-norms and scaled
    euclidean norms restrict to the same family in lower dimension.
    """
    fam = spec.family
    k = spec.dimension - axis_dim
    if k < 1:
        raise NormError("no cross-section dimensions left")
    if isinstance(fam, SplitNorm) and fam.axis.dimension == axis_dim:
        return fam.cross.smoothed(spec.smoothing_eps)
    if isinstance(fam, QNorm):
        return NormSpec(QNorm(fam.q), k, spec.smoothing_eps)
    if isinstance(fam, ScaledEuclidean):
        return NormSpec(ScaledEuclidean(fam.t), k, spec.smoothing_eps)
    return NormSpec(Restricted(spec, axis_dim), k, spec.smoothing_eps)


# --------------------------------------------------------------------------
# descriptor grammar


def _split_top(text: str, sep: str = ";"):
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur).strip())
    return parts


def _nums(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise NormError(f"bad number list {text!r}") from exc


_DESC = re.compile(r"^\s*([a-z]+)\s*\((.*)\)\s*$", re.S)


def parse_norm(desc: str, dimension: int, axis_dim: int = 1) -> NormSpec:
    """Build a NormSpec from a textual descriptor.

    Grammar: ``qnorm(q)``, ``matq(q; a11,a12;a21,a22)``,
    ``block(q; m1,m2; p1,p2; l1,l2)``, ``split(q; <axis>; <cross>)``,
    ``eucl(t)``.  ``dimension`` fills in families that do not carry one.
    """
    mt = _DESC.match(desc)
    if not mt:
        raise NormError(f"malformed norm descriptor {desc!r}")
    name, body = mt.group(1), mt.group(2)
    args = _split_top(body)
    try:
        if name == "qnorm" and len(args) == 1:
            return qnorm(float(args[0]), dimension)
        if name == "eucl" and len(args) == 1:
            return scaled_euclidean(float(args[0]), dimension)
        if name == "matq" and len(args) >= 2:
            rows = [_nums(r) for r in args[1:]]
            if any(len(r) != len(rows) for r in rows):
                raise NormError("matq matrix must be square")
            spec = matrix_qnorm(float(args[0]), rows)
        elif name == "block" and len(args) == 4:
            sizes = [int(v) for v in _nums(args[1])]
            spec = block_norm(float(args[0]), sizes, _nums(args[2]), _nums(args[3]))
        elif name == "split" and len(args) == 3:
            f = parse_norm(args[1], axis_dim, axis_dim)
            g = parse_norm(args[2], dimension - axis_dim, axis_dim)
            spec = split_norm(float(args[0]), f, g)
        else:
            raise NormError(f"malformed norm descriptor {desc!r}")
    except (ValueError, TypeError) as exc:
        if isinstance(exc, NormError):
            raise
        raise NormError(f"malformed norm descriptor {desc!r}: {exc}") from exc
    if spec.dimension != dimension:
        raise NormError(f"descriptor {desc!r} has dimension {spec.dimension}, expected {dimension}")
    return spec


def _g(x: float) -> str:
    return repr(float(x)) if float(x) != int(x) else str(int(x))


def format_norm(spec: NormSpec) -> str:
    fam = spec.family
    if isinstance(fam, QNorm):
        return f"qnorm({_g(fam.q)})"
    if isinstance(fam, ScaledEuclidean):
        return f"eucl({_g(fam.t)})"
    if isinstance(fam, MatrixQNorm):
        rows = ";".join(",".join(_g(v) for v in r) for r in fam.matrix)
        return f"matq({_g(fam.q)}; {rows})"
    if isinstance(fam, BlockNorm):
        j = lambda xs: ",".join(_g(v) for v in xs)  # noqa: E731
        return f"block({_g(fam.q)}; {j(fam.sizes)}; {j(fam.exponents)}; {j(fam.weights)})"
    if isinstance(fam, SplitNorm):
        return f"split({_g(fam.q)}; {format_norm(fam.axis)}; {format_norm(fam.cross)})"
    return f"restrict({format_norm(fam.parent)}; {fam.axis_dim})"


# --------------------------------------------------------------------------
# vectorized kernels


def _block_params(fam, n):
    """(matrix or None, q, [(start, stop, p_b, w_b)]) for block-type families."""
    if isinstance(fam, QNorm):
        return None, fam.q, [(0, n, fam.q, 1.0)]
    if isinstance(fam, ScaledEuclidean):
        return None, 2.0, [(0, n, 2.0, fam.t**2)]
    if isinstance(fam, MatrixQNorm):
        return np.asarray(fam.matrix, dtype=float), fam.q, [(0, n, fam.q, 1.0)]
    blocks, s = [], 0
    for m, pb, w in zip(fam.sizes, fam.exponents, fam.weights):
        blocks.append((s, s + m, pb, w))
        s += m
    return None, fam.q, blocks


def _block_kernel(fam, n, Z, delta, need_grad):
    A, q, blocks = _block_params(fam, n)
    Y = Z @ A.T if A is not None else Z
    a = np.sqrt(Y * Y + delta * delta) if delta > 0 else np.abs(Y)
    smax = a.max(axis=1)
    scale = np.where(smax > 0, smax, 1.0)
    ah = a / scale[:, None]
    norms = []
    acc = np.zeros(len(Z))
    for s0, s1, pb, w in blocks:
        nb = np.sum(ah[:, s0:s1] ** pb, axis=1) ** (1.0 / pb)
        norms.append(nb)
        acc += w * nb**q
    hh = acc ** (1.0 / q)
    H = scale * hh
    if delta > 0:
        H0 = delta * sum(w * (s1 - s0) ** (q / pb) for s0, s1, pb, w in blocks) ** (1.0 / q)
        H = np.maximum(H - H0, 0.0)
    if not need_grad:
        return H, None, None

    singular = np.zeros(len(Z), dtype=bool)
    dHda = np.zeros_like(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        for (s0, s1, pb, w), nb in zip(blocks, norms):
            outer = (nb / hh) ** (q - 1) if q > 1 else np.ones_like(nb)
            outer = np.where(nb > 0, outer, 0.0 if q > 1 else 1.0)
            if pb > 1:
                inner = (ah[:, s0:s1] / nb[:, None]) ** (pb - 1)
                inner = np.where(nb[:, None] > 0, inner, 0.0)
            else:
                inner = np.ones_like(ah[:, s0:s1])
            dHda[:, s0:s1] = w * outer[:, None] * inner
            if delta == 0:
                if q == 1:
                    singular |= nb == 0
                if pb == 1:
                    singular |= np.any(ah[:, s0:s1] == 0, axis=1) & (nb > 0)
        ratio = np.where(a > 0, Y / a, 0.0)
    dHdy = dHda * ratio
    G = dHdy @ A if A is not None else dHdy
    if delta == 0:
        singular |= H == 0
    return H, G, singular


def _kernel(spec: NormSpec, Z, scale, need_grad):
    fam = spec.family
    delta = spec.smoothing_eps * scale
    if isinstance(fam, SplitNorm):
        r = fam.axis.dimension
        F, gF, sF = _kernel(fam.axis, Z[:, :r], scale, need_grad)
        Gv, gG, sG = _kernel(fam.cross, Z[:, r:], scale, need_grad)
        q = fam.q
        mx = np.maximum(F, Gv)
        sc = np.where(mx > 0, mx, 1.0)
        hh = ((F / sc) ** q + (Gv / sc) ** q) ** (1.0 / q)
        H = sc * hh * (mx > 0)
        if not need_grad:
            return H, None, None
        with np.errstate(divide="ignore", invalid="ignore"):
            if q > 1:
                cf = np.where(F > 0, (F / sc / hh) ** (q - 1), 0.0)
                cg = np.where(Gv > 0, (Gv / sc / hh) ** (q - 1), 0.0)
            else:
                cf = np.ones_like(F)
                cg = np.ones_like(Gv)
        grad = np.hstack([cf[:, None] * gF, cg[:, None] * gG])
        singular = (sF & ((F > 0) | (q == 1))) | (sG & ((Gv > 0) | (q == 1)))
        if delta == 0:
            singular |= H == 0
        return H, grad, singular
    if isinstance(fam, Restricted):
        k = fam.axis_dim
        full = np.hstack([np.zeros((len(Z), k)), Z])
        H, g, s = _kernel(fam.parent, full, scale, need_grad)
        return H, (g[:, k:] if g is not None else None), s
    H, g, s = _block_kernel(fam, spec.dimension, Z, delta, need_grad)
    if delta > 0:
        # the subtracted origin value leaves roundoff; H(0) = 0 exactly
        H = np.where(np.any(Z != 0, axis=1), np.maximum(H, 0.0), 0.0)
    return H, g, s


def _as_stack(spec, z):
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = z[None, :] if single else z
    if Z.ndim != 2 or Z.shape[1] != spec.dimension:
        raise NormError(f"expected vectors of dimension {spec.dimension}, got shape {z.shape}")
    return Z, single


def norm_eval(spec: NormSpec, z, scale: float = 1.0):
    """H(z) for one vector or a stack of vectors (rows)."""
    Z, single = _as_stack(spec, z)
    H, _, _ = _kernel(spec, Z, scale, False)
    return float(H[0]) if single else H


def value_and_grad(spec: NormSpec, Z, scale: float = 1.0):
    """Vectorized ``(H, grad H, singular_mask)`` without raising."""
    Z, _ = _as_stack(spec, Z)
    return _kernel(spec, Z, scale, True)


def norm_grad(spec: NormSpec, z, scale: float = 1.0):
    Z, single = _as_stack(spec, z)
    _, G, sing = _kernel(spec, Z, scale, True)
    if np.any(sing):
        raise SingularPointError("norm is not differentiable at the requested point(s)")
    return G[0] if single else G


def flux(spec: NormSpec, p: float, z, scale: float = 1.0):
    """The p-flux ``H^(p-1)(z) grad H(z)``, continuously extended by 0 at z = 0."""
    if not p > 1:
        raise ParameterError(f"flux needs p > 1, got {p}")
    Z, single = _as_stack(spec, z)
    H, G, sing = _kernel(spec, Z, scale, True)
    zero = H == 0
    if np.any(sing & ~zero):
        raise SingularPointError("flux undefined on the non-differentiability set")
    out = np.where(zero[:, None], 0.0, (H ** (p - 1))[:, None] * G)
    return out[0] if single else out


# --------------------------------------------------------------------------
# duals


def _conj(x):
    return math.inf if x == 1 else x / (x - 1)


def _pnorm(X, r):
    X = np.abs(X)
    if r == math.inf:
        return X.max(axis=1)
    m = X.max(axis=1)
    s = np.where(m > 0, m, 1.0)
    return s * np.sum((X / s[:, None]) ** r, axis=1) ** (1.0 / r)


def _dual_analytic(spec: NormSpec, X):
    fam = spec.family
    if isinstance(fam, QNorm):
        return _pnorm(X, _conj(fam.q))
    if isinstance(fam, ScaledEuclidean):
        return _pnorm(X, 2.0) / fam.t
    if isinstance(fam, MatrixQNorm):
        ainv_t = np.linalg.inv(np.asarray(fam.matrix)).T
        return _pnorm(X @ ainv_t.T, _conj(fam.q))
    if isinstance(fam, BlockNorm):
        qc = _conj(fam.q)
        parts, s = [], 0
        for m, pb, w in zip(fam.sizes, fam.exponents, fam.weights):
            parts.append(_pnorm(X[:, s:s + m], _conj(pb)) * w ** (-1.0 / fam.q))
            s += m
        return _pnorm(np.stack(parts, axis=1), qc)
    if isinstance(fam, SplitNorm):
        r = fam.axis.dimension
        f0 = _dual_analytic(fam.axis, X[:, :r])
        g0 = _dual_analytic(fam.cross, X[:, r:])
        if f0 is None or g0 is None:
            return None
        return _pnorm(np.stack([f0, g0], axis=1), _conj(fam.q))
    return None


def _sphere_search(fun, n, count, rng, maximize=True, rounds=6, golden_steps=20):
    """Extremize ``fun`` (vectorized over rows) on the unit sphere.

    Dense random sampling, then golden-section refinement along great
    circles through the incumbent in each tangent direction.
    """
    X = rng.standard_normal((count, n))
    X /= np.linalg.norm(X, axis=1)[:, None]
    sgn = 1.0 if maximize else -1.0
    vals = sgn * fun(X)
    x = X[np.argmax(vals)]
    best = float(vals.max())
    if n == 1:
        return sgn * best, x
    width = 2.0 * math.pi / count ** (1.0 / max(n - 1, 1))
    gr = (math.sqrt(5) - 1) / 2
    for _ in range(rounds):
        basis = np.linalg.svd(x[None, :])[2][1:]
        for v in basis:
            def g(t, x=x, v=v):
                return sgn * float(fun((x * math.cos(t) + v * math.sin(t))[None, :])[0])
            lo, hi = -width, width
            c, d = hi - gr * (hi - lo), lo + gr * (hi - lo)
            gc, gd = g(c), g(d)
            for _ in range(golden_steps):
                if gc > gd:
                    hi, d, gd = d, c, gc
                    c = hi - gr * (hi - lo)
                    gc = g(c)
                else:
                    lo, c, gc = c, d, gd
                    d = lo + gr * (hi - lo)
                    gd = g(d)
            t = (lo + hi) / 2
            if g(t) > best:
                best = g(t)
                x = x * math.cos(t) + v * math.sin(t)
                x /= np.linalg.norm(x)
        width *= 0.5
    return sgn * best, x


def dual_eval(spec: NormSpec, xi, method: str = "auto", seed: int = 0):
    """Dual norm ``H0(xi) = sup_{x != 0} <xi, x> / H(x)``.

    Closed forms are used for every family built from q-norm compositions;
    ``method="sample"`` (or a restricted norm) falls back to sphere sampling
    with local refinement, which is accurate to roughly 1e-6.
    """
    X, single = _as_stack(spec, xi)
    exact = spec.smoothed(0.0)
    out = _dual_analytic(exact, X) if method == "auto" else None
    if out is None:
        n = spec.dimension
        res = []
        for row in X:
            if not np.any(row):
                res.append(0.0)
                continue
            rng = np.random.default_rng(seed)
            fun = lambda P, row=row: (P @ row) / norm_eval(exact, P)  # noqa: E731
            val, _ = _sphere_search(fun, n, 10_000 * n, rng, maximize=True)
            res.append(max(val, 0.0))
        out = np.array(res)
    return float(out[0]) if single else out


def dual_spec(spec: NormSpec) -> NormSpec | None:
    """Dual as a NormSpec where it stays inside the supported families."""
    fam = spec.family
    if isinstance(fam, QNorm) and fam.q > 1:
        return NormSpec(QNorm(_conj(fam.q)), spec.dimension)
    if isinstance(fam, MatrixQNorm) and fam.q > 1:
        ainv_t = np.linalg.inv(np.asarray(fam.matrix)).T
        return matrix_qnorm(_conj(fam.q), ainv_t)
    if isinstance(fam, ScaledEuclidean):
        return NormSpec(ScaledEuclidean(1.0 / fam.t), spec.dimension)
    return None


# --------------------------------------------------------------------------
# equivalence constants and property checks


@dataclass(frozen=True)
class ThetaBounds:
    theta1: float
    theta2: float
    grad_bound_c: float


def theta_bounds(spec: NormSpec, probe_count: int = 2000, seed: int = 0) -> ThetaBounds:
    n = spec.dimension
    if probe_count < 2 * n:
        raise ParameterError("probe_count must be at least 2 * dimension")
    exact = spec.smoothed(0.0)
    fam = exact.family
    if isinstance(fam, QNorm):
        k = n ** (1.0 / fam.q - 0.5)
        t1, t2 = min(1.0, k), max(1.0, k)
    elif isinstance(fam, ScaledEuclidean):
        t1 = t2 = fam.t
    else:
        rng = np.random.default_rng(seed)
        fun = lambda P: norm_eval(exact, P)  # noqa: E731
        t1, _ = _sphere_search(fun, n, probe_count, rng, maximize=False)
        t2, _ = _sphere_search(fun, n, probe_count, rng, maximize=True)
    c = math.sqrt(sum(norm_eval(exact, e) ** 2 for e in np.eye(n)))
    return ThetaBounds(float(t1), float(t2), max(c, float(t2)))


@dataclass
class AxiomReport:
    sample_count: int
    homogeneity: float
    subadditivity: float
    euler: float
    holder: float
    dual_of_grad: float
    skipped_singular: int = 0

    def violations(self) -> dict:
        return {k: getattr(self, k) for k in
                ("homogeneity", "subadditivity", "euler", "holder", "dual_of_grad")}

    def max_violation(self) -> float:
        return max(self.violations().values())


def check_norm_axioms(spec: NormSpec, sample_count: int = 1000, seed: int = 0) -> AxiomReport:
    """Largest relative violation of the norm identities over random samples."""
    if not spec.exact:
        raise ParameterError("axiom checks need the exact (unsmoothed) norm")
    n = spec.dimension
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((sample_count, n)) * np.exp(rng.uniform(-2, 2, (sample_count, 1)))
    Y = rng.standard_normal((sample_count, n))
    Hx = norm_eval(spec, X)
    Hy = norm_eval(spec, Y)

    hom = 0.0
    for t in (-2.0, -1.0, 0.5, 3.0):
        hom = max(hom, float(np.max(np.abs(norm_eval(spec, t * X) - abs(t) * Hx) / Hx)))
    sub = float(np.max(np.maximum(norm_eval(spec, X + Y) - Hx - Hy, 0.0) / (Hx + Hy)))

    H, G, sing = value_and_grad(spec, X)
    ok = ~sing
    euler = float(np.max(np.abs(np.sum(G[ok] * X[ok], axis=1) - H[ok]) / H[ok])) if ok.any() else 0.0
    d_grad = dual_eval(spec, G[ok]) if ok.any() else np.ones(1)
    dual_of_grad = float(np.max(np.abs(d_grad - 1.0)))

    D = dual_eval(spec, Y)
    holder = float(np.max(np.maximum(np.sum(Y * X, axis=1) - D * Hx, 0.0)
                          / (np.linalg.norm(X, axis=1) * np.linalg.norm(Y, axis=1))))
    return AxiomReport(sample_count, hom, sub, euler, holder, dual_of_grad, int(sing.sum()))


# monotonicity constants --------------------------------------------------------

ASSUMPTIONS = ("A1_pge2", "A1_plt2", "A2", "A3")


@dataclass
class MonotonicityReport:
    assumption: str
    p: float
    sample_count: int
    empirical_constant: float
    worst_pair: tuple = field(repr=False)

    def __str__(self):
        kind = "upper" if self.assumption == "A2" else "lower"
        return (f"{self.assumption} (p={self.p:g}): empirical {kind} bound "
                f"{self.empirical_constant:.6g} over {self.sample_count} pairs (not a certificate)")


def _pairs(rng, n, count):
    def draw(k):
        d = rng.standard_normal((k, n))
        d /= np.linalg.norm(d, axis=1)[:, None]
        return d * np.exp(rng.uniform(math.log(0.1), math.log(10.0), (k, 1)))

    z1 = draw(count)
    z2 = draw(count)
    # half of the pairs are close neighbours, where the ratios tend to be extremal
    half = count // 2
    z2[:half] = z1[:half] * (1 + rng.uniform(-0.3, 0.3, (half, 1))) + \
        0.1 * rng.standard_normal((half, n)) * np.linalg.norm(z1[:half], axis=1)[:, None]
    return z1, z2


def _ratio(spec, p, assumption, z1, z2):
    f1, f2 = flux(spec, p, z1), flux(spec, p, z2)
    d = z1 - z2
    dist = np.linalg.norm(d, axis=1)
    s = np.linalg.norm(z1, axis=1) + np.linalg.norm(z2, axis=1)
    inner = np.sum((f1 - f2) * d, axis=1)
    if assumption in ("A1_pge2", "A3"):
        return inner / dist**p
    if assumption == "A1_plt2":
        return inner / (dist**2 * s ** (p - 2))
    return np.linalg.norm(f1 - f2, axis=1) / (dist * s ** (p - 2))


def estimate_monotonicity(spec: NormSpec, p: float, assumption: str,
                          sample_count: int = 20000, seed: int = 0) -> MonotonicityReport:
    """Empirical extremal ratio behind the monotonicity/continuity assumptions.

    Lower-bound constants (A1 variants, A3) report the minimum ratio over
    the samples, the Hoelder-type continuity constant (A2) the maximum.
    """
    if assumption not in ASSUMPTIONS:
        raise ParameterError(f"unknown assumption {assumption!r}")
    if assumption in ("A1_pge2", "A3") and p < 2:
        raise ParameterError(f"{assumption} needs p >= 2")
    if assumption in ("A1_plt2", "A2") and not 1 < p < 2:
        raise ParameterError(f"{assumption} needs 1 < p < 2")
    if assumption == "A3" and not isinstance(spec.family, SplitNorm):
        raise ParameterError("A3 is defined for split norms only")
    rng = np.random.default_rng(seed)

    if assumption == "A3":
        best, pair = math.inf, None
        for part in (spec.family.axis, spec.family.cross):
            z1, z2 = _pairs(rng, part.dimension, sample_count)
            keep = np.linalg.norm(z1 - z2, axis=1) >= 1e-8
            r = _ratio(part, p, "A3", z1[keep], z2[keep])
            i = int(np.argmin(r))
            if r[i] < best:
                best, pair = float(r[i]), (z1[keep][i], z2[keep][i])
        return MonotonicityReport(assumption, p, sample_count, best, pair)

    z1, z2 = _pairs(rng, spec.dimension, sample_count)
    keep = np.linalg.norm(z1 - z2, axis=1) >= 1e-8
    z1, z2 = z1[keep], z2[keep]
    r = _ratio(spec, p, assumption, z1, z2)
    i = int(np.argmax(r) if assumption == "A2" else np.argmin(r))
    return MonotonicityReport(assumption, p, sample_count, float(r[i]), (z1[i], z2[i]))
