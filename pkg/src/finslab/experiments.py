"""Length ladders on growing cylinders and decay-model fits.

Each experiment solves one problem per cylinder length ``l`` (jobs run in a
process pool, rows always come back ordered by ``l``) and compares against
the cross-section limit problem.  Results carry the table, the fits and a
list of named checks; a failed check is what the CLI turns into exit code 2.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .discrete import (Field, axis_average, energy, extend_constant, grad_lp_norm,
                       load_vector)
from .mesh import build_cross_section, build_cylinder
from .norms import (NormSpec, QNorm, ScaledEuclidean, SplitNorm, qnorm, theta_bounds)
from .solve import picone_check, solve_cross_section, solve_dirichlet, solve_eigen

LadderConfig = RunConfig

HEADERS = {
    "solution_rate": ("ell", "err_halfcyl", "grad_lp_norm"),
    "gradient_bound": ("ell", "grad_lp_norm", "ratio"),
    "energy_rate": ("ell", "scaled_energy", "gap", "gap_times_ell"),
    "eigen_rate": ("ell", "lambda", "gap", "gap_times_ell", "gap_times_ell_p"),
    "poincare": ("ell", "C_P"),
}
# allowed undershoot of the energy and eigen sandwiches
GAP_SLACK = 1e-6
NOISE_FACTOR = 100.0  # fit points below NOISE_FACTOR * tol_grad are dropped


class RateFitError(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    """``v = constant * l**exponent`` (power) or ``constant * exp(-rate * l)``."""

    model: str
    exponent_or_rate: float
    constant: float
    r_squared: float
    dropped: int = 0

    def predict(self, ell):
        ell = np.asarray(ell, dtype=float)
        if self.model == "power":
            return self.constant * ell**self.exponent_or_rate
        return self.constant * np.exp(-self.exponent_or_rate * ell)

    def summary(self) -> str:
        name = "exponent" if self.model == "power" else "rate"
        return (f"{self.model}: {name}={self.exponent_or_rate!r} constant={self.constant!r} "
                f"r_squared={self.r_squared!r} dropped={self.dropped}")


def fit_rate(points, model: str, floor: float = 0.0) -> RateFit:
    """Least squares in log-log (power) or semilog (exponential) coordinates.

    Values ``<= floor`` (and nonpositive ones) are excluded and counted.
    """
    if model not in ("power", "exponential"):
        raise ValueError(f"unknown model {model!r}")
    pts = [(float(x), float(v)) for x, v in points]
    keep = [(x, v) for x, v in pts if v > max(floor, 0.0) and math.isfinite(v)]
    dropped = len(pts) - len(keep)
    if len(keep) < 3:
        raise RateFitError(f"need at least 3 usable points, have {len(keep)} "
                           f"({dropped} dropped)")
    x = np.array([k[0] for k in keep])
    y = np.log([k[1] for k in keep])
    if model == "power":
        x = np.log(x)
    X = np.stack([np.ones_like(x), x], axis=1)
    (c0, c1), *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - (c0 + c1 * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    r2 = min(max(r2, 0.0), 1.0)
    slope = float(c1) if model == "power" else float(-c1)
    return RateFit(model, slope, float(math.exp(c0)), r2, dropped)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    row: tuple | None = None

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class LadderResult:
    kind: str
    header: tuple
    rows: list
    fits: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    aborted: bool = False

    @property
    def passed(self) -> bool:
        return not self.aborted and all(c.passed for c in self.checks)

    def column(self, name):
        k = self.header.index(name)
        return [r[k] for r in self.rows]


# --------------------------------------------------------------------------
# problem plumbing


def cross_mesh(cfg: RunConfig):
    return build_cross_section(cfg.cross, cfg.h_cross)


def cylinder_mesh(cfg: RunConfig, ell: float, dirichlet: str = "all"):
    return build_cylinder(ell, cfg.m, cfg.cross, cfg.h_axis, cfg.h_cross, dirichlet)


def load_field(cfg: RunConfig, cross):
    """The load as a float or as a field on ``cross``."""
    if isinstance(cfg.f, tuple):
        return Field(cross, np.array(cfg.f), constrained=False)
    return float(cfg.f)


def zero_load(cfg: RunConfig) -> bool:
    return not np.any(np.asarray(cfg.f, dtype=float))


def is_split_form(spec: NormSpec, m: int) -> bool:
    """True when H = (F^q(X1) + G^q(X2))^(1/q) with an m-dimensional axis block."""
    fam = spec.family
    if isinstance(fam, (QNorm, ScaledEuclidean)):
        return True
    return isinstance(fam, SplitNorm) and fam.axis.dimension == m


def exponential_regime(spec: NormSpec, p: float, m: int) -> bool:
    """Split form with q = p: the error is expected to decay like exp(-beta l)."""
    fam = spec.family
    if isinstance(fam, QNorm):
        return fam.q == p
    if isinstance(fam, ScaledEuclidean):
        return p == 2
    if isinstance(fam, SplitNorm):
        return fam.axis.dimension == m and fam.q == p
    return False


def polynomial_exponent(p: float, m: int) -> float:
    """Exponent of the algebraic error bound ``C l**e`` on the half cylinder."""
    if p >= 2:
        return m - p / (p - 1)
    return m - p * p / (2 - p)


def energy_lower_bound(spec: NormSpec, p: float, load_norm: float, poincare: float) -> float:
    """Lower bound of the discrete energy from coercivity.

    With ``A = theta_1**p / C_P**p`` and ``b`` the dual (``p'``) norm of the
    load, ``J(u) >= A t**p / p - b t`` for ``t = ||u||_p``, whose minimum is
    ``-(1 - 1/p) b**p' A**(-1/(p-1))``.
    """
    theta1 = theta_bounds(spec).theta1
    A = theta1**p / poincare**p
    pc = p / (p - 1)
    return -(1 - 1 / p) * load_norm**pc * A ** (-1 / (p - 1))


def _run_jobs(fn, args, workers):
    if workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *a) for a in args]
        return [f.result() for f in futures]


def _convergence_check(outcomes, ells):
    bad = [(ell, o) for ell, o in zip(ells, outcomes) if not o["converged"]]
    if not bad:
        return None
    ell, o = bad[0]
    return Check("all solves converged", False,
                 f"l={ell!r}: residual {o['residual']!r} above threshold {o['threshold']!r}",
                 (ell, o["residual"], o["threshold"]))


def _limit_solution(cfg: RunConfig):
    cross = cross_mesh(cfg)
    res = solve_cross_section(cross, cfg.norm_spec(False), cfg.p, load_field(cfg, cross),
                              cfg.solve_options())
    return cross, res


def _dirichlet_job(cfg: RunConfig, ell: float, limit_values):
    cyl = cylinder_mesh(cfg, ell)
    cross = cross_mesh(cfg)
    spec = cfg.norm_spec()
    f = load_field(cfg, cross)
    res = solve_dirichlet(cyl, spec, cfg.p, f, cfg.solve_options())
    u = res.field
    out = {"converged": res.converged, "residual": res.weak_residual,
           "threshold": res.threshold,
           "grad": grad_lp_norm(cyl, u, cfg.p),
           "energy": res.energy.total}
    if limit_values is not None:
        w = Field(cross, limit_values)
        diff = u - extend_constant(w, cyl)
        out["err"] = grad_lp_norm(cyl, diff, cfg.p, "inside_half_cylinder")
        avg = axis_average(u, cross)
        out["jensen"] = energy(cross, cfg.norm_spec(False), cfg.p, f, avg).total
    return out


# --------------------------------------------------------------------------
# experiments


def run_solution_rate(cfg: RunConfig, workers: int | None = None) -> LadderResult:
    """Half-cylinder gradient error of ``u_l - u_inf`` along the ladder."""
    ells = cfg.ell_list
    cross, lim = _limit_solution(cfg)
    outcomes = _run_jobs(_dirichlet_job, [(cfg, ell, lim.field.values) for ell in ells],
                         workers or cfg.workers)
    rows = [(ell, o["err"], o["grad"]) for ell, o in zip(ells, outcomes)]
    result = LadderResult("solution_rate", HEADERS["solution_rate"], rows)
    if not lim.converged:
        result.checks.append(Check("limit problem converged", False,
                                   f"residual {lim.weak_residual!r}"))
        result.aborted = True
    bad = _convergence_check(outcomes, ells)
    if bad:
        result.checks.append(bad)
        result.aborted = True
        return result
    spec = cfg.norm_spec()
    errs = [r[1] for r in rows]
    if zero_load(cfg):
        result.checks.append(Check("zero load gives zero error", all(e == 0 for e in errs),
                                   f"max error {max(errs)!r}"))
        result.notes.append("fits degenerate: zero load")
        return result
    worst = max(((b / a, ell) for a, b, ell in zip(errs, errs[1:], ells[1:]) if a > 0),
                default=(0.0, None))
    result.checks.append(Check("error nonincreasing in l (1% slack)", worst[0] <= 1.01,
                               f"largest successive ratio {worst[0]!r} at l={worst[1]!r}"))
    pts = list(zip(ells, errs))
    floor = NOISE_FACTOR * cfg.tol_grad
    for model in ("power", "exponential"):
        try:
            result.fits[model] = fit_rate(pts, model, floor)
        except ValueError as exc:
            result.notes.append(f"{model} fit unavailable: {exc}")
    expo = polynomial_exponent(cfg.p, cfg.m)
    normalized = [e * ell ** (-expo) for ell, e in pts]
    C = max(normalized)
    result.notes.append(f"ladder-wide constant for err <= C l^{expo!r}: C={C!r}")
    if exponential_regime(spec, cfg.p, cfg.m):
        fe, fp = result.fits.get("exponential"), result.fits.get("power")
        if fe is None or fp is None:
            result.checks.append(Check("exponential fit available", False,
                                       "too few errors above the noise floor "
                                       f"{floor!r} (errors {errs!r})"))
        else:
            result.checks.append(Check("exponential fit r^2 >= 0.98", fe.r_squared >= 0.98,
                                       f"r^2={fe.r_squared!r}"))
            result.checks.append(Check("decay rate positive", fe.exponent_or_rate > 0,
                                       f"beta={fe.exponent_or_rate!r}"))
            result.checks.append(Check("exponential r^2 >= power r^2",
                                       fe.r_squared >= fp.r_squared,
                                       f"{fe.r_squared!r} vs {fp.r_squared!r}"))
    elif cfg.p >= 2:
        spread = max(normalized) / min(normalized) if min(normalized) > 0 else math.inf
        i = int(np.argmin(normalized))
        result.checks.append(Check(f"err * l^{-expo!r} max/min <= 4", spread <= 4,
                                   f"max/min={spread!r}", rows[i]))
        fp = result.fits.get("power")
        if fp is not None:
            result.checks.append(Check("power exponent <= bound exponent + 0.5",
                                       fp.exponent_or_rate <= expo + 0.5,
                                       f"exponent {fp.exponent_or_rate!r}, bound {expo!r}"))
    else:
        result.notes.append("1 < p < 2: rate reported, not asserted")
    return result


def run_gradient_bound(cfg: RunConfig, workers: int | None = None) -> LadderResult:
    """``||grad u_l||_p / l^(m/p)`` along the ladder."""
    ells = cfg.ell_list
    outcomes = _run_jobs(_dirichlet_job, [(cfg, ell, None) for ell in ells],
                         workers or cfg.workers)
    rows = [(ell, o["grad"], o["grad"] / ell ** (cfg.m / cfg.p)) for ell, o in zip(ells, outcomes)]
    result = LadderResult("gradient_bound", HEADERS["gradient_bound"], rows)
    bad = _convergence_check(outcomes, ells)
    if bad:
        result.checks.append(bad)
        result.aborted = True
        return result
    ratios = [r[2] for r in rows]
    if zero_load(cfg):
        result.checks.append(Check("zero load gives zero ratios", all(r == 0 for r in ratios),
                                   f"max ratio {max(ratios)!r}"))
    else:
        spread = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
        result.checks.append(Check("ratio max/min <= 2", spread <= 2, f"max/min={spread!r}"))
    return result


def run_energy_rate(cfg: RunConfig, workers: int | None = None) -> LadderResult:
    """Scaled energies ``J_l(u_l)/l^m`` against the limit energy ``J_inf(u_inf)``."""
    ells = cfg.ell_list
    cross, lim = _limit_solution(cfg)
    j_inf = lim.energy.total
    outcomes = _run_jobs(_dirichlet_job, [(cfg, ell, lim.field.values) for ell in ells],
                         workers or cfg.workers)
    rows = []
    for ell, o in zip(ells, outcomes):
        scaled = o["energy"] / ell**cfg.m
        gap = scaled - j_inf
        rows.append((ell, scaled, gap, gap * ell))
    result = LadderResult("energy_rate", HEADERS["energy_rate"], rows)
    result.notes.append(f"limit energy J_inf = {j_inf!r}")
    bad = _convergence_check(outcomes, ells)
    if bad or not lim.converged:
        result.checks.append(bad or Check("limit problem converged", False,
                                          f"residual {lim.weak_residual!r}"))
        result.aborted = True
        return result
    low = min(rows, key=lambda r: r[2])
    result.checks.append(Check(f"gap >= -{GAP_SLACK!r}", low[2] >= -GAP_SLACK,
                               f"smallest gap {low[2]!r} at l={low[0]!r}", low))
    jensen = min(((o["jensen"] - j_inf, ell) for ell, o in zip(ells, outcomes)))
    result.checks.append(Check("J_inf(axis average of u_l) >= J_inf(u_inf)",
                               jensen[0] >= -GAP_SLACK,
                               f"smallest difference {jensen[0]!r} at l={jensen[1]!r}"))
    if not zero_load(cfg):
        pos = [r[3] for r in rows if r[3] > 0]
        spread = max(pos) / min(pos) if pos else math.inf
        result.checks.append(Check("gap*l max/min <= 4 (positive entries)", spread <= 4,
                                   f"max/min={spread!r}"))
    return result


def _eigen_job(cfg: RunConfig, ell: float | None, part: str = "full"):
    seeds = cfg.seeds
    if ell is None:
        mesh, spec = cross_mesh(cfg), cfg.norm_spec(False)
    elif part == "cross":
        mesh = cylinder_mesh(cfg, ell, "strip")
        spec = qnorm(2, len(cfg.cross))
    else:
        mesh, spec = cylinder_mesh(cfg, ell), cfg.norm_spec()
    best = None
    for s in seeds:
        r = solve_eigen(mesh, spec, cfg.p, cfg.solve_options(seed=s), part=part)
        if best is None or r.eigenvalue < best.eigenvalue:
            best = r
    return {"lambda": best.eigenvalue, "converged": best.converged,
            "residual": best.weak_residual, "threshold": cfg.tol_grad}


def run_eigen_rate(cfg: RunConfig, workers: int | None = None) -> LadderResult:
    """First eigenvalue gaps ``lambda_l - mu_inf`` (minimum over the seeds)."""
    ells = cfg.ell_list
    mu = _eigen_job(cfg, None)
    outcomes = _run_jobs(_eigen_job, [(cfg, ell) for ell in ells], workers or cfg.workers)
    p = cfg.p
    rows = []
    for ell, o in zip(ells, outcomes):
        gap = o["lambda"] - mu["lambda"]
        rows.append((ell, o["lambda"], gap, gap * ell, gap * ell**p))
    result = LadderResult("eigen_rate", HEADERS["eigen_rate"], rows)
    result.notes.append(f"mu_inf = {mu['lambda']!r}")
    bad = _convergence_check(outcomes, ells)
    if bad or not mu["converged"]:
        result.checks.append(bad or Check("limit eigenproblem converged", False,
                                          f"residual {mu['residual']!r}"))
        result.aborted = True
        return result
    low = min(rows, key=lambda r: r[2])
    result.checks.append(Check(f"lambda_l >= mu_inf - {GAP_SLACK!r}", low[2] >= -GAP_SLACK,
                               f"smallest gap {low[2]!r} at l={low[0]!r}", low))
    try:
        result.fits["power"] = fit_rate([(r[0], r[2]) for r in rows], "power",
                                        NOISE_FACTOR * cfg.tol_grad)
    except ValueError as exc:
        result.notes.append(f"power fit unavailable: {exc}")
    if is_split_form(cfg.norm_spec(), cfg.m):
        scaled = [r[4] for r in rows]
        ok = min(scaled) > 0
        spread = max(scaled) / min(scaled) if ok else math.inf
        result.checks.append(Check("gap*l^p positive with max/min <= 4", spread <= 4,
                                   f"max/min={spread!r}"))
        fp = result.fits.get("power")
        if fp is not None:
            result.checks.append(Check("gap power exponent within 0.3 of -p",
                                       abs(fp.exponent_or_rate + p) <= 0.3,
                                       f"exponent {fp.exponent_or_rate!r}"))
    else:
        pos = [r[3] for r in rows if r[3] > 0]
        spread = max(pos) / min(pos) if pos else math.inf
        result.notes.append(f"gap*l max/min = {spread!r}")
    return result


def run_poincare(cfg: RunConfig, workers: int | None = None) -> LadderResult:
    """Strip Poincare constant ``||u||_p / ||grad_X2 u||_p`` maximized over fields."""
    ells = cfg.ell_list
    outcomes = _run_jobs(_eigen_job, [(cfg, ell, "cross") for ell in ells],
                         workers or cfg.workers)
    rows = [(ell, o["lambda"] ** (-1.0 / cfg.p)) for ell, o in zip(ells, outcomes)]
    result = LadderResult("poincare", HEADERS["poincare"], rows)
    bad = _convergence_check(outcomes, ells)
    if bad:
        result.checks.append(bad)
        result.aborted = True
        return result
    vals = [r[1] for r in rows]
    spread = max(vals) / min(vals)
    result.checks.append(Check("C_P max/min <= 1.05", spread <= 1.05, f"max/min={spread!r}"))
    return result


PICONE_HEADER = ("pair", "max_abs_R_minus_L", "min_L", "skipped")
PICONE_IDENTITY_TOL = 1e-9
PICONE_SIGN_TOL = 1e-10


def random_positive_field(mesh, rng, low: float = 0.05) -> Field:
    """Constrained field with values uniform in ``[low, 1]`` at interior nodes."""
    vals = rng.uniform(low, 1.0, mesh.num_nodes)
    vals[mesh.dirichlet] = 0.0
    return Field(mesh, vals)


def run_picone(cfg: RunConfig, pairs: int = 100) -> LadderResult:
    """Both sides of Picone's identity on seeded random positive pairs."""
    mesh = cylinder_mesh(cfg, cfg.length)
    spec = cfg.norm_spec()
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for k in range(pairs):
        u = random_positive_field(mesh, rng)
        v = random_positive_field(mesh, rng)
        rep = picone_check(mesh, spec, cfg.p, u, v)
        rows.append((k, rep.max_abs_R_minus_L, rep.min_L, rep.skipped))
    result = LadderResult("picone", PICONE_HEADER, rows)
    worst = max(rows, key=lambda r: r[1])
    result.checks.append(Check(f"max |R - L| <= {PICONE_IDENTITY_TOL!r}",
                               worst[1] <= PICONE_IDENTITY_TOL, f"{worst[1]!r}", worst))
    low = min(rows, key=lambda r: r[2])
    result.checks.append(Check(f"min L >= -{PICONE_SIGN_TOL!r}", low[2] >= -PICONE_SIGN_TOL,
                               f"{low[2]!r}", low))
    return result


RUNNERS = {
    "solution_rate": run_solution_rate,
    "gradient_bound": run_gradient_bound,
    "energy_rate": run_energy_rate,
    "eigen_rate": run_eigen_rate,
    "poincare": run_poincare,
}


def run_ladder(cfg: RunConfig, workers: int | None = None) -> LadderResult:
    return RUNNERS[cfg.kind](cfg, workers)
