"""Command-line front end.

Exit status: 0 when everything ran and every check passed, 2 when a check
failed (the failing row is printed), 1 on bad input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, format_config, parse_config, with_overrides
from .discrete import lp_norm
from .experiments import (GAP_SLACK, Check, LadderResult, cross_mesh, cylinder_mesh,
                          load_field, run_ladder, run_picone)
from .mesh import MeshError
from .norms import NormError, ParameterError, check_norm_axioms, parse_norm
from .output import atomic_write_text, write_csv, write_field_csv, write_trace_csv
from .solve import solve_cross_section, solve_dirichlet, solve_eigen

AXIOM_TOL = 1e-8
COMMANDS = ("solve", "cross", "eigen", "rates", "check-norm", "picone", "poincare")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="finslab", description="Finsler p-Laplace problems on long cylinders.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("descriptor", nargs="?", help="norm descriptor (check-norm only)")
    ap.add_argument("--config", type=Path, help="configuration file")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--set", dest="overrides", action="append", default=[],
                    metavar="KEY=VALUE", help="override a config key (repeatable)")
    ap.add_argument("--workers", type=int, help="worker processes for ladders")
    ap.add_argument("--seed", type=int, help="solver seed")
    return ap


def load_config(args) -> RunConfig:
    text = ""
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise InputError(f"cannot read config {args.config}: {exc.strerror}") from None
    overrides = list(args.overrides)
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    cfg = parse_config(text, overrides)
    if args.command == "poincare" and cfg.kind != "poincare":
        cfg = with_overrides(cfg, kind="poincare")
    return cfg


def _report(checks, out=None) -> int:
    out = out or sys.stdout
    status = 0
    for c in checks:
        print(c.line(), file=out)
        if not c.passed:
            status = 2
            if c.row is not None:
                print("  failing row: " + ",".join(repr(v) for v in c.row), file=out)
    return status


def _gnuplot(result: LadderResult, csv_name: str) -> str:
    cols = result.header
    lines = ['set datafile separator ","', "set key autotitle columnhead",
             f'set xlabel "{cols[0]}"', "set logscale y" if result.kind == "solution_rate"
             else "unset logscale"]
    plots = [f'"{csv_name}" using 1:{k + 1} with linespoints' for k in range(1, len(cols))]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def _sidecar(cfg: RunConfig, result: LadderResult) -> str:
    parts = [f"finslab {__version__}", f"kind = {result.kind}",
             f"seeds = {', '.join(map(str, cfg.seeds))}", f"solver seed = {cfg.seed}", "",
             "# config", format_config(cfg).rstrip(), "", "# fits"]
    parts += [fit.summary() for fit in result.fits.values()] or ["none"]
    parts += ["", "# notes", *result.notes, "", "# checks", *(c.line() for c in result.checks)]
    return "\n".join(parts) + "\n"


def write_ladder(out: Path, cfg: RunConfig, result: LadderResult, name: str | None = None):
    name = name or result.kind
    write_csv(out / f"{name}.csv", result.header, result.rows)
    atomic_write_text(out / "fits.txt", _sidecar(cfg, result))
    atomic_write_text(out / f"{name}.gp", _gnuplot(result, f"{name}.csv"))


def cmd_solve(cfg, out):
    mesh = cylinder_mesh(cfg, cfg.length)
    res = solve_dirichlet(mesh, cfg.norm_spec(), cfg.p, load_field(cfg, cross_mesh(cfg)),
                          cfg.solve_options())
    write_field_csv(out / "solution.csv", res.field)
    write_trace_csv(out / "trace.csv", res.energy_trace)
    print(mesh.summary(), end="")
    print(f"energy = {res.energy.total!r}")
    print(f"iterations = {res.iterations}, weak residual = {res.weak_residual!r}")
    return [Check("solve converged", res.converged,
                  f"residual {res.weak_residual!r}, threshold {res.threshold!r}",
                  (cfg.length, res.weak_residual, res.threshold))]


def cmd_cross(cfg, out):
    mesh = cross_mesh(cfg)
    res = solve_cross_section(mesh, cfg.norm_spec(False), cfg.p, load_field(cfg, mesh),
                              cfg.solve_options())
    write_field_csv(out / "cross_solution.csv", res.field)
    write_trace_csv(out / "cross_trace.csv", res.energy_trace)
    print(f"J_inf = {res.energy.total!r}")
    print(f"iterations = {res.iterations}, weak residual = {res.weak_residual!r}")
    return [Check("cross-section solve converged", res.converged,
                  f"residual {res.weak_residual!r}, threshold {res.threshold!r}")]


def cmd_eigen(cfg, out):
    cyl, cross = cylinder_mesh(cfg, cfg.length), cross_mesh(cfg)
    lam = min((solve_eigen(cyl, cfg.norm_spec(), cfg.p, cfg.solve_options(seed=s))
               for s in cfg.seeds), key=lambda r: r.eigenvalue)
    mu = min((solve_eigen(cross, cfg.norm_spec(False), cfg.p, cfg.solve_options(seed=s))
              for s in cfg.seeds), key=lambda r: r.eigenvalue)
    write_field_csv(out / "eigenfunction.csv", lam.field)
    write_trace_csv(out / "rayleigh_trace.csv", lam.rayleigh_trace, "rayleigh")
    gap = lam.eigenvalue - mu.eigenvalue
    write_csv(out / "eigen.csv", ("ell", "lambda", "mu_inf", "gap"),
              [(cfg.length, lam.eigenvalue, mu.eigenvalue, gap)])
    print(f"lambda = {lam.eigenvalue!r}, mu_inf = {mu.eigenvalue!r}, "
          f"lp_norm = {lp_norm(cyl, lam.field, cfg.p)!r}")
    return [Check("eigen solves converged", lam.converged and mu.converged,
                  f"residuals {lam.weak_residual!r}, {mu.weak_residual!r}"),
            Check(f"lambda >= mu_inf - {GAP_SLACK!r}", gap >= -GAP_SLACK, f"gap {gap!r}",
                  (cfg.length, lam.eigenvalue, mu.eigenvalue, gap))]


def cmd_rates(cfg, out):
    result = run_ladder(cfg)
    write_ladder(out, cfg, result)
    for row in result.rows:
        print(",".join(repr(v) for v in row))
    for note in result.notes:
        print(note)
    return result.checks


def cmd_check_norm(cfg, out, descriptor):
    spec = parse_norm(descriptor, cfg.dimension, cfg.m) if descriptor else cfg.norm_spec()
    rep = check_norm_axioms(spec, 1000, cfg.seed)
    names = ("homogeneity", "subadditivity", "euler", "holder", "dual_of_grad")
    rows = [(n, getattr(rep, n)) for n in names]
    write_csv(out / "check_norm.csv", ("axiom", "max_violation"), rows)
    for n, v in rows:
        print(f"{n} = {v!r}")
    return [Check(f"{n} <= {AXIOM_TOL!r}", v <= AXIOM_TOL, f"{v!r}", (n, v)) for n, v in rows]


def cmd_picone(cfg, out):
    result = run_picone(cfg)
    write_csv(out / "picone.csv", result.header, result.rows)
    return result.checks


def dispatch(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.descriptor is not None and args.command != "check-norm":
        print("finslab: error: a positional descriptor is only accepted by check-norm",
              file=sys.stderr)
        return 1
    try:
        cfg = load_config(args)
        out = args.out
        atomic_write_text(out / "config.txt", format_config(cfg))
        if args.command == "solve":
            checks = cmd_solve(cfg, out)
        elif args.command == "cross":
            checks = cmd_cross(cfg, out)
        elif args.command == "eigen":
            checks = cmd_eigen(cfg, out)
        elif args.command in ("rates", "poincare"):
            checks = cmd_rates(cfg, out)
        elif args.command == "check-norm":
            checks = cmd_check_norm(cfg, out, args.descriptor)
        else:
            checks = cmd_picone(cfg, out)
    except (InputError, ConfigError, NormError, MeshError, ParameterError) as exc:
        print(f"finslab: error: {exc}", file=sys.stderr)
        return 1
    return _report(checks)


def main(argv=None):
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
