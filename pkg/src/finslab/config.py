"""Plain-text run configuration.

The format is ``key = value`` lines grouped under ``[problem]``, ``[mesh]``,
``[solver]`` and ``[ladder]`` headers, with ``#`` comments.  Example::

    [problem]
    norm = qnorm(2)
    p = 2
    f = 1
    cross = (0, 1)

    [mesh]
    h = 0.0625

    [ladder]
    kind = solution_rate
    ell_list = 4, 6, 8, 10

``format_config`` prints every field, and ``parse_config(format_config(c)) == c``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields, replace

from .norms import NormError, parse_norm

KINDS = ("solution_rate", "energy_rate", "eigen_rate", "gradient_bound", "poincare")
SECTIONS = ("problem", "mesh", "solver", "ladder")


class ConfigError(ValueError):
    """Bad configuration text; the message names the line and key."""

    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line, self.key = line, key


@dataclass(frozen=True)
class RunConfig:
    """Problem, mesh, solver and ladder settings for one CLI run."""

    norm: str = "qnorm(2)"
    p: float = 2.0
    f: float | tuple = 1.0
    m: int = 1
    cross: tuple = ((0.0, 1.0),)
    h_axis: float = 0.0625
    h_cross: float = 0.0625
    length: float = 4.0
    tol_grad: float = 1e-10
    tol_energy: float = 1e-15
    max_iters: int = 5000
    eps_schedule: tuple | None = None
    seed: int = 0
    kind: str = "solution_rate"
    ell_list: tuple = (4.0, 6.0, 8.0, 10.0)
    seeds: tuple = (0, 1, 2)
    workers: int = 1

    @property
    def dimension(self) -> int:
        return self.m + len(self.cross)

    def norm_spec(self, axis: bool = True):
        """Norm on the cylinder (``axis=True``) or on the cross-section.

        Descriptors without an explicit axis block are evaluated in the
        cross-section dimension for the cross problem.
        """
        if axis:
            return parse_norm(self.norm, self.dimension, self.m)
        from .norms import cross_restriction
        return cross_restriction(parse_norm(self.norm, self.dimension, self.m), self.m)

    def cross_node_count(self) -> int:
        return math.prod(max(int(round((b - a) / self.h_cross)), 1) + 1 for a, b in self.cross)

    def solve_options(self, seed: int | None = None):
        from .solve import SolveOptions
        return SolveOptions(tol_grad=self.tol_grad, tol_energy=self.tol_energy,
                            max_iters=self.max_iters, eps_schedule=self.eps_schedule,
                            seed=self.seed if seed is None else seed)


_SECTION_OF = {
    "norm": "problem", "p": "problem", "f": "problem", "m": "problem", "cross": "problem",
    "h_axis": "mesh", "h_cross": "mesh", "length": "mesh",
    "tol_grad": "solver", "tol_energy": "solver", "max_iters": "solver",
    "eps_schedule": "solver", "seed": "solver",
    "kind": "ladder", "ell_list": "ladder", "seeds": "ladder", "workers": "ladder",
}
# accepted spellings that map onto a field ("h" sets both mesh steps)
_ALIASES = {"ℓ_list": "ell_list", "l_list": "ell_list", "ℓ": "length", "ell": "length"}
_INTERVAL = re.compile(r"\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)")


def _float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"{text!r} is not finite")
    return v


def _int(text):
    v = float(text)
    if v != int(v):
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def _list(text, conv):
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(conv(s) for s in items)


def _box(text):
    parts = [s.strip() for s in text.split("x")]
    box = []
    for part in parts:
        mt = _INTERVAL.fullmatch(part)
        if not mt:
            raise ValueError(f"interval {part!r} is not of the form (a, b)")
        a, b = _float(mt.group(1)), _float(mt.group(2))
        if not b > a:
            raise ValueError(f"empty interval {part!r}")
        box.append((a, b))
    return tuple(box)


def _load(text):
    text = text.strip()
    mt = re.fullmatch(r"nodal\((.*)\)", text, re.S)
    if mt:
        return _list(mt.group(1), _float)
    return _float(text)


def _schedule(text):
    if text.strip().lower() in ("auto", "none"):
        return None
    return _list(text, _float)


_CONVERT = {
    "norm": str.strip, "p": _float, "f": _load, "m": _int, "cross": _box,
    "h_axis": _float, "h_cross": _float, "length": _float,
    "tol_grad": _float, "tol_energy": _float, "max_iters": _int,
    "eps_schedule": _schedule, "seed": _int,
    "kind": str.strip, "ell_list": lambda t: _list(t, _float),
    "seeds": lambda t: _list(t, _int), "workers": _int,
}


def _check(cfg: RunConfig, lines: dict):
    """Cross-field validation; ``lines`` maps keys to source lines."""

    def fail(key, msg):
        raise ConfigError(msg, lines.get(key), key)

    if not cfg.p > 1:
        fail("p", "p must exceed 1")
    if cfg.m < 1:
        fail("m", "m must be at least 1")
    for key in ("h_axis", "h_cross", "length", "tol_grad", "tol_energy"):
        if not getattr(cfg, key) > 0:
            fail(key, f"{key} must be positive")
    if cfg.max_iters < 1:
        fail("max_iters", "max_iters must be positive")
    if cfg.workers < 1:
        fail("workers", "workers must be positive")
    if cfg.kind not in KINDS:
        fail("kind", f"unknown experiment kind {cfg.kind!r}; expected one of {', '.join(KINDS)}")
    ells = cfg.ell_list
    if any(b <= a for a, b in zip(ells, ells[1:])):
        fail("ell_list", "ℓ_list must be increasing")
    if len(ells) < 3:
        fail("ell_list", "ℓ_list needs at least 3 entries")
    if ells[0] <= 0:
        fail("ell_list", "ℓ_list entries must be positive")
    if not cfg.seeds:
        fail("seeds", "seeds must not be empty")
    sched = cfg.eps_schedule
    if sched is not None and (any(e < 0 for e in sched)
                              or any(b >= a for a, b in zip(sched, sched[1:]))):
        fail("eps_schedule", "eps_schedule must be nonnegative and strictly decreasing")
    try:
        cfg.norm_spec()
    except NormError as exc:
        fail("norm", str(exc))
    if isinstance(cfg.f, tuple) and len(cfg.f) != cfg.cross_node_count():
        fail("f", f"nodal load has {len(cfg.f)} values, cross-section mesh has "
                  f"{cfg.cross_node_count()} nodes")


def parse_config(text: str, overrides=()) -> RunConfig:
    """Parse configuration text, then apply ``key=value`` overrides in order."""
    values, lines = {}, {}
    section = None
    entries = []
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", num)
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", num)
        key, value = (s.strip() for s in line.split("=", 1))
        entries.append((num, key, value, section))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        entries.append((None, key, value, None))

    for num, key, value, section in entries:
        name = _ALIASES.get(key, key)
        targets = ("h_axis", "h_cross") if name == "h" else (name,)
        for target in targets:
            if target not in _SECTION_OF:
                raise ConfigError("unknown key", num, key)
            if section is not None and _SECTION_OF[target] != section:
                raise ConfigError(f"key belongs in [{_SECTION_OF[target]}], not [{section}]",
                                  num, key)
            try:
                values[target] = _CONVERT[target](value)
            except ValueError as exc:
                raise ConfigError(f"bad value {value!r}: {exc}", num, key) from None
            lines[target] = num
    cfg = RunConfig(**values)
    _check(cfg, lines)
    return cfg


def _num(x) -> str:
    return repr(float(x))


def format_config(cfg: RunConfig) -> str:
    """Print every field so the text parses back to an equal config."""
    f = cfg.f if not isinstance(cfg.f, tuple) else "nodal(" + ", ".join(map(_num, cfg.f)) + ")"
    out = {
        "norm": cfg.norm,
        "p": _num(cfg.p),
        "f": f if isinstance(f, str) else _num(f),
        "m": str(cfg.m),
        "cross": " x ".join(f"({_num(a)}, {_num(b)})" for a, b in cfg.cross),
        "h_axis": _num(cfg.h_axis),
        "h_cross": _num(cfg.h_cross),
        "length": _num(cfg.length),
        "tol_grad": _num(cfg.tol_grad),
        "tol_energy": _num(cfg.tol_energy),
        "max_iters": str(cfg.max_iters),
        "eps_schedule": "auto" if cfg.eps_schedule is None
        else ", ".join(map(_num, cfg.eps_schedule)),
        "seed": str(cfg.seed),
        "kind": cfg.kind,
        "ell_list": ", ".join(map(_num, cfg.ell_list)),
        "seeds": ", ".join(map(str, cfg.seeds)),
        "workers": str(cfg.workers),
    }
    chunks = []
    for section in SECTIONS:
        chunks.append(f"[{section}]")
        chunks.extend(f"{k} = {v}" for k, v in out.items() if _SECTION_OF[k] == section)
        chunks.append("")
    return "\n".join(chunks)


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    cfg = replace(cfg, **changes)
    _check(cfg, {})
    return cfg


FIELD_NAMES = tuple(fl.name for fl in fields(RunConfig))
