"""Experiment configuration: flat INI-style text, no code execution.

A config describes one kernel (a list of component sections), a
validation grid, simulation settings and the analyses to run::

    [kernel]
    dimension = 1
    components = small, big

    [component.small]
    family = stable_like_small
    c = 1.0
    alpha = 1 + 0.5/(1 + |x|^2)
    alpha_bounds = 1.0, 1.5

    [sim]
    t_end = 1.0
    epsilon = 0.1
    base_seed = 12345
    n_paths = 10000
    x0 = 0.0

Seeds are always explicit; there are no wall-clock defaults.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import coeffs, exprlang
from .errors import ConfigError, ExprSyntaxError, UnknownIdentifier
from .kernels import (
    BigJumpPowerLaw,
    BigJumpStretchedExp,
    CompoundPoissonAtoms,
    ConeRestriction,
    EnvelopePair,
    HuntDifference,
    KernelSpec,
)
from .simulator import DROP, GAUSSIAN, SimConfig
from .validators import StateGrid, default_grid

__all__ = ["ExperimentConfig", "load_config", "config_hash"]


# picklable named predicates for cone restrictions
class FirstCoordinatePositive:
    symmetric = False

    def __call__(self, z):
        return z[0] > 0


class FirstAxisCone:
    """|z_1| dominates the other coordinates; symmetric under z -> -z."""

    symmetric = True

    def __call__(self, z):
        z = np.atleast_1d(z)
        return bool(np.abs(z[0]) >= np.max(np.abs(z)))


PREDICATES = {
    "first_positive": FirstCoordinatePositive,
    "first_axis": FirstAxisCone,
}


@dataclass
class AnalysisSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    kernel: KernelSpec
    grid: StateGrid
    sim: SimConfig
    n_paths: int
    x0: tuple
    analyses: list
    envelopes: EnvelopePair = None
    write_paths: bool = True
    source_text: str = ""

    @property
    def hash(self):
        return config_hash(self.source_text)


def config_hash(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _fail(section, msg):
    raise ConfigError(f"[{section}] {msg}")


def _coeff(parser, section, key, d, grid_points, required=True, default=None):
    if not parser.has_option(section, key):
        if required:
            _fail(section, f"missing coefficient {key!r}")
        return default
    raw = parser.get(section, key).strip().strip('"')
    try:
        expr = exprlang.parse(raw)
    except (ExprSyntaxError, UnknownIdentifier) as exc:
        _fail(section, f"{key} = {raw!r}: {exc}")
    if expr.max_coord() >= d:
        _fail(section, f"{key} references x[{expr.max_coord() + 1}] "
                       f"but d={d}")
    bkey = f"{key}_bounds"
    if parser.has_option(section, bkey):
        lo, hi = _floats(parser.get(section, bkey), 2, section, bkey)
    else:
        # observed bounds over the grid, advisory
        vals = [exprlang.evaluate(expr, p) for p in grid_points]
        lo, hi = min(vals), max(vals)
    return coeffs.CoefficientFn(expr, lo, hi, raw)


def _floats(raw, n, section, key):
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if n is not None and len(parts) != n:
        _fail(section, f"{key} needs {n} comma-separated numbers")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        _fail(section, f"{key} = {raw!r} is not numeric")


def _component(parser, section, d, grid_points):
    family = parser.get(section, "family", fallback=None)
    if family is None:
        _fail(section, "missing family")
    family = family.strip()
    if family == "stable_like_small":
        return StableLikeSmallFactory(parser, section, d, grid_points)
    if family == "big_jump_power_law":
        return BigJumpPowerLaw(
            _coeff(parser, section, "c0", d, grid_points),
            _coeff(parser, section, "beta1", d, grid_points),
        )
    if family == "big_jump_stretched_exp":
        lam = parser.getfloat(section, "lambda", fallback=None)
        if lam is None:
            _fail(section, "missing lambda")
        return BigJumpStretchedExp(
            _coeff(parser, section, "c0", d, grid_points),
            lam,
            _coeff(parser, section, "beta2", d, grid_points),
        )
    if family == "compound_poisson_atoms":
        raw = parser.get(section, "atoms", fallback=None)
        if raw is None:
            _fail(section, "missing atoms")
        atoms = []
        for entry in raw.split(";"):
            entry = entry.strip()
            if not entry:
                continue
            w, _, zs = entry.partition(":")
            try:
                weight = float(w)
                z = tuple(float(c) for c in zs.split(","))
            except ValueError:
                _fail(section, f"bad atom entry {entry!r}")
            if len(z) != d:
                _fail(section, f"atom {entry!r} has wrong dimension")
            atoms.append((weight, z))
        return CompoundPoissonAtoms(tuple(atoms))
    if family == "cone_restriction":
        base_section = parser.get(section, "base", fallback=None)
        if base_section is None:
            _fail(section, "missing base section name")
        base = _component(parser, f"component.{base_section}", d, grid_points)
        pname = parser.get(section, "predicate", fallback=None)
        if pname not in PREDICATES:
            _fail(section, f"unknown predicate {pname!r}; "
                           f"choose from {sorted(PREDICATES)}")
        pred = PREDICATES[pname]()
        return ConeRestriction(
            base, pred,
            symmetric=pred.symmetric,
            permutation_symmetric=parser.getboolean(
                section, "permutation_symmetric", fallback=False
            ),
        )
    if family == "hunt_difference":
        return HuntDifference(
            _coeff(parser, section, "c", d, grid_points),
            _radial_coeff(parser, section, "alpha_r"),
        )
    _fail(section, f"unknown family {family!r}")


def _radial_coeff(parser, section, key):
    raw = parser.get(section, key, fallback=None)
    if raw is None:
        _fail(section, f"missing {key}")
    raw = raw.strip().strip('"')
    try:
        expr = exprlang.parse(raw)
    except (ExprSyntaxError, UnknownIdentifier) as exc:
        _fail(section, f"{key} = {raw!r}: {exc}")
    bkey = f"{key}_bounds"
    if parser.has_option(section, bkey):
        lo, hi = _floats(parser.get(section, bkey), 2, section, bkey)
    else:
        rs = np.geomspace(1e-4, 1e4, 201)
        vals = [exprlang.evaluate(expr, (r,)) for r in rs]
        lo, hi = min(vals), max(vals)
    return coeffs.CoefficientFn(expr, lo, hi, raw)


def StableLikeSmallFactory(parser, section, d, grid_points):
    from .kernels import StableLikeSmall

    return StableLikeSmall(
        _coeff(parser, section, "c", d, grid_points),
        _coeff(parser, section, "alpha", d, grid_points),
        bass_normalized=parser.getboolean(
            section, "bass_normalized", fallback=False
        ),
    )


def _kernel_from(parser, list_section, list_key, d, grid_points):
    raw = parser.get(list_section, list_key, fallback=None)
    if raw is None:
        return None
    names = [n.strip() for n in raw.split(",") if n.strip()]
    comps = []
    for name in names:
        section = f"component.{name}"
        if not parser.has_section(section):
            _fail(list_section, f"no section [{section}]")
        comps.append(_component(parser, section, d, grid_points))
    return KernelSpec(d, tuple(comps))


def load_config(path):
    """Parse and cross-validate an experiment config file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        parser.read_string(text, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    if not parser.has_section("kernel"):
        raise ConfigError("missing [kernel] section")
    d = parser.getint("kernel", "dimension", fallback=0)
    if d not in (1, 2, 3):
        _fail("kernel", f"dimension must be 1, 2 or 3, got {d}")

    extent = parser.getfloat("grid", "extent", fallback=None) \
        if parser.has_section("grid") else None
    npts = parser.getint("grid", "points", fallback=None) \
        if parser.has_section("grid") else None
    grid = default_grid(d, extent, npts)

    kernel = _kernel_from(parser, "kernel", "components", d, grid.points)
    if kernel is None:
        _fail("kernel", "missing components list")

    envelopes = None
    if parser.has_section("envelope"):
        nu1 = _kernel_from(parser, "envelope", "nu1_components", d,
                           grid.points)
        nu2 = _kernel_from(parser, "envelope", "nu2_components", d,
                           grid.points)
        if nu2 is None:
            _fail("envelope", "missing nu2_components")
        envelopes = EnvelopePair(nu1, nu2)

    if not parser.has_section("sim"):
        raise ConfigError("missing [sim] section")
    if not parser.has_option("sim", "base_seed"):
        _fail("sim", "base_seed must be explicit")
    n_paths = parser.getint("sim", "n_paths", fallback=0)
    if n_paths <= 0:
        _fail("sim", f"n_paths must be positive, got {n_paths}")
    x0 = _floats(parser.get("sim", "x0", fallback="0"), None, "sim", "x0")
    if len(x0) != d:
        _fail("sim", f"x0 has {len(x0)} coordinates, d={d}")
    mode = parser.get("sim", "small_jump_mode", fallback=DROP).strip()
    if mode not in (DROP, GAUSSIAN):
        _fail("sim", f"unknown small_jump_mode {mode!r}")
    try:
        sim = SimConfig(
            t_end=parser.getfloat("sim", "t_end"),
            epsilon=parser.getfloat("sim", "epsilon"),
            base_seed=parser.getint("sim", "base_seed"),
            dominating_rate_margin=parser.getfloat(
                "sim", "margin", fallback=1.5
            ),
            max_jumps=parser.getint("sim", "max_jumps", fallback=10_000_000),
            small_jump_mode=mode,
        )
    except (ValueError, configparser.Error) as exc:
        raise ConfigError(f"[sim] {exc}") from exc

    analyses = []
    for section in parser.sections():
        if not section.startswith("analysis."):
            continue
        name = section.split(".", 1)[1]
        if name not in ("martingale", "moment_identity", "qv", "generator",
                        "lil"):
            _fail(section, f"unknown analysis {name!r}")
        params = dict(parser.items(section))
        analyses.append(AnalysisSpec(name, params))

    write_paths = parser.getboolean("output", "write_paths", fallback=True) \
        if parser.has_section("output") else True

    return ExperimentConfig(
        kernel=kernel,
        grid=grid,
        sim=sim,
        n_paths=n_paths,
        x0=x0,
        analyses=analyses,
        envelopes=envelopes,
        write_paths=write_paths,
        source_text=text,
    )
