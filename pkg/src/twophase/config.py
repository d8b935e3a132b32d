"""Scenario files: an INI dialect with unit-suffixed values.

A value is one or more numbers, separated by commas or blanks, optionally
followed by a single unit word that applies to all of them::

    [grid]
    lx = 762 m
    [rock]
    perm_mean = 10 D
    [bc.inlet]
    lo = 0, 0, 13.7 m
    rate = 5 m3/day

When the unit is omitted the documented default for the quantity is used
(see ``UNITS``; the first entry of each kind is its default).  Loading
converts everything to SI; :func:`dump_scenario` writes SI values with
explicit units so that a dump reloads to an identical :class:`Scenario`.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .discretize import POINT, VARIABLE, Dirichlet, NeumannTotalFlux, NoFlow, SourceTerm, State, TwoPhaseProblem
from .grid import build_grid
from .precond import AmgParams, PreconditionerSpec, canonical_method
from .rockfluid import (
    CENTIPOISE,
    DAY,
    DEFAULT_EPSILON_S,
    MILLIDARCY,
    BrooksCoreyCapillary,
    CoreyRelPerm,
    FluidProps,
    LinearCapillary,
    QuadraticRelPerm,
    RockProps,
    ZeroCapillary,
)
from .sim import NewtonParams
from .spe10 import SPE10_DIMS, load_spe10_slab, lognormal_field

OUTPUT_DIR_ENV = "TWOPHASE_OUTPUT_DIR"

# kind -> {unit: factor to SI}; the first unit listed is the default
UNITS = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "km": 1e3, "ft": 0.3048},
    "permeability": {"mD": MILLIDARCY, "D": 1e3 * MILLIDARCY, "m2": 1.0},
    "pressure": {"Pa": 1.0, "kPa": 1e3, "MPa": 1e6, "bar": 1e5, "psi": 6894.757293168361},
    "viscosity": {"cP": CENTIPOISE, "mPa.s": 1e-3, "Pa.s": 1.0},
    "density": {"kg/m3": 1.0, "g/cm3": 1e3},
    "time": {"day": DAY, "days": DAY, "d": DAY, "h": 3600.0, "min": 60.0, "s": 1.0},
    "rate": {"m3/day": 1.0 / DAY, "m3/h": 1.0 / 3600.0, "m3/s": 1.0},
    "acceleration": {"m/s2": 1.0},
    "dimensionless": {"1": 1.0, "-": 1.0},
}
SI_UNIT = {
    "length": "m", "permeability": "m2", "pressure": "Pa", "viscosity": "Pa.s",
    "density": "kg/m3", "time": "s", "rate": "m3/s", "acceleration": "m/s2", "dimensionless": "",
}

CAPILLARY_MODELS = ("linear", "brooks_corey", "none")
RELPERM_MODELS = ("quadratic", "corey")
PERM_KINDS = ("uniform", "lognormal", "spe10")
BC_TYPES = ("neumann", "dirichlet", "noflow")


class ScenarioError(ValueError):
    """Parse or validation failure, located by file, line and field where possible."""


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    nz: int
    lx: float
    ly: float
    lz: float
    gravity_axis: str | None = None


@dataclass(frozen=True)
class RockSpec:
    porosity: float = 0.2
    s_wr: float = 0.0
    s_nr: float = 0.0
    permeability: str = "uniform"
    perm: float = 100 * MILLIDARCY
    perm_sigma: float = 1.0
    perm_correlation: float = 1.5
    perm_seed: int = 0
    kz_ratio: float = 1.0


@dataclass(frozen=True)
class Spe10Spec:
    perm_file: str
    poro_file: str
    origin: tuple = (0, 0, 0)
    dims: tuple = SPE10_DIMS
    min_porosity: float = 1e-3


@dataclass(frozen=True)
class BoundarySpec:
    name: str
    side: str
    type: str
    lo: tuple | None = None
    hi: tuple | None = None
    rate: float = 0.0
    s_w: float = 1.0
    p_w: float = 0.0

    def condition(self):
        if self.type == "neumann":
            return NeumannTotalFlux(self.rate, self.s_w)
        if self.type == "dirichlet":
            return Dirichlet(self.p_w, self.s_w)
        return NoFlow()


@dataclass(frozen=True)
class SourceSpec:
    """Volumetric rates (m^3/s, positive = injection) shared equally by ``cells``."""

    name: str
    cells: tuple
    rate_w: float = 0.0
    rate_n: float = 0.0


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "output"
    snapshots: bool = False


@dataclass(frozen=True)
class Scenario:
    name: str
    grid: GridSpec
    fluid: FluidProps
    rock: RockSpec
    capillary: object
    relperm: object
    initial_p_w: float
    initial_s_n: float
    dt: float
    t_final: float
    bcs: tuple = ()
    sources: tuple = ()
    allow_cut: bool = True
    newton: NewtonParams = field(default_factory=NewtonParams)
    precond: PreconditionerSpec = field(default_factory=PreconditionerSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    spe10: Spe10Spec | None = None
    description: str = ""
    path: str | None = field(default=None, compare=False)

    @property
    def num_cells(self):
        g = self.grid
        return g.nx * g.ny * g.nz

    def output_dir(self):
        """Output directory, overridden by ``$TWOPHASE_OUTPUT_DIR`` when set."""
        env = os.environ.get(OUTPUT_DIR_ENV)
        if env:
            return Path(env)
        out = Path(self.output.directory)
        if not out.is_absolute() and self.path is not None:
            out = Path(self.path).parent / out
        return out


# ---------------------------------------------------------------- parsing

def _line_index(text):
    index, section = {}, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if raw[:1].isspace():
            continue
        for sep in ("=", ":"):
            if sep in line:
                index[(section, line.split(sep, 1)[0].strip().lower())] = lineno
                break
    return index


class _Reader:
    """Typed access to one config file with located error messages."""

    def __init__(self, text, source="<string>"):
        self.source = source
        self.cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            self.cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ScenarioError(f"{source}: {exc}") from None
        self.lines = _line_index(text)
        self.used = set()

    def where(self, section, key=None):
        line = self.lines.get((section, key)) if key else None
        loc = f"{self.source}:{line}" if line else self.source
        return f"{loc}: [{section}]" + (f" {key}" if key else "")

    def fail(self, section, key, msg):
        raise ScenarioError(f"{self.where(section, key)}: {msg}")

    def has(self, section, key=None):
        if not self.cp.has_section(section):
            return False
        return key is None or self.cp.has_option(section, key)

    def raw(self, section, key, default=None, required=False):
        self.used.add((section, key))
        if self.has(section, key):
            return self.cp.get(section, key).strip()
        if required:
            self.fail(section, key, "missing required field")
        return default

    def text(self, section, key, default=None, choices=None, required=False):
        value = self.raw(section, key, default, required)
        if value is not None and choices is not None:
            value = value.lower()
            if value not in choices:
                self.fail(section, key, f"{value!r} is not one of {', '.join(choices)}")
        return value

    def boolean(self, section, key, default):
        value = self.raw(section, key)
        if value is None:
            return default
        lowered = value.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        self.fail(section, key, f"expected a boolean, got {value!r}")

    def integer(self, section, key, default=None, required=False, minimum=None):
        value = self.raw(section, key, None, required)
        if value is None:
            return default
        try:
            number = float(value)
        except ValueError:
            self.fail(section, key, f"expected an integer, got {value!r}")
        if number != int(number):
            self.fail(section, key, f"expected an integer, got {value!r}")
        number = int(number)
        if minimum is not None and number < minimum:
            self.fail(section, key, f"must be >= {minimum}, got {number}")
        return number

    def quantities(self, section, key, kind, count=None):
        value = self.raw(section, key)
        if value is None:
            return None
        tokens = value.replace(",", " ").split()
        unit = None
        if tokens:
            try:
                float(tokens[-1])
            except ValueError:
                unit = tokens.pop()
        table = UNITS[kind]
        if unit is None:
            factor = next(iter(table.values()))
        elif unit in table:
            factor = table[unit]
        else:
            self.fail(section, key, f"unit {unit!r} is not a {kind} unit ({', '.join(table)})")
        try:
            numbers = [float(t) for t in tokens]
        except ValueError:
            self.fail(section, key, f"cannot parse {value!r} as numbers")
        if not numbers or (count is not None and len(numbers) != count):
            want = f"{count} value(s)" if count else "at least one value"
            self.fail(section, key, f"expected {want}, got {value!r}")
        if not all(math.isfinite(v) for v in numbers):
            self.fail(section, key, "values must be finite")
        return tuple(v * factor for v in numbers)

    def quantity(self, section, key, kind, default=None, required=False, positive=False,
                 nonnegative=False, unit_interval=False):
        if not self.has(section, key):
            if required:
                self.fail(section, key, "missing required field")
            return default
        value = self.quantities(section, key, kind, count=1)[0]
        if positive and not value > 0:
            self.fail(section, key, f"must be positive, got {value}")
        if nonnegative and value < 0:
            self.fail(section, key, f"must be non-negative, got {value}")
        if unit_interval and not 0 <= value <= 1:
            self.fail(section, key, f"must lie in [0, 1], got {value}")
        return value

    def check_unused(self, known_sections):
        for section in self.cp.sections():
            head = section.split(".", 1)[0]
            if section not in known_sections and head not in ("bc", "source"):
                self.fail(section, None, "unknown section")
            for key in self.cp.options(section):
                if (section, key) not in self.used:
                    self.fail(section, key, "unknown field")


_SECTIONS = ("scenario", "grid", "fluid", "rock", "spe10", "capillary", "relperm", "initial",
             "time", "solver", "precond", "output")


def _guard(reader, section, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ScenarioError:
        raise
    except (ValueError, TypeError) as exc:
        reader.fail(section, None, str(exc))


def _parse_grid(r):
    s = "grid"
    if not r.has(s):
        r.fail(s, None, "missing section")
    dims = [r.integer(s, k, required=True, minimum=1) for k in ("nx", "ny", "nz")]
    lengths = [r.quantity(s, k, "length", required=True, positive=True) for k in ("lx", "ly", "lz")]
    axis = r.text(s, "gravity_axis", "none", choices=("x", "y", "z", "none"))
    return GridSpec(*dims, *lengths, gravity_axis=None if axis == "none" else axis)


def _parse_fluid(r):
    s = "fluid"
    d = FluidProps()
    kw = dict(
        rho_w=r.quantity(s, "rho_w", "density", d.rho_w, positive=True),
        rho_n=r.quantity(s, "rho_n", "density", d.rho_n, positive=True),
        mu_w=r.quantity(s, "mu_w", "viscosity", d.mu_w, positive=True),
        mu_n=r.quantity(s, "mu_n", "viscosity", d.mu_n, positive=True),
        g=r.quantity(s, "g", "acceleration", d.g, nonnegative=True),
    )
    return _guard(r, s, FluidProps, **kw)


def _parse_rock(r):
    s = "rock"
    d = RockSpec()
    kind = r.text(s, "permeability", d.permeability, choices=PERM_KINDS)
    perm_key = "perm_mean" if kind == "lognormal" else "perm"
    spec = RockSpec(
        porosity=r.quantity(s, "porosity", "dimensionless", d.porosity),
        s_wr=r.quantity(s, "s_wr", "dimensionless", d.s_wr, unit_interval=True),
        s_nr=r.quantity(s, "s_nr", "dimensionless", d.s_nr, unit_interval=True),
        permeability=kind,
        perm=r.quantity(s, perm_key, "permeability", d.perm, positive=True),
        perm_sigma=r.quantity(s, "perm_sigma", "dimensionless", d.perm_sigma, nonnegative=True),
        perm_correlation=r.quantity(s, "perm_correlation", "dimensionless", d.perm_correlation, nonnegative=True),
        perm_seed=r.integer(s, "perm_seed", d.perm_seed, minimum=0),
        kz_ratio=r.quantity(s, "kz_ratio", "dimensionless", d.kz_ratio, nonnegative=True),
    )
    if not 0 < spec.porosity <= 1:
        r.fail(s, "porosity", f"must lie in (0, 1], got {spec.porosity}")
    if spec.s_wr + spec.s_nr >= 1:
        r.fail(s, "s_nr", "residual saturations must sum to less than 1")
    return spec


def _resolve(path_text, base):
    p = Path(os.path.expanduser(path_text))
    if not p.is_absolute() and base is not None:
        p = base / p
    return str(p.resolve())


def _parse_spe10(r, grid, base):
    s = "spe10"
    spec = Spe10Spec(
        perm_file=_resolve(r.text(s, "perm_file", required=True), base),
        poro_file=_resolve(r.text(s, "poro_file", required=True), base),
        origin=tuple(int(v) for v in (r.quantities(s, "origin", "dimensionless", 3) or (0, 0, 0))),
        dims=tuple(int(v) for v in (r.quantities(s, "dims", "dimensionless", 3) or SPE10_DIMS)),
        min_porosity=r.quantity(s, "min_porosity", "dimensionless", 1e-3, positive=True),
    )
    for key, path in (("perm_file", spec.perm_file), ("poro_file", spec.poro_file)):
        if not Path(path).is_file():
            r.fail(s, key, f"file not found: {path}")
    extent = (grid.nx, grid.ny, grid.nz)
    for o, e, d, ax in zip(spec.origin, extent, spec.dims, "xyz"):
        if o < 0 or o + e > d:
            r.fail(s, "origin", f"grid slab along {ax} ({o}..{o + e - 1}) exceeds the file extent {d}")
    return spec


def _parse_capillary(r):
    s = "capillary"
    model = r.text(s, "model", "linear", choices=CAPILLARY_MODELS)
    eps = r.quantity(s, "epsilon_s", "dimensionless", DEFAULT_EPSILON_S)
    if model == "linear":
        return _guard(r, s, LinearCapillary, r.quantity(s, "p0", "pressure", 1e5), eps)
    if model == "brooks_corey":
        pd = r.quantity(s, "pd", "pressure", required=True)
        lam = r.quantity(s, "lambda", "dimensionless", required=True)
        return _guard(r, s, BrooksCoreyCapillary, pd, lam, eps)
    return _guard(r, s, ZeroCapillary, eps)


def _parse_relperm(r):
    s = "relperm"
    model = r.text(s, "model", "quadratic", choices=RELPERM_MODELS)
    eps = r.quantity(s, "epsilon_s", "dimensionless", DEFAULT_EPSILON_S)
    if model == "corey":
        return _guard(r, s, CoreyRelPerm, r.quantity(s, "lambda", "dimensionless", required=True), eps)
    return QuadraticRelPerm(eps)


def _parse_bc(r, section):
    name = section.split(".", 1)[1].strip()
    if not name:
        r.fail(section, None, "boundary sections are named [bc.NAME]")
    side = r.text(section, "side", required=True)
    if len(side) != 4 or side[0] not in "xyz" or side[1:] not in ("min", "max"):
        r.fail(section, "side", f"expected e.g. xmin or zmax, got {side!r}")
    kind = r.text(section, "type", required=True, choices=BC_TYPES)
    spec = BoundarySpec(
        name=name, side=side, type=kind,
        lo=r.quantities(section, "lo", "length", 3),
        hi=r.quantities(section, "hi", "length", 3),
        rate=r.quantity(section, "rate", "rate", 0.0, required=kind == "neumann"),
        s_w=r.quantity(section, "s_w", "dimensionless", 1.0, unit_interval=True),
        p_w=r.quantity(section, "p_w", "pressure", 0.0, required=kind == "dirichlet"),
    )
    return spec


def _parse_source(r, section, grid):
    name = section.split(".", 1)[1].strip()
    text = r.text(section, "cells", required=True)
    cells = []
    for chunk in text.split(";"):
        parts = chunk.replace(",", " ").split()
        if len(parts) != 3:
            r.fail(section, "cells", f"expected 'i j k; i j k; ...', got {text!r}")
        try:
            ijk = tuple(int(p) for p in parts)
        except ValueError:
            r.fail(section, "cells", f"non-integer cell index in {chunk!r}")
        for v, n, ax in zip(ijk, (grid.nx, grid.ny, grid.nz), "ijk"):
            if not 0 <= v < n:
                r.fail(section, "cells", f"{ax}={v} is outside 0..{n - 1}")
        cells.append(ijk)
    return SourceSpec(
        name=name, cells=tuple(cells),
        rate_w=r.quantity(section, "rate_w", "rate", 0.0),
        rate_n=r.quantity(section, "rate_n", "rate", 0.0),
    )


def _parse_newton(r):
    s = "solver"
    d = NewtonParams()
    kw = dict(
        abs_tol=r.quantity(s, "abs_tol", "dimensionless", d.abs_tol, positive=True),
        max_newton=r.integer(s, "max_newton", d.max_newton, minimum=1),
        linear_rel_tol=r.quantity(s, "linear_rel_tol", "dimensionless", d.linear_rel_tol, positive=True),
        linear_max_iters=r.integer(s, "linear_max_iters", d.linear_max_iters, minimum=1),
        restart=r.integer(s, "restart", d.restart, minimum=1),
        line_search=r.boolean(s, "line_search", d.line_search),
        scaled_norm=r.boolean(s, "scaled_norm", d.scaled_norm),
        ordering=r.text(s, "ordering", d.ordering, choices=(POINT, VARIABLE)),
    )
    return _guard(r, s, NewtonParams, **kw)


def _parse_amg(r, s, prefix, default):
    key = lambda name: f"{prefix}{name}"  # noqa: E731
    kw = dict(
        theta=r.quantity(s, key("theta"), "dimensionless", default.theta, unit_interval=True),
        max_levels=r.integer(s, key("max_levels"), default.max_levels, minimum=1),
        coarse_size=r.integer(s, key("coarse_size"), default.coarse_size, minimum=1),
        strength=r.text(s, key("strength"), default.strength, choices=("abs", "classical")),
        second_pass=r.boolean(s, key("second_pass"), default.second_pass),
        cycles=r.integer(s, key("cycles"), default.cycles, minimum=1),
    )
    return _guard(r, s, AmgParams, **kw)


def _parse_precond(r):
    s = "precond"
    d = PreconditionerSpec()
    method = r.text(s, "method", d.variant)
    try:
        method = canonical_method(method)
    except ValueError as exc:
        r.fail(s, "method", str(exc))
    kw = dict(
        variant=method,
        amg=_parse_amg(r, s, "", d.amg),
        coupled_amg=_parse_amg(r, s, "coupled_", d.coupled_amg),
        ilu_ordering=r.text(s, "ilu_ordering", d.ilu_ordering, choices=(POINT, VARIABLE)),
        schur_as_printed=r.boolean(s, "schur_as_printed", d.schur_as_printed),
        exact_inner=r.boolean(s, "exact_inner", d.exact_inner),
        pressure_scale=r.quantity(s, "pressure_scale", "pressure", d.pressure_scale, positive=True),
    )
    return _guard(r, s, PreconditionerSpec, **kw)


def parse_scenario(text, source="<string>", base_dir=None):
    """Parse scenario text; relative file paths resolve against ``base_dir``."""
    r = _Reader(text, source)
    base = Path(base_dir) if base_dir is not None else None
    name = r.text("scenario", "name", Path(source).stem if source != "<string>" else "scenario")
    description = r.text("scenario", "description", "")
    grid = _parse_grid(r)
    fluid = _parse_fluid(r)
    rock = _parse_rock(r)
    spe10 = None
    if rock.permeability == "spe10":
        if not r.has("spe10"):
            r.fail("rock", "permeability", "spe10 permeability needs an [spe10] section")
        spe10 = _parse_spe10(r, grid, base)
    capillary = _parse_capillary(r)
    relperm = _parse_relperm(r)
    p0 = r.quantity("initial", "p_w", "pressure", required=True)
    sn0 = r.quantity("initial", "s_n", "dimensionless", required=True, unit_interval=True)
    bcs, sources = [], []
    for section in r.cp.sections():
        if section.startswith("bc."):
            bcs.append(_parse_bc(r, section))
        elif section.startswith("source."):
            sources.append(_parse_source(r, section, grid))
    dt = r.quantity("time", "dt", "time", required=True, positive=True)
    t_final = r.quantity("time", "t_final", "time", required=True, positive=True)
    allow_cut = r.boolean("time", "allow_cut", True)
    newton = _parse_newton(r)
    precond = _parse_precond(r)
    output = OutputSpec(
        directory=r.text("output", "directory", OutputSpec.directory),
        snapshots=r.boolean("output", "snapshots", OutputSpec.snapshots),
    )
    r.check_unused(_SECTIONS)
    scenario = Scenario(
        name=name, description=description, grid=grid, fluid=fluid, rock=rock, spe10=spe10,
        capillary=capillary, relperm=relperm, initial_p_w=p0, initial_s_n=sn0,
        bcs=tuple(bcs), sources=tuple(sources), dt=dt, t_final=t_final, allow_cut=allow_cut,
        newton=newton, precond=precond, output=output, path=None,
    )
    _check_boundaries(scenario, r)
    return scenario


def _check_boundaries(scenario, r):
    grid = _bare_grid(scenario)
    for bc in scenario.bcs:
        try:
            grid = grid.tag_boundary(bc.name, bc.side, bc.lo, bc.hi)
        except ValueError as exc:
            r.fail(f"bc.{bc.name}", None, str(exc))
    # a later region may have swallowed an earlier one entirely
    for bc in scenario.bcs:
        if len(grid.boundary_faces(bc.name)) == 0:
            r.fail(f"bc.{bc.name}", None, "region is completely overwritten by a later boundary section")


def load_scenario(path):
    """Read and validate a scenario file; all quantities come back in SI."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror or exc}") from None
    scenario = parse_scenario(text, str(path), path.parent)
    return replace(scenario, path=str(path.resolve()))


# ---------------------------------------------------------------- dumping

def _fmt(value, kind):
    unit = SI_UNIT[kind]
    text = repr(float(value))
    return f"{text} {unit}" if unit else text


def _fmt_many(values, kind):
    unit = SI_UNIT[kind]
    text = ", ".join(repr(float(v)) for v in values)
    return f"{text} {unit}" if unit else text


def _amg_lines(params, prefix):
    return {
        f"{prefix}theta": repr(params.theta),
        f"{prefix}max_levels": str(params.max_levels),
        f"{prefix}coarse_size": str(params.coarse_size),
        f"{prefix}strength": params.strength,
        f"{prefix}second_pass": str(params.second_pass).lower(),
        f"{prefix}cycles": str(params.cycles),
    }


def scenario_sections(sc: Scenario):
    """Ordered ``{section: {key: text}}`` mapping, SI values with units."""
    out = {}
    out["scenario"] = {"name": sc.name}
    if sc.description:
        out["scenario"]["description"] = sc.description
    g = sc.grid
    out["grid"] = {
        "nx": str(g.nx), "ny": str(g.ny), "nz": str(g.nz),
        "lx": _fmt(g.lx, "length"), "ly": _fmt(g.ly, "length"), "lz": _fmt(g.lz, "length"),
        "gravity_axis": g.gravity_axis or "none",
    }
    f = sc.fluid
    out["fluid"] = {
        "rho_w": _fmt(f.rho_w, "density"), "rho_n": _fmt(f.rho_n, "density"),
        "mu_w": _fmt(f.mu_w, "viscosity"), "mu_n": _fmt(f.mu_n, "viscosity"),
        "g": _fmt(f.g, "acceleration"),
    }
    rk = sc.rock
    rock = {
        "porosity": repr(rk.porosity), "s_wr": repr(rk.s_wr), "s_nr": repr(rk.s_nr),
        "permeability": rk.permeability,
        ("perm_mean" if rk.permeability == "lognormal" else "perm"): _fmt(rk.perm, "permeability"),
        "perm_sigma": repr(rk.perm_sigma), "perm_correlation": repr(rk.perm_correlation),
        "perm_seed": str(rk.perm_seed), "kz_ratio": repr(rk.kz_ratio),
    }
    out["rock"] = rock
    if sc.spe10 is not None:
        s10 = sc.spe10
        out["spe10"] = {
            "perm_file": s10.perm_file, "poro_file": s10.poro_file,
            "origin": ", ".join(str(v) for v in s10.origin),
            "dims": ", ".join(str(v) for v in s10.dims),
            "min_porosity": repr(s10.min_porosity),
        }
    cap = sc.capillary
    if isinstance(cap, LinearCapillary):
        out["capillary"] = {"model": "linear", "p0": _fmt(cap.p0, "pressure")}
    elif isinstance(cap, BrooksCoreyCapillary):
        out["capillary"] = {"model": "brooks_corey", "pd": _fmt(cap.pd, "pressure"), "lambda": repr(cap.lam)}
    else:
        out["capillary"] = {"model": "none"}
    out["capillary"]["epsilon_s"] = repr(cap.epsilon_s)
    rp = sc.relperm
    if isinstance(rp, CoreyRelPerm):
        out["relperm"] = {"model": "corey", "lambda": repr(rp.lam)}
    else:
        out["relperm"] = {"model": "quadratic"}
    out["relperm"]["epsilon_s"] = repr(rp.epsilon_s)
    out["initial"] = {"p_w": _fmt(sc.initial_p_w, "pressure"), "s_n": repr(sc.initial_s_n)}
    for bc in sc.bcs:
        sec = {"side": bc.side, "type": bc.type}
        if bc.lo is not None:
            sec["lo"] = _fmt_many(bc.lo, "length")
        if bc.hi is not None:
            sec["hi"] = _fmt_many(bc.hi, "length")
        sec["rate"] = _fmt(bc.rate, "rate")
        sec["s_w"] = repr(bc.s_w)
        sec["p_w"] = _fmt(bc.p_w, "pressure")
        out[f"bc.{bc.name}"] = sec
    for src in sc.sources:
        out[f"source.{src.name}"] = {
            "cells": "; ".join(" ".join(str(v) for v in c) for c in src.cells),
            "rate_w": _fmt(src.rate_w, "rate"), "rate_n": _fmt(src.rate_n, "rate"),
        }
    out["time"] = {
        "dt": _fmt(sc.dt, "time"), "t_final": _fmt(sc.t_final, "time"),
        "allow_cut": str(sc.allow_cut).lower(),
    }
    n = sc.newton
    out["solver"] = {
        "abs_tol": repr(n.abs_tol), "max_newton": str(n.max_newton),
        "linear_rel_tol": repr(n.linear_rel_tol), "linear_max_iters": str(n.linear_max_iters),
        "restart": str(n.restart), "line_search": str(n.line_search).lower(),
        "scaled_norm": str(n.scaled_norm).lower(), "ordering": n.ordering,
    }
    p = sc.precond
    out["precond"] = {
        "method": p.variant, **_amg_lines(p.amg, ""), **_amg_lines(p.coupled_amg, "coupled_"),
        "ilu_ordering": p.ilu_ordering, "schur_as_printed": str(p.schur_as_printed).lower(),
        "exact_inner": str(p.exact_inner).lower(), "pressure_scale": _fmt(p.pressure_scale, "pressure"),
    }
    out["output"] = {"directory": sc.output.directory, "snapshots": str(sc.output.snapshots).lower()}
    return out


def dump_scenario(scenario: Scenario) -> str:
    lines = []
    for section, items in scenario_sections(scenario).items():
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {value}" for key, value in items.items())
        lines.append("")
    return "\n".join(lines)


def save_scenario(scenario: Scenario, path):
    Path(path).write_text(dump_scenario(scenario))


# ---------------------------------------------------------------- building

def _bare_grid(sc):
    g = sc.grid
    return build_grid(g.nx, g.ny, g.nz, g.lx, g.ly, g.lz, g.gravity_axis)


def build_rock(sc: Scenario) -> RockProps:
    rk, g = sc.rock, sc.grid
    n = sc.num_cells
    if rk.permeability == "spe10":
        s10 = sc.spe10
        loaded = load_spe10_slab(s10.perm_file, s10.poro_file, s10.origin, (g.nx, g.ny, g.nz),
                                 s10.dims, s10.min_porosity)
        return RockProps(loaded.porosity, loaded.perm, rk.s_wr, rk.s_nr)
    if rk.permeability == "lognormal":
        k = lognormal_field((g.nx, g.ny, g.nz), rk.perm, rk.perm_sigma, rk.perm_correlation, rk.perm_seed)
    else:
        k = np.full(n, rk.perm)
    perm = np.column_stack([k, k, rk.kz_ratio * k])
    return RockProps(np.full(n, rk.porosity), perm, rk.s_wr, rk.s_nr)


def build_problem(sc: Scenario) -> TwoPhaseProblem:
    """Grid, rock, boundary tags and sources for a scenario."""
    grid = _bare_grid(sc)
    bcs = {}
    for bc in sc.bcs:
        grid = grid.tag_boundary(bc.name, bc.side, bc.lo, bc.hi)
        bcs[bc.name] = bc.condition()
    sources = None
    if sc.sources:
        q_w = np.zeros(grid.num_cells)
        q_n = np.zeros(grid.num_cells)
        for src in sc.sources:
            cells = [grid.cell_index(*c) for c in src.cells]
            share = 1.0 / len(cells)
            term = SourceTerm.from_rates(grid, sc.fluid, cells, src.rate_w * share, src.rate_n * share)
            q_w += term.q_w
            q_n += term.q_n
        sources = SourceTerm(q_w, q_n)
    return TwoPhaseProblem(grid, build_rock(sc), sc.fluid, sc.capillary, sc.relperm, bcs, sources)


def initial_state(sc: Scenario) -> State:
    return State.uniform(sc.num_cells, sc.initial_p_w, sc.initial_s_n)
