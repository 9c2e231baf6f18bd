"""Experiment configuration: flat ``key = value`` text with dotted sections.

Example::

    preset = vortex
    family = both
    prior.helmholtz.ell_phi = 1.0
    optim.max_iters = 500
    out = runs/vortex

Lines starting with ``#`` are comments.  A ``preset`` supplies defaults and
every other key overrides them.  The data source is either ``sim.*``
(analytic field plus ``buoys.<group>.*``) or ``ingest.*`` (a drifter file),
never both.
"""
from dataclasses import dataclass, field
from importlib import resources
import math
import re

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, SchemaError
from .fields import AnalyticField, BuoyConfig, FieldKind, SimGrid
from .hyperopt import FitConfig
from .ingest import DrifterSchema, IngestFilter, parse_time
from .kernels import PARAM_NAMES, Family, PriorSpec

# initial hyperparameters shared by every simulated experiment; the stored
# scalars are variances, so the standard deviation 0.369 enters squared
INIT_VALUES = (1.0, 1.0, 2.7, 0.369 ** 2, 0.135)

_SECTIONS = ("prior", "sim", "buoys", "ingest", "grid", "optim")
_TOP = ("preset", "name", "family", "seed", "out", "pinned")


def parse_text(text, source="<config>"):
    """Parse ``key = value`` lines into a dict; later keys win."""
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{n}: expected 'key = value', got {raw!r}")
        if not re.fullmatch(r"[A-Za-z0-9_]+(\.[A-Za-z0-9_]+)*", key):
            raise ConfigError(f"{source}:{n}: invalid key {key!r}")
        out[key] = value.split(" #", 1)[0].strip()
    return out


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_text(text, str(path))


# -- value parsers ------------------------------------------------------------

def _float(m, key, default=None):
    if key not in m:
        if default is None:
            raise ConfigError(f"missing required key {key}")
        return float(default)
    try:
        v = float(m[key])
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {m[key]!r}") from None
    if not math.isfinite(v) and not (key == "optim.tol" and v > 0):
        raise ConfigError(f"{key}: value must be finite")
    return v


def _int(m, key, default):
    v = _float(m, key, default)
    if v != int(v):
        raise ConfigError(f"{key}: expected an integer, got {m[key]!r}")
    return int(v)


def _floats(m, key, n=None):
    try:
        vals = [float(t) for t in m[key].replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{key}: expected numbers, got {m[key]!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"{key}: expected {n} numbers, got {len(vals)}")
    return vals


def _points(m, key):
    pts = []
    for chunk in m[key].split(";"):
        if chunk.strip():
            try:
                x, y = (float(t) for t in chunk.replace(",", " ").split())
            except ValueError:
                raise ConfigError(f"{key}: expected 'x,y; x,y; ...', got {m[key]!r}") from None
            pts.append((x, y))
    if not pts:
        raise ConfigError(f"{key}: no points given")
    return pts


def _bool(m, key, default=False):
    if key not in m:
        return default
    v = m[key].lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {m[key]!r}")


def _grid(m, prefix):
    keys = [f"{prefix}.x1", f"{prefix}.x2", f"{prefix}.n"]
    present = [k in m for k in keys]
    if not any(present):
        return None
    if not all(present):
        raise ConfigError(f"{prefix}: need all of {', '.join(keys)}")
    x1, x2, n = _floats(m, keys[0], 2), _floats(m, keys[1], 2), _floats(m, keys[2], 2)
    if any(v != int(v) for v in n):
        raise ConfigError(f"{keys[2]}: resolution must be integers")
    try:
        return SimGrid(x1[0], x1[1], x2[0], x2[1], int(n[0]), int(n[1]))
    except ValueError as exc:
        raise ConfigError(f"{prefix}: {exc}") from None


# -- presets -----------------------------------------------------------------

def ring_radius(b, T, r_end=1.6):
    """Start radius whose outflow along ``r' = r / (b + r^2)`` reaches ``r_end`` at ``T``.

    Uses the first integral ``b ln r + r^2 / 2 = t + const``.
    """
    g = lambda r: b * math.log(r) + 0.5 * r * r  # noqa: E731
    target = g(r_end) - T
    return brentq(lambda r: g(r) - target, 1e-9, r_end)


def _fmt_points(pts):
    return "; ".join(f"{x:.12g},{y:.12g}" for x, y in pts)


def _prior_keys():
    out = {}
    for fam in Family:
        for name, v in zip(PARAM_NAMES[fam], INIT_VALUES):
            out[f"prior.{fam.value}.{name}"] = repr(v)
    return out


def preset(name, b=None):
    """Flat key map for a named experiment (``vortex``, ``vortex_current``,
    ``divergence``, ``duffing`` or ``laser``)."""
    base = {"name": name, "family": "both", "seed": "0"}
    base.update(_prior_keys())
    if name == "vortex":
        base.update({
            "sim.kind": "vortex",
            "sim.grid.x1": "-1 1", "sim.grid.x2": "-1 1", "sim.grid.n": "17 17",
            "buoys.a.starts": "0.5,-0.6; 0.5,-0.2; 0.5,0.2; 0.5,0.6",
            "buoys.a.T": "1", "buoys.a.steps": "2",
        })
    elif name == "vortex_current":
        base.update({
            "sim.kind": "vortex_current", "sim.center": "0 1.25", "sim.split": "0.5",
            "sim.current": "0.7 0",
            "sim.grid.x1": "-1 1", "sim.grid.x2": "-1 2", "sim.grid.n": "25 50",
            "buoys.a.starts": "-0.7,-0.7; -0.5,0; 0,-0.35; 0.5,1.25; -0.5,1.25; 0,1.75; 0.3,0.9",
            "buoys.a.T": "0.5", "buoys.a.steps": "2",
        })
    elif name == "divergence":
        b = 15.0 if b is None else float(b)
        r0 = ring_radius(b, 3.0)
        ang = math.pi / 2 + 2 * math.pi * np.arange(5) / 5
        base.update({
            "name": f"divergence_b{b:g}",
            "sim.kind": "divergence", "sim.b": repr(b),
            "sim.grid.x1": "-2 2", "sim.grid.x2": "-2 2", "sim.grid.n": "20 20",
            "buoys.a.starts": _fmt_points(zip(r0 * np.cos(ang), r0 * np.sin(ang))),
            "buoys.a.T": "3", "buoys.a.steps": "2",
        })
    elif name == "duffing":
        b = 0.5 if b is None else float(b)
        base.update({
            "name": f"duffing_b{b:g}",
            "sim.kind": "duffing", "sim.b": repr(b),
            "sim.grid.x1": "-4 4", "sim.grid.x2": "-4 4", "sim.grid.n": "30 30",
            # away from both bumps, observed twice
            "buoys.a.starts": "-2,1.5; 0,-0.5; 1.5,-2",
            "buoys.a.T": "5", "buoys.a.steps": "2",
            # beside the source and the sink, observed four times
            "buoys.b.starts": "-3.5,0.5; -3.5,-0.5; 2.5,1; 2.5,-1",
            "buoys.b.T": "5", "buoys.b.steps": "4",
        })
    elif name == "laser":
        base.update({
            "ingest.path": "bundled:laser_like.csv",
            "ingest.stride": "3",
            "grid.n": "20 20",
        })
    else:
        raise ConfigError(f"unknown preset {name!r}")
    return base


PRESETS = ("vortex", "vortex_current", "divergence", "duffing", "laser")


# -- typed configuration -----------------------------------------------------

@dataclass(frozen=True)
class IngestSource:
    path: str
    schema: DrifterSchema = DrifterSchema()
    filter: IngestFilter = IngestFilter()


@dataclass(frozen=True)
class SimSource:
    field: AnalyticField
    grid: SimGrid
    buoys: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    families: tuple
    init: dict
    source: object
    test_grid: SimGrid = None
    test_grid_n: tuple = (20, 20)
    optim: FitConfig = FitConfig()
    pinned: bool = False
    out: str = None
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def simulated(self):
        return isinstance(self.source, SimSource)

    def prior(self, family):
        return PriorSpec.from_values(family, self.init[Family(family)])


def _families(value):
    v = value.strip().lower()
    if v == "both":
        return (Family.HELMHOLTZ, Family.VELOCITY)
    try:
        return tuple(Family(t.strip()) for t in v.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"family: expected helmholtz, velocity or both, got {value!r}") from None


def resolve_path(path):
    """Expand ``bundled:NAME`` to the packaged data file."""
    if path.startswith("bundled:"):
        return str(resources.files("helmgp") / "data" / path.split(":", 1)[1])
    return path


def build(mapping):
    """Validate a flat key map (preset defaults applied) into :class:`ExperimentConfig`."""
    m = dict(mapping)
    if "preset" in m:
        p = m.pop("preset")
        b = m.get("sim.b")
        defaults = preset(p, float(b) if b is not None else None)
        defaults.update(m)
        m = defaults

    for k in m:
        head = k.split(".", 1)[0]
        if head not in _SECTIONS and k not in _TOP:
            raise ConfigError(f"unknown key {k!r}")

    has_sim = any(k.startswith(("sim.", "buoys.")) for k in m)
    has_ingest = any(k.startswith("ingest.") for k in m)
    if has_sim == has_ingest:
        raise ConfigError("config needs exactly one data source: sim.* / buoys.* or ingest.*")

    families = _families(m.get("family", "both"))
    if not families:
        raise ConfigError("family: no prior family selected")

    init = {}
    for fam in Family:
        vals = []
        for name, default in zip(PARAM_NAMES[fam], INIT_VALUES):
            vals.append(_float(m, f"prior.{fam.value}.{name}", default))
        try:
            PriorSpec.from_values(fam, vals)
        except ValueError as exc:
            raise ConfigError(f"prior.{fam.value}: {exc}") from None
        if min(vals) <= 0:
            raise ConfigError(f"prior.{fam.value}: initial hyperparameters must be positive")
        init[fam] = tuple(vals)

    try:
        optim = FitConfig(lr=_float(m, "optim.lr", 0.01),
                          max_iters=_int(m, "optim.max_iters", 2000),
                          tol=_float(m, "optim.tol", 1e-4))
    except ValueError as exc:
        raise ConfigError(f"optim: {exc}") from None

    if has_sim:
        source = _sim_source(m)
    else:
        source = _ingest_source(m)

    test_grid = _grid(m, "grid") if ("grid.x1" in m or "grid.x2" in m) else None
    n = (20, 20)
    if test_grid is None and "grid.n" in m:
        vals = _floats(m, "grid.n", 2)
        if any(v != int(v) or v < 2 for v in vals):
            raise ConfigError("grid.n: resolution must be integers >= 2")
        n = (int(vals[0]), int(vals[1]))

    return ExperimentConfig(
        name=m.get("name", "experiment"), families=families, init=init, source=source,
        test_grid=test_grid, test_grid_n=n, optim=optim, pinned=_bool(m, "pinned"),
        out=m.get("out"), seed=_int(m, "seed", 0), raw=m)


def _sim_source(m):
    try:
        kind = FieldKind(m.get("sim.kind", ""))
    except ValueError:
        raise ConfigError(f"sim.kind: expected one of {[k.value for k in FieldKind]}") from None
    kw = {}
    if "sim.b" in m:
        kw["b"] = _float(m, "sim.b")
    for key in ("center", "current", "source", "sink"):
        if f"sim.{key}" in m:
            kw[key] = tuple(_floats(m, f"sim.{key}", 2))
    if "sim.split" in m:
        kw["split"] = _float(m, "sim.split")
    try:
        f = AnalyticField(kind, **kw)
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}") from None
    grid = _grid(m, "sim.grid")
    if grid is None:
        raise ConfigError("sim.grid.x1, sim.grid.x2 and sim.grid.n are required")

    groups = sorted({k.split(".")[1] for k in m if k.startswith("buoys.")})
    if not groups:
        raise ConfigError("no buoy groups (buoys.<name>.starts) configured")
    buoys = []
    for g in groups:
        p = f"buoys.{g}"
        if f"{p}.starts" not in m:
            raise ConfigError(f"{p}.starts is required")
        try:
            cfg = BuoyConfig(_points(m, f"{p}.starts"), _float(m, f"{p}.T"),
                             _int(m, f"{p}.steps", 1),
                             _float(m, f"{p}.dt") if f"{p}.dt" in m else None)
        except ValueError as exc:
            raise ConfigError(f"{p}: {exc}") from None
        buoys.append(cfg)
    return SimSource(f, grid, tuple(buoys))


def _window(text):
    """Two bounds, each epoch seconds or ISO 8601, separated by whitespace or a comma."""
    parts = text.replace(",", " ").split()
    if len(parts) != 2:
        raise ConfigError(f"ingest.window: expected two bounds, got {text!r}")
    return tuple(parse_time(t) for t in parts)


def _ingest_source(m):
    if "ingest.path" not in m:
        raise ConfigError("ingest.path is required")
    schema_keys = {k.split(".", 2)[2]: v for k, v in m.items() if k.startswith("ingest.schema.")}
    if "delimiter" in schema_keys and schema_keys["delimiter"] in ("tab", "\\t"):
        schema_keys["delimiter"] = "\t"
    try:
        schema = DrifterSchema.from_mapping(schema_keys)
        flt = IngestFilter(
            box=_floats(m, "ingest.box", 4) if "ingest.box" in m else None,
            window=_window(m["ingest.window"]) if "ingest.window" in m else None,
            stride=_int(m, "ingest.stride", 1),
            allow=frozenset(t.strip() for t in m["ingest.allow"].split(",") if t.strip())
            if "ingest.allow" in m else None)
    except (ValueError, SchemaError) as exc:
        raise ConfigError(f"ingest: {exc}") from None
    return IngestSource(resolve_path(m["ingest.path"]), schema, flt)
