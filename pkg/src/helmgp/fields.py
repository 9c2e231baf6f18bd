"""Analytic current fields, buoy simulation and grid metrics.

Every field kind returns velocity, divergence and vorticity in closed form,
with divergence ``du/dx1 + dv/dx2`` and vorticity ``du/dx2 - dv/dx1``.
Buoys are advected through the field *as sampled on the simulation grid*
and bilinearly interpolated, and observed velocities come from the same
interpolant.
"""
from dataclasses import dataclass
import enum
import math

import numpy as np

from . import _engine
from .errors import OutOfDomainError
from .gp import VelocityDataset


class FieldKind(str, enum.Enum):
    VORTEX = "vortex"
    VORTEX_CURRENT = "vortex_current"
    DIVERGENCE = "divergence"
    DUFFING = "duffing"


DUFFING_FACTOR = 1.0 + 0.1 * math.cos(50.0 * math.pi / 4.0)


@dataclass(frozen=True)
class AnalyticField:
    """A closed-form current field.

    Parameters
    ----------
    kind : FieldKind
    b : float
        Spread of the divergence/convergence bumps (``divergence``, ``duffing``).
    center : (float, float)
        Vortex or bump center.
    current : (float, float)
        Uniform current below ``split`` (``vortex_current`` only).
    split : float
        ``x2`` value separating the current (below) from the vortex (above).
    """
    kind: FieldKind
    b: float = 0.5
    center: tuple = (0.0, 0.0)
    current: tuple = (0.7, 0.0)
    split: float = 0.5
    source: tuple = (-3.0, 0.0)
    sink: tuple = (3.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "kind", FieldKind(self.kind))
        if not self.b > 0:
            raise ValueError("b must be positive")

    @classmethod
    def vortex(cls, center=(0.0, 0.0)):
        return cls(FieldKind.VORTEX, center=tuple(center))

    @classmethod
    def vortex_current(cls, center=(0.0, 1.25), current=(0.7, 0.0), split=0.5):
        return cls(FieldKind.VORTEX_CURRENT, center=tuple(center), current=tuple(current),
                   split=float(split))

    @classmethod
    def divergence(cls, b, center=(0.0, 0.0)):
        return cls(FieldKind.DIVERGENCE, b=float(b), center=tuple(center))

    @classmethod
    def duffing(cls, b, source=(-3.0, 0.0), sink=(3.0, 0.0)):
        return cls(FieldKind.DUFFING, b=float(b), source=tuple(source), sink=tuple(sink))


@dataclass(frozen=True)
class FieldValues:
    velocity: np.ndarray
    div: np.ndarray
    vort: np.ndarray


def _vortex(x, c):
    d1, d2 = x[:, 0] - c[0], x[:, 1] - c[1]
    n = x.shape[0]
    return np.column_stack([-d2, d1]), np.zeros(n), np.full(n, -2.0)


def _bump(x, c, b, sign):
    # sign * (x - c) / (b + |x - c|^2); curl-free
    d1, d2 = x[:, 0] - c[0], x[:, 1] - c[1]
    den = b + d1 * d1 + d2 * d2
    vel = sign * np.column_stack([d1 / den, d2 / den])
    return vel, sign * 2.0 * b / den ** 2, np.zeros(x.shape[0])


def eval_field(f, x):
    """Velocity ``(N, 2)``, divergence ``(N,)`` and vorticity ``(N,)`` at ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    kind = f.kind
    if kind is FieldKind.VORTEX:
        vel, div, vort = _vortex(x, f.center)
    elif kind is FieldKind.VORTEX_CURRENT:
        vel, div, vort = _vortex(x, f.center)
        below = x[:, 1] < f.split
        vel[below] = f.current
        vort[below] = 0.0
    elif kind is FieldKind.DIVERGENCE:
        vel, div, vort = _bump(x, f.center, f.b, 1.0)
    else:
        x1, x2 = x[:, 0], x[:, 1]
        vel = np.column_stack([x2, DUFFING_FACTOR * (x1 - 0.1 * x1 ** 3)])
        vort = 1.0 - DUFFING_FACTOR * (1.0 - 0.3 * x1 ** 2)
        div = np.zeros(x.shape[0])
        for c, s in ((f.source, 1.0), (f.sink, -1.0)):
            v, d, _ = _bump(x, c, f.b, s)
            vel = vel + v
            div = div + d
    return FieldValues(vel, div, vort)


@dataclass(frozen=True)
class SimGrid:
    """Equally spaced grid; points are listed row-major with ``x1`` varying fastest."""
    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float
    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError("grid resolution must be at least 2 per axis")
        if not (self.x1_min < self.x1_max and self.x2_min < self.x2_max):
            raise ValueError("grid extents must satisfy min < max")

    @classmethod
    def square(cls, lo, hi, n):
        return cls(lo, hi, lo, hi, n, n)

    @property
    def x1(self):
        return np.linspace(self.x1_min, self.x1_max, self.n1)

    @property
    def x2(self):
        return np.linspace(self.x2_min, self.x2_max, self.n2)

    @property
    def points(self):
        g1, g2 = np.meshgrid(self.x1, self.x2)
        return np.column_stack([g1.ravel(), g2.ravel()])

    def __len__(self):
        return self.n1 * self.n2

    def contains(self, p):
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        return ((p[:, 0] >= self.x1_min) & (p[:, 0] <= self.x1_max)
                & (p[:, 1] >= self.x2_min) & (p[:, 1] <= self.x2_max))

    def sample(self, f):
        """Velocity components on the grid as ``(n2, n1)`` arrays."""
        vel = eval_field(f, self.points).velocity
        return vel[:, 0].reshape(self.n2, self.n1), vel[:, 1].reshape(self.n2, self.n1)


@dataclass(frozen=True)
class BuoyConfig:
    """Start positions ``(B, 2)``, horizon ``T``, observation count and RK4 step.

    Observations are taken at ``t_k = k T / steps`` for ``k = 1..steps``.
    ``dt`` defaults to ``T / 1000`` and is shrunk so that it divides each
    observation interval exactly.
    """
    starts: tuple
    T: float
    steps: int
    dt: float = None

    def __post_init__(self):
        s = np.asarray(self.starts, dtype=float).reshape(-1, 2)
        if s.shape[0] < 1 or not np.isfinite(s).all():
            raise ValueError("need at least one finite start position")
        object.__setattr__(self, "starts", tuple(map(tuple, s.tolist())))
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError("T must be positive")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("steps must be an integer >= 1")
        object.__setattr__(self, "steps", int(self.steps))
        if self.dt is None:
            object.__setattr__(self, "dt", self.T / 1000.0)
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def substeps(self):
        return max(1, int(math.ceil(self.T / self.steps / self.dt - 1e-9)))

    @property
    def h(self):
        return self.T / self.steps / self.substeps

    @property
    def times(self):
        return self.T * np.arange(1, self.steps + 1) / self.steps


def simulate_buoys(f, grid, cfg, backend=None, id_offset=0):
    """RK4-advect each buoy through the gridded ``f`` and record velocities.

    Raises
    ------
    OutOfDomainError
        If a start lies outside the grid or a trajectory leaves it.
    """
    starts = np.asarray(cfg.starts, dtype=float)
    inside = grid.contains(starts)
    if not inside.all():
        b = int(np.argmin(inside))
        raise OutOfDomainError(b + id_offset, 0.0, starts[b])
    U, V = grid.sample(f)
    x1g, x2g = grid.x1, grid.x2
    pos, fb, fs = _engine.advect(x1g, x2g, U, V, starts, cfg.steps, cfg.substeps, cfg.h, 0.0,
                                 backend=backend)
    if fb >= 0:
        k = (fs - 1) // cfg.substeps
        raise OutOfDomainError(fb + id_offset, fs * cfg.h, pos[fb, k])
    # buoy-major order: all observations of buoy 0, then buoy 1, ...
    locs = pos.reshape(-1, 2)
    vel = _engine.bilinear(x1g, x2g, U, V, locs)
    B = starts.shape[0]
    # zero-padded so that lexical order (used by the ingest sort) is numeric order
    ids = [f"{b + id_offset:03d}" for b in range(B) for _ in range(cfg.steps)]
    times = np.tile(cfg.times, B)
    return VelocityDataset(locs, vel, ids, times)


def concat(datasets):
    """Stack several datasets, keeping metadata only when every part has it."""
    datasets = list(datasets)
    locs = np.concatenate([d.locations for d in datasets])
    vel = np.concatenate([d.velocities for d in datasets])
    ids = None
    if all(d.ids is not None for d in datasets):
        ids = tuple(i for d in datasets for i in d.ids)
    times = None
    if all(d.times is not None for d in datasets):
        times = np.concatenate([d.times for d in datasets])
    return VelocityDataset(locs, vel, ids, times)


def rmse(truth, pred):
    """``sqrt(mean_x |truth(x) - pred(x)|^2)`` for scalar or vector per-point values."""
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if truth.shape != pred.shape:
        raise ValueError(f"shape mismatch: {truth.shape} vs {pred.shape}")
    if truth.size == 0:
        raise ValueError("empty input")
    d = (truth - pred).reshape(truth.shape[0], -1)
    return float(np.sqrt(np.mean(np.sum(d * d, axis=1))))
