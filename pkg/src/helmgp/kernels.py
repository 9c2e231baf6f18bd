"""Matrix-valued covariance functions built from SE partial derivatives.

A :class:`MatrixKernel` is a ``p x q`` array of entries, each entry a finite
sum of terms ``coef * d^idx k_SE(params)``.  Linear differential operators
(grad, rot, div, curl) act on a kernel by shifting the derivative
multi-indices of its terms, so the velocity kernel, the Helmholtz kernel and
every divergence/vorticity auto- and cross-covariance share one
representation and one assembly routine (:func:`helmgp._engine.assemble`).

Entry and component indices are 0-based: component 0 is the first velocity
coordinate ``u`` (longitude-like), component 1 the second ``v``.
"""
from dataclasses import dataclass
import enum
import math

import numpy as np

from . import _engine
from .se import ScalarKernelParams, DerivMultiIndex, ZERO_INDEX, se_partial


class Family(str, enum.Enum):
    VELOCITY = "velocity"
    HELMHOLTZ = "helmholtz"


PARAM_NAMES = {
    Family.VELOCITY: ("ell_1", "sigma2_1", "ell_2", "sigma2_2", "sigma2_obs"),
    Family.HELMHOLTZ: ("ell_phi", "sigma2_phi", "ell_psi", "sigma2_psi", "sigma2_obs"),
}


@dataclass(frozen=True)
class PriorSpec:
    """Prior family plus its five scalars ``(ell_a, sigma2_a, ell_b, sigma2_b, sigma2_obs)``.

    For the velocity family ``a``/``b`` are the two velocity components, for
    the Helmholtz family the potential ``Phi`` and the stream function ``Psi``.
    """
    family: Family
    ell_a: float
    sigma2_a: float
    ell_b: float
    sigma2_b: float
    sigma2_obs: float

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        for name in ("ell_a", "sigma2_a", "ell_b", "sigma2_b", "sigma2_obs"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0 or (name.startswith("ell") and v == 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_values(cls, family, values):
        return cls(Family(family), *map(float, values))

    @property
    def values(self):
        return (self.ell_a, self.sigma2_a, self.ell_b, self.sigma2_b, self.sigma2_obs)

    @property
    def names(self):
        return PARAM_NAMES[self.family]

    def as_dict(self):
        return dict(zip(self.names, self.values))

    @property
    def first(self):
        return ScalarKernelParams(self.sigma2_a, self.ell_a)

    @property
    def second(self):
        return ScalarKernelParams(self.sigma2_b, self.ell_b)

    def kernel(self):
        if self.family is Family.VELOCITY:
            return velocity_kernel(self)
        return helmholtz_kernel(self)


@dataclass(frozen=True)
class KernelTerm:
    coef: float
    params: ScalarKernelParams
    idx: DerivMultiIndex


def _merge(terms):
    """Combine like terms and drop those whose coefficients cancel."""
    acc = {}
    for t in terms:
        if t.params.sigma2 == 0.0 or t.coef == 0.0:
            continue
        key = (t.params, t.idx)
        acc[key] = acc.get(key, 0.0) + t.coef
    return tuple(KernelTerm(c, p, i) for (p, i), c in acc.items() if c != 0.0)


class MatrixKernel:
    """``p x q`` matrix of SE-derivative term sums."""

    def __init__(self, entries):
        self.entries = tuple(tuple(_merge(e) for e in row) for row in entries)
        self.shape = (len(self.entries), len(self.entries[0]))
        self._plan = None

    # -- construction -------------------------------------------------------

    @classmethod
    def scalar(cls, params):
        return cls([[[KernelTerm(1.0, params, ZERO_INDEX)]]])

    def __add__(self, other):
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        return MatrixKernel([[a + b for a, b in zip(ra, rb)]
                             for ra, rb in zip(self.entries, other.entries)])

    def apply_left(self, op):
        """Apply a linear differential operator to the first argument.

        ``op[r]`` lists ``(coef, component, (d1, d2))`` triples: output row
        ``r`` is ``sum coef * d^(d1, d2) k[component, :]`` with the
        derivative taken w.r.t. ``x``.
        """
        rows = []
        for spec in op:
            row = []
            for j in range(self.shape[1]):
                terms = [KernelTerm(c * t.coef, t.params, t.idx.shifted(da1=d[0], da2=d[1]))
                         for c, i, d in spec for t in self.entries[i][j]]
                row.append(terms)
            rows.append(row)
        return MatrixKernel(rows)

    def apply_right(self, op):
        """Same as :meth:`apply_left` but acting on ``x'`` (output columns)."""
        rows = []
        for i in range(self.shape[0]):
            row = []
            for spec in op:
                terms = [KernelTerm(c * t.coef, t.params, t.idx.shifted(db1=d[0], db2=d[1]))
                         for c, j, d in spec for t in self.entries[i][j]]
                row.append(terms)
            rows.append(row)
        return MatrixKernel(rows)

    def block(self, i, j):
        return MatrixKernel([[self.entries[i][j]]])

    @property
    def is_block_diagonal(self):
        p, q = self.shape
        return p == q and all(not self.entries[i][j]
                              for i in range(p) for j in range(q) if i != j)

    @property
    def is_zero(self):
        return all(not e for row in self.entries for e in row)

    # -- evaluation ---------------------------------------------------------

    def plan(self):
        """Flatten the terms into the arrays consumed by :mod:`helmgp._engine`."""
        if self._plan is None:
            params = []
            rows, cols, coefs, pids, n1s, n2s = [], [], [], [], [], []
            for i, row in enumerate(self.entries):
                for j, terms in enumerate(row):
                    for t in terms:
                        if t.params not in params:
                            params.append(t.params)
                        inv = 1.0 / t.params.ell
                        rows.append(i)
                        cols.append(j)
                        coefs.append(t.coef * t.idx.sign * inv ** (t.idx.n1 + t.idx.n2))
                        pids.append(params.index(t.params))
                        n1s.append(t.idx.n1)
                        n2s.append(t.idx.n2)
            self._plan = (
                np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
                np.array(coefs, dtype=float), np.array(pids, dtype=np.int64),
                np.array(n1s, dtype=np.int64), np.array(n2s, dtype=np.int64),
                np.array([p.sigma2 for p in params], dtype=float),
                np.array([1.0 / p.ell for p in params], dtype=float),
                self.shape[0], self.shape[1])
        return self._plan

    def __call__(self, x, x2):
        """The ``p x q`` block at a single pair of locations."""
        return _engine.pair_values([x], [x2], self.plan())[:, :, 0]

    def partial(self, i, j, idx, x, x2):
        """Entry ``(i, j)`` differentiated further by ``idx``."""
        if not isinstance(idx, DerivMultiIndex):
            idx = DerivMultiIndex(*idx)
        return sum(t.coef * se_partial(t.params, t.idx.shifted(idx.a1, idx.a2, idx.b1, idx.b2), x, x2)
                   for t in self.entries[i][j])

    def gram(self, X, X2=None, backend=None):
        """Blocked covariance: rows ``[comp0 @ X, comp1 @ X, ...]``, likewise columns."""
        return _engine.assemble(X, X if X2 is None else X2, self.plan(), backend=backend)

    def pair_values(self, X, X2=None):
        return _engine.pair_values(X, X if X2 is None else X2, self.plan())

    def diag(self, X):
        """``k(x, x)`` for each point, shape ``(p, q, N)``."""
        return self.pair_values(X, X)

    def __repr__(self):
        n = sum(len(e) for row in self.entries for e in row)
        return f"MatrixKernel(shape={self.shape}, terms={n})"


# -- differential operators (as consumed by apply_left / apply_right) --------

GRAD = (((1.0, 0, (1, 0)),), ((1.0, 0, (0, 1)),))
ROT = (((1.0, 0, (0, 1)),), ((-1.0, 0, (1, 0)),))
DIV = (((1.0, 0, (1, 0)), (1.0, 1, (0, 1))),)
CURL = (((1.0, 0, (0, 1)), (-1.0, 1, (1, 0))),)


def velocity_kernel(spec):
    """Independent SE kernels on the two velocity components."""
    spec = _require(spec, Family.VELOCITY)
    return MatrixKernel([
        [[KernelTerm(1.0, spec.first, ZERO_INDEX)], []],
        [[], [KernelTerm(1.0, spec.second, ZERO_INDEX)]],
    ])


def helmholtz_kernel(spec):
    """Covariance of ``grad Phi + rot Psi`` for independent SE ``Phi`` and ``Psi``."""
    spec = _require(spec, Family.HELMHOLTZ)
    grad_grad = MatrixKernel.scalar(spec.first).apply_left(GRAD).apply_right(GRAD)
    rot_rot = MatrixKernel.scalar(spec.second).apply_left(ROT).apply_right(ROT)
    return grad_grad + rot_rot


def div_cross_kernel(k):
    """1x2 kernel ``Cov[div F(x), F(x')]``."""
    return k.apply_left(DIV)


def vort_cross_kernel(k):
    """1x2 kernel ``Cov[curl F(x), F(x')]``."""
    return k.apply_left(CURL)


def div_auto_kernel(k):
    return k.apply_left(DIV).apply_right(DIV)


def vort_auto_kernel(k):
    return k.apply_left(CURL).apply_right(CURL)


def _require(spec, family):
    if spec.family is not family:
        raise ValueError(f"expected a {family.value} prior, got {spec.family.value}")
    return spec
