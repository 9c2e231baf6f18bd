"""Squared-exponential kernel and its mixed partial derivatives.

With ``r = x - x'`` the SE kernel factorises over coordinates,

    k(x, x') = sigma2 * h(r1) * h(r2),    h(t) = exp(-t**2 / (2 ell**2)),

and ``d^n h / dt^n = (-1)^n ell^-n He_n(t / ell) h(t)`` where ``He_n`` is the
probabilists' Hermite polynomial.  Differentiating ``a_c`` times in ``x_c``
and ``b_c`` times in ``x'_c`` is ``(-1)^b_c`` times the ``(a_c + b_c)``-th
derivative in ``r_c``, so every supported partial is

    sigma2 * exp(-|u|^2 / 2) * prod_c (-1)^a_c ell^-n_c He_n_c(u_c)

with ``u = r / ell`` and ``n_c = a_c + b_c <= 4``.
"""
from dataclasses import dataclass
import math

import mpmath
import numpy as np

from .errors import DerivativeOrderError

MAX_ORDER_PER_ARGUMENT = 2


@dataclass(frozen=True)
class ScalarKernelParams:
    """Signal variance ``sigma2`` and length scale ``ell`` of an SE kernel.

    ``sigma2 == 0`` is accepted and denotes the zero kernel; it is how the
    pure-divergent / pure-rotational special cases are expressed.
    """
    sigma2: float
    ell: float

    def __post_init__(self):
        s, l = float(self.sigma2), float(self.ell)
        if not (math.isfinite(s) and s >= 0.0):
            raise ValueError(f"sigma2 must be finite and >= 0, got {self.sigma2!r}")
        if not (math.isfinite(l) and l > 0.0):
            raise ValueError(f"ell must be finite and > 0, got {self.ell!r}")
        object.__setattr__(self, "sigma2", s)
        object.__setattr__(self, "ell", l)

    @classmethod
    def from_log(cls, log_sigma2, log_ell):
        return cls(math.exp(log_sigma2), math.exp(log_ell))


@dataclass(frozen=True)
class DerivMultiIndex:
    """Derivative orders ``(a1, a2)`` in the first argument, ``(b1, b2)`` in the second."""
    a1: int = 0
    a2: int = 0
    b1: int = 0
    b2: int = 0

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise DerivativeOrderError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.a1 + self.a2 > MAX_ORDER_PER_ARGUMENT or self.b1 + self.b2 > MAX_ORDER_PER_ARGUMENT:
            raise DerivativeOrderError(
                f"derivative order {self.a1 + self.a2} in x and {self.b1 + self.b2} in x' "
                f"exceeds the supported maximum of {MAX_ORDER_PER_ARGUMENT} per argument")

    @property
    def n1(self):
        return self.a1 + self.b1

    @property
    def n2(self):
        return self.a2 + self.b2

    @property
    def sign(self):
        return -1.0 if (self.a1 + self.a2) % 2 else 1.0

    def swapped(self):
        return DerivMultiIndex(self.b1, self.b2, self.a1, self.a2)

    def shifted(self, da1=0, da2=0, db1=0, db2=0):
        return DerivMultiIndex(self.a1 + da1, self.a2 + da2, self.b1 + db1, self.b2 + db2)


ZERO_INDEX = DerivMultiIndex()


def hermite_e(n, u):
    """Probabilists' Hermite polynomial ``He_n(u)`` for ``n <= 4``."""
    if n == 0:
        return np.ones_like(u) if isinstance(u, np.ndarray) else 1.0
    if n == 1:
        return u
    u2 = u * u
    if n == 2:
        return u2 - 1.0
    if n == 3:
        return u * (u2 - 3.0)
    if n == 4:
        return u2 * (u2 - 6.0) + 3.0
    raise DerivativeOrderError(f"Hermite order {n} not supported")


def se_eval(p, x, x2):
    """``sigma2 * exp(-|x - x2|^2 / (2 ell^2))``."""
    d1 = float(x[0]) - float(x2[0])
    d2 = float(x[1]) - float(x2[1])
    return p.sigma2 * math.exp(-0.5 * (d1 * d1 + d2 * d2) / (p.ell * p.ell))


def se_partial(p, idx, x, x2):
    """Exact mixed partial of :func:`se_eval` at ``(x, x2)`` for multi-index ``idx``."""
    if not isinstance(idx, DerivMultiIndex):
        idx = DerivMultiIndex(*idx)
    inv = 1.0 / p.ell
    u1 = (float(x[0]) - float(x2[0])) * inv
    u2 = (float(x[1]) - float(x2[1])) * inv
    g = p.sigma2 * math.exp(-0.5 * (u1 * u1 + u2 * u2))
    scale = idx.sign * inv ** (idx.n1 + idx.n2)
    return scale * g * hermite_e(idx.n1, u1) * hermite_e(idx.n2, u2)


_FD_WEIGHTS = {0: ((0, 1.0),), 1: ((-1, -0.5), (1, 0.5)), 2: ((-1, 1.0), (0, -2.0), (1, 1.0))}


def fd_partial_oracle(p, idx, x, x2, h=1e-3, dps=40):
    """Central finite-difference estimate of the same partial as :func:`se_partial`.

    Second-order central stencils are composed per coordinate (x1, x2, x'1,
    x'2).  The stencil sum is accumulated in ``dps``-digit arithmetic so that
    round-off stays far below the O(h^2) truncation error even for fourth
    derivatives; pass ``dps=None`` to stay in double precision.  The zeroth
    derivative returns :func:`se_eval` unchanged.
    """
    if not isinstance(idx, DerivMultiIndex):
        idx = DerivMultiIndex(*idx)
    if h <= 0:
        raise ValueError("h must be positive")
    orders = (idx.a1, idx.a2, idx.b1, idx.b2)
    if not any(orders):
        return se_eval(p, x, x2)

    if dps is None:
        return _fd_sum(p, orders, x, x2, h, None)
    with mpmath.workdps(dps):
        return _fd_sum(p, orders, x, x2, h, dps)


def _fd_sum(p, orders, x, x2, h, dps):
    if dps is None:
        base = [float(x[0]), float(x[1]), float(x2[0]), float(x2[1])]
        step = float(h)
        exp = math.exp
        s2, l2 = p.sigma2, p.ell * p.ell
    else:
        base = [mpmath.mpf(float(v)) for v in (x[0], x[1], x2[0], x2[1])]
        step = mpmath.mpf(float(h))
        exp = mpmath.exp
        s2, l2 = mpmath.mpf(p.sigma2), mpmath.mpf(p.ell) ** 2

    def f(z):
        d1 = z[0] - z[2]
        d2 = z[1] - z[3]
        return s2 * exp(-(d1 * d1 + d2 * d2) / (2 * l2))

    total = 0
    # tensor product of one stencil per coordinate
    stencils = [_FD_WEIGHTS[o] for o in orders]
    for o1, w1 in stencils[0]:
        for o2, w2 in stencils[1]:
            for o3, w3 in stencils[2]:
                for o4, w4 in stencils[3]:
                    z = [base[0] + o1 * step, base[1] + o2 * step,
                         base[2] + o3 * step, base[3] + o4 * step]
                    total += (w1 * w2 * w3 * w4) * f(z)
    return float(total / step ** sum(orders))
