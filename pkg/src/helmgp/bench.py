"""Wall-clock comparison of Helmholtz and velocity GP posteriors."""
import time

import numpy as np

from .gp import VelocityDataset, posterior_velocity
from .kernels import PriorSpec


def _posterior_time(spec, data, X_te, repeats):
    best = np.inf
    for _ in range(repeats):
        t = time.perf_counter()
        posterior_velocity(spec, data, X_te)
        best = min(best, time.perf_counter() - t)
    return best


def cost_ratio(M=500, N=400, repeats=3, seed=0, extent=3.0):
    """``(ratio, t_helmholtz, t_velocity)`` for posterior mean and marginal variances.

    Each timing covers Gram assembly, factorisation and prediction at ``N``
    test points from ``M`` random observations, and is the fastest of
    ``repeats`` runs after one warm-up.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform(-extent, extent, size=(M, 2))
    Y = rng.normal(size=(M, 2))
    X_te = rng.uniform(-extent, extent, size=(N, 2))
    data = VelocityDataset(X, Y)
    helm = PriorSpec("helmholtz", 1.0, 1.0, 1.0, 1.0, 0.1)
    vel = PriorSpec("velocity", 1.0, 1.0, 1.0, 1.0, 0.1)
    posterior_velocity(helm, data, X_te[:2])
    posterior_velocity(vel, data, X_te[:2])
    t_h = _posterior_time(helm, data, X_te, repeats)
    t_v = _posterior_time(vel, data, X_te, repeats)
    return t_h / t_v, t_h, t_v
