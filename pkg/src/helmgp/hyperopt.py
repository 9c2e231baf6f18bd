"""Type-II maximum likelihood over log-hyperparameters with Adam.

The five log-parameters are the logs of the :class:`~helmgp.kernels.PriorSpec`
scalars in their stored order ``(ell_a, sigma2_a, ell_b, sigma2_b, sigma2_obs)``.
Gradients are central finite differences of the full log marginal likelihood.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .errors import DivergedError, GradientError, NumericalError
from .gp import log_marginal_likelihood
from .kernels import Family, PriorSpec

log = logging.getLogger(__name__)

FD_STEP = 1e-5
DIVERGENCE_PATIENCE = 50


def to_log(spec):
    return np.log(np.asarray(spec.values, dtype=float))


def from_log(family, logp):
    with np.errstate(over="ignore"):  # PriorSpec rejects the resulting inf
        values = np.exp(np.asarray(logp, dtype=float))
    return PriorSpec.from_values(family, values)


def objective(logp, family, data):
    """LML at ``exp(logp)``; ``-inf`` when the kernel cannot be factorised."""
    try:
        spec = from_log(family, logp)
        value = log_marginal_likelihood(spec, data)
    except (NumericalError, ValueError, OverflowError) as exc:
        log.debug("objective failed at %s: %s", np.asarray(logp).tolist(), exc)
        return -math.inf
    return value if math.isfinite(value) else -math.inf


def fd_gradient(logp, data=None, family=None, fn=None, step=FD_STEP):
    """Central-difference gradient of ``fn`` (default: :func:`objective`)."""
    logp = np.asarray(logp, dtype=float)
    if fn is None:
        fn = lambda z: objective(z, family, data)  # noqa: E731
    grad = np.empty_like(logp)
    for i in range(logp.size):
        e = np.zeros_like(logp)
        e[i] = step
        hi = fn(logp + e)
        lo = fn(logp - e)
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise GradientError(i, hi if not math.isfinite(hi) else lo)
        grad[i] = (hi - lo) / (2.0 * step)
    return grad


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = None
    v: np.ndarray = None

    def update(self, params, grad):
        """One ascent step along ``grad``; returns the new parameters."""
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.step += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.step)
        v_hat = self.v / (1 - self.beta2 ** self.step)
        return params + self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class FitConfig:
    lr: float = 0.01
    max_iters: int = 2000
    tol: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class FitResult:
    spec: PriorSpec
    trace: list
    converged: bool
    iterations: int
    best_lml: float
    log_params: np.ndarray = field(repr=False, default=None)


def fit(init, data, config=None, family=None):
    """Adam ascent of the LML until ``|dLML| < tol`` or ``max_iters`` steps.

    ``init`` is a :class:`PriorSpec` or, with ``family`` given, a vector of
    log-parameters.  ``trace[0]`` is the LML at ``init`` and each step
    appends the LML of the proposed point.  A step whose LML change falls
    below ``tol`` ends the run without being adopted, and the best point seen
    so far is returned, so the result is never worse than ``init``.
    """
    config = config or FitConfig()
    if isinstance(init, PriorSpec):
        family = init.family
        theta = to_log(init)
    else:
        if family is None:
            raise ValueError("family is required when init is a log-parameter vector")
        family = Family(family)
        theta = np.asarray(init, dtype=float).copy()

    current = objective(theta, family, data)
    if not math.isfinite(current):
        raise DivergedError("objective is not finite at the initial point", [current])
    trace = [current]
    best_theta, best = theta.copy(), current
    adam = AdamState(config.lr, config.beta1, config.beta2, config.eps)
    decreasing = 0
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        grad = fd_gradient(theta, data, family)
        proposal = adam.update(theta, grad)
        value = objective(proposal, family, data)
        trace.append(value)
        if not math.isfinite(value):
            raise DivergedError(f"objective became non-finite at iteration {it}", trace)
        if abs(value - current) < config.tol:
            converged = True
            break
        decreasing = decreasing + 1 if value < current else 0
        if decreasing >= DIVERGENCE_PATIENCE:
            raise DivergedError(
                f"LML decreased for {DIVERGENCE_PATIENCE} consecutive steps", trace)
        theta, current = proposal, value
        if value > best:
            best_theta, best = theta.copy(), value

    log.info("fit %s: %d iterations, converged=%s, LML %.6f -> %.6f",
             family.value, it, converged, trace[0], best)
    return FitResult(from_log(family, best_theta), trace, converged, it, best, best_theta)
