"""Exact GP inference for 2D velocity data.

Observations are stacked in blocked order ``[u_1..u_M, v_1..v_M]``.  When the
prior kernel is block diagonal (the velocity GP) the two components are
factorised and solved separately, which is where the velocity GP's cost
advantage comes from; the Helmholtz GP always works with the full
``2M x 2M`` system.
"""
from dataclasses import dataclass, field as dc_field
import math

import numpy as np
import scipy.linalg as la

from .errors import DataError, NegativeVarianceError, SingularKernelError
from .kernels import div_auto_kernel, div_cross_kernel, vort_auto_kernel, vort_cross_kernel

LOG_2PI = math.log(2.0 * math.pi)
JITTER_START = 1e-10
JITTER_STOP = 1e-4
VARIANCE_TOL = 1e-9
DEGENERATE_VAR = 1e-14
ZERO_MEAN = 1e-10

FIELDS = ("u", "v", "div", "vort")


@dataclass(frozen=True, eq=False)
class VelocityDataset:
    """Observed locations ``(M, 2)`` and velocities ``(M, 2)``.

    ``ids`` and ``times`` are optional per-observation metadata carried
    through export and ingest; they play no role in inference.
    """
    locations: np.ndarray
    velocities: np.ndarray
    ids: tuple = None
    times: np.ndarray = None

    def __post_init__(self):
        X = np.array(self.locations, dtype=float).reshape(-1, 2)
        Y = np.array(self.velocities, dtype=float).reshape(-1, 2)
        if X.shape[0] != Y.shape[0]:
            raise DataError(f"{X.shape[0]} locations but {Y.shape[0]} velocities")
        if X.shape[0] < 1:
            raise DataError("a dataset needs at least one observation")
        if not (np.isfinite(X).all() and np.isfinite(Y).all()):
            raise DataError("locations and velocities must be finite")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "locations", X)
        object.__setattr__(self, "velocities", Y)
        if self.ids is not None:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != X.shape[0]:
                raise DataError("ids length does not match observations")
            object.__setattr__(self, "ids", ids)
        if self.times is not None:
            t = np.array(self.times, dtype=float).reshape(-1)
            if t.shape[0] != X.shape[0]:
                raise DataError("times length does not match observations")
            t.setflags(write=False)
            object.__setattr__(self, "times", t)

    def __len__(self):
        return self.locations.shape[0]

    @property
    def stacked(self):
        return np.concatenate([self.velocities[:, 0], self.velocities[:, 1]])

    def rotated(self, R):
        R = np.asarray(R, dtype=float)
        return VelocityDataset(self.locations @ R.T, self.velocities @ R.T, self.ids, self.times)

    def __eq__(self, other):
        if not isinstance(other, VelocityDataset):
            return NotImplemented
        return (np.array_equal(self.locations, other.locations)
                and np.array_equal(self.velocities, other.velocities))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class StackedGram:
    """Noise-augmented Gram matrix in blocked order and its Cholesky factor(s).

    ``blocks`` holds one matrix per output component when the kernel is
    block diagonal, otherwise a single ``2M x 2M`` matrix; ``factors`` are the
    matching lower-triangular factors with ``L @ L.T = block + jitter * I``.
    """
    blocks: tuple
    factors: tuple
    jitter: float

    @property
    def block_diagonal(self):
        return len(self.blocks) > 1

    @property
    def size(self):
        return sum(b.shape[0] for b in self.blocks)

    @property
    def matrix(self):
        return self.blocks[0] if len(self.blocks) == 1 else la.block_diag(*self.blocks)

    @property
    def factor(self):
        return self.factors[0] if len(self.factors) == 1 else la.block_diag(*self.factors)

    def _split(self, B):
        edges = np.cumsum([0] + [b.shape[0] for b in self.blocks])
        return [B[edges[i]:edges[i + 1]] for i in range(len(self.blocks))]

    def half_solve(self, B):
        """``L^-1 B`` per block (list of arrays)."""
        return [la.solve_triangular(L, b, lower=True, check_finite=False)
                for L, b in zip(self.factors, self._split(B))]

    def solve(self, B):
        out = [la.cho_solve((L, True), b, check_finite=False)
               for L, b in zip(self.factors, self._split(B))]
        return np.concatenate(out, axis=0)

    def logdet(self):
        return float(sum(2.0 * np.log(np.diag(L)).sum() for L in self.factors))


def _cholesky(A):
    try:
        return la.cholesky(A, lower=True, check_finite=False)
    except la.LinAlgError:
        return None


def assemble_gram(k, X, noise=None):
    """Build ``k(X, X) [+ noise I]`` and factorise with an escalating jitter.

    Jitter starts at 0, then ``1e-10 * trace / 2M`` and grows by x10 up to
    ``1e-4 * trace / 2M``; the same jitter is used for every block.
    """
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    if X.shape[0] == 0:
        raise DataError("cannot assemble a Gram matrix over zero locations")
    if k.is_block_diagonal:
        blocks = [k.block(c, c).gram(X) for c in range(k.shape[0])]
    else:
        blocks = [k.gram(X)]
    if noise:
        for b in blocks:
            b[np.diag_indices_from(b)] += noise
    n = sum(b.shape[0] for b in blocks)
    scale = sum(float(np.trace(b)) for b in blocks) / n
    ladder = [0.0]
    level = JITTER_START
    while level <= JITTER_STOP * (1 + 1e-9):
        ladder.append(level * scale)
        level *= 10.0
    jitter = 0.0
    for jitter in ladder:
        factors = []
        for b in blocks:
            A = b if jitter == 0.0 else b + jitter * np.eye(b.shape[0])
            L = _cholesky(A)
            if L is None:
                break
            factors.append(L)
        else:
            for b in blocks:
                b.setflags(write=False)
            return StackedGram(tuple(blocks), tuple(factors), jitter)
    raise SingularKernelError(jitter)


@dataclass(frozen=True, eq=False)
class Conditioned:
    """A prior conditioned on data: kernel, factorised Gram and ``alpha = K^-1 y``."""
    spec: object
    kernel: object
    data: VelocityDataset
    gram: StackedGram
    alpha: np.ndarray


def condition(spec, data):
    k = spec.kernel()
    gram = assemble_gram(k, data.locations, spec.sigma2_obs)
    alpha = gram.solve(data.stacked)
    alpha.setflags(write=False)
    return Conditioned(spec, k, data, gram, alpha)


def log_marginal_likelihood(spec, data, conditioned=None):
    """``-M log 2pi - 1/2 log|K + s2 I| - 1/2 y^T (K + s2 I)^-1 y``."""
    c = conditioned if conditioned is not None else condition(spec, data)
    y = c.data.stacked
    M = len(c.data)
    return -M * LOG_2PI - 0.5 * c.gram.logdet() - 0.5 * float(y @ c.alpha)


@dataclass
class FieldPosterior:
    """Per-point posterior moments over ``grid``; derived fields may be ``None``."""
    grid: np.ndarray
    mean_u: np.ndarray = None
    mean_v: np.ndarray = None
    var_u: np.ndarray = None
    var_v: np.ndarray = None
    mean_div: np.ndarray = None
    var_div: np.ndarray = None
    mean_vort: np.ndarray = None
    var_vort: np.ndarray = None
    cov: np.ndarray = dc_field(default=None, repr=False)

    def __len__(self):
        return self.grid.shape[0]

    def mean(self, field):
        return getattr(self, "mean_" + _field(field))

    def var(self, field):
        return getattr(self, "var_" + _field(field))

    @property
    def mean_velocity(self):
        return np.column_stack([self.mean_u, self.mean_v])

    def merged(self, other):
        out = FieldPosterior(self.grid)
        for name in ("mean_u", "mean_v", "var_u", "var_v", "mean_div", "var_div",
                     "mean_vort", "var_vort", "cov"):
            a = getattr(self, name)
            setattr(out, name, a if a is not None else getattr(other, name))
        return out


def _field(field):
    f = str(field).lower()
    aliases = {"divergence": "div", "vorticity": "vort", "curl": "vort"}
    f = aliases.get(f, f)
    if f not in FIELDS:
        raise ValueError(f"unknown field {field!r}; expected one of {FIELDS}")
    return f


def _clamp(var, prior):
    tol = VARIANCE_TOL * np.maximum(1.0, np.abs(prior))
    bad = var < -tol
    if bad.any():
        i = int(np.argmax(bad))
        raise NegativeVarianceError(
            f"posterior variance {var[i]:.3e} below tolerance at test point {i}")
    return np.maximum(var, 0.0)


def _as_conditioned(spec, data):
    if isinstance(spec, Conditioned):
        return spec
    if data is None:
        return None
    return condition(spec, data)


def posterior_velocity(spec, data, X_te, full_cov=False):
    """Posterior mean and marginal variance of the latent velocity at ``X_te``.

    ``spec`` may also be a :class:`Conditioned` (then ``data`` is ignored);
    ``data=None`` returns the prior.  With ``full_cov`` the ``2N x 2N``
    posterior covariance (blocked order) is attached as ``cov``.
    """
    X_te = np.asarray(X_te, dtype=float).reshape(-1, 2)
    if X_te.shape[0] == 0:
        raise DataError("no test locations")
    c = _as_conditioned(spec, data)
    k = c.kernel if c is not None else spec.kernel()
    N = X_te.shape[0]
    prior = k.diag(X_te)
    prior_var = np.stack([prior[0, 0], prior[1, 1]])
    post = FieldPosterior(X_te)

    if c is None:
        mean = np.zeros((2, N))
        var = prior_var.copy()
        cov = k.gram(X_te) if full_cov else None
    elif c.gram.block_diagonal:
        M = len(c.data)
        mean = np.empty((2, N))
        var = np.empty((2, N))
        covs = []
        for comp, L in enumerate(c.gram.factors):
            kc = k.block(comp, comp)
            Ks = kc.gram(X_te, c.data.locations)
            mean[comp] = Ks @ c.alpha[comp * M:(comp + 1) * M]
            W = la.solve_triangular(L, Ks.T, lower=True, check_finite=False)
            var[comp] = prior_var[comp] - np.einsum("ij,ij->j", W, W)
            if full_cov:
                covs.append(kc.gram(X_te) - W.T @ W)
        cov = la.block_diag(*covs) if full_cov else None
    else:
        Ks = k.gram(X_te, c.data.locations)
        mean = (Ks @ c.alpha).reshape(2, N)
        (W,) = c.gram.half_solve(Ks.T)
        var = prior_var - np.einsum("ij,ij->j", W, W).reshape(2, N)
        cov = k.gram(X_te) - W.T @ W if full_cov else None

    post.mean_u, post.mean_v = mean[0], mean[1]
    post.var_u = _clamp(var[0], prior_var[0])
    post.var_v = _clamp(var[1], prior_var[1])
    post.cov = cov
    return post


def posterior_derived(spec, data, X_te, field):
    """Posterior of divergence (``field='div'``) or vorticity (``'vort'``) at ``X_te``."""
    X_te = np.asarray(X_te, dtype=float).reshape(-1, 2)
    if X_te.shape[0] == 0:
        raise DataError("no test locations")
    f = _field(field)
    if f not in ("div", "vort"):
        raise ValueError("posterior_derived handles 'div' and 'vort' only")
    c = _as_conditioned(spec, data)
    k = c.kernel if c is not None else spec.kernel()
    cross_fn, auto_fn = ((div_cross_kernel, div_auto_kernel) if f == "div"
                         else (vort_cross_kernel, vort_auto_kernel))
    auto = auto_fn(k)
    prior_var = auto.diag(X_te)[0, 0]
    if c is None:
        mean = np.zeros(X_te.shape[0])
        var = prior_var.copy()
    else:
        cross = cross_fn(k)
        C = cross.gram(X_te, c.data.locations)
        mean = C @ c.alpha
        if cross.is_zero:
            var = prior_var.copy()
        else:
            var = prior_var - sum(np.einsum("ij,ij->j", W, W) for W in c.gram.half_solve(C.T))
    post = FieldPosterior(X_te)
    setattr(post, "mean_" + f, mean)
    setattr(post, "var_" + f, _clamp(var, prior_var))
    return post


def predict(spec, data, X_te, fields=("div", "vort"), full_cov=False):
    """Velocity posterior plus the requested derived fields, sharing one factorisation."""
    c = _as_conditioned(spec, data)
    src = c if c is not None else spec
    post = posterior_velocity(src, None, X_te, full_cov=full_cov)
    for f in fields:
        post = post.merged(posterior_derived(src, None, X_te, f))
    return post


def z_values(post, field):
    """``mean / sqrt(var)``; degenerate variance gives 0 (zero mean) or +-inf."""
    mean, var = post.mean(field), post.var(field)
    if mean is None or var is None:
        raise ValueError(f"posterior has no {field} moments")
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    z = np.empty_like(mean)
    ok = var > DEGENERATE_VAR
    z[ok] = mean[ok] / np.sqrt(var[ok])
    deg = ~ok
    z[deg] = np.where(np.abs(mean[deg]) <= ZERO_MEAN, 0.0, np.copysign(np.inf, mean[deg]))
    return z
