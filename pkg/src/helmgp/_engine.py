"""Hot loops: kernel-term assembly and buoy advection.

Every covariance in the package is a sum of terms ``coef * d^n SE`` (see
:mod:`helmgp.se`), so Gram assembly reduces to one loop over point pairs
that evaluates a handful of Hermite-weighted exponentials.  Each loop has a
numba version and a numpy version with identical semantics; ``assemble`` and
``advect`` pick one according to :mod:`helmgp._accel`.
"""
import math

import numpy as np

from ._accel import njit, use_numba


# --------------------------------------------------------------------------
# kernel-term assembly
# --------------------------------------------------------------------------

@njit(cache=True)
def _he(n, u):
    if n == 0:
        return 1.0
    if n == 1:
        return u
    u2 = u * u
    if n == 2:
        return u2 - 1.0
    if n == 3:
        return u * (u2 - 3.0)
    return u2 * (u2 - 6.0) + 3.0


@njit(cache=True)
def _assemble_nb(X, X2, rows, cols, coefs, pids, n1s, n2s, sig2, inv_ell, p, q):
    M = X.shape[0]
    N = X2.shape[0]
    P = sig2.shape[0]
    T = coefs.shape[0]
    out = np.zeros((p * M, q * N))
    g = np.empty(P)
    u1 = np.empty(P)
    u2 = np.empty(P)
    for m in range(M):
        for n in range(N):
            r1 = X[m, 0] - X2[n, 0]
            r2 = X[m, 1] - X2[n, 1]
            for k in range(P):
                a = r1 * inv_ell[k]
                b = r2 * inv_ell[k]
                u1[k] = a
                u2[k] = b
                g[k] = sig2[k] * math.exp(-0.5 * (a * a + b * b))
            for t in range(T):
                k = pids[t]
                out[rows[t] * M + m, cols[t] * N + n] += (
                    coefs[t] * g[k] * _he(n1s[t], u1[k]) * _he(n2s[t], u2[k]))
    return out


def _he_np(n, u):
    if n == 0:
        return 1.0
    if n == 1:
        return u
    u2 = u * u
    if n == 2:
        return u2 - 1.0
    if n == 3:
        return u * (u2 - 3.0)
    return u2 * (u2 - 6.0) + 3.0


def _term_blocks_np(R1, R2, plan):
    """Per-entry arrays (shape of ``R1``) for an arbitrary broadcast of differences."""
    rows, cols, coefs, pids, n1s, n2s, sig2, inv_ell, p, q = plan
    cache = {}
    blocks = [[np.zeros(R1.shape) for _ in range(q)] for _ in range(p)]
    for t in range(coefs.shape[0]):
        k = int(pids[t])
        if k not in cache:
            u1 = R1 * inv_ell[k]
            u2 = R2 * inv_ell[k]
            cache[k] = (u1, u2, sig2[k] * np.exp(-0.5 * (u1 * u1 + u2 * u2)))
        u1, u2, g = cache[k]
        blocks[rows[t]][cols[t]] += coefs[t] * g * _he_np(int(n1s[t]), u1) * _he_np(int(n2s[t]), u2)
    return blocks


def _assemble_np(X, X2, rows, cols, coefs, pids, n1s, n2s, sig2, inv_ell, p, q):
    R1 = X[:, 0][:, None] - X2[:, 0][None, :]
    R2 = X[:, 1][:, None] - X2[:, 1][None, :]
    blocks = _term_blocks_np(R1, R2, (rows, cols, coefs, pids, n1s, n2s, sig2, inv_ell, p, q))
    return np.block(blocks) if (p, q) != (1, 1) else blocks[0][0]


def assemble(X, X2, plan, backend=None):
    """Blocked ``(p*M, q*N)`` covariance for a compiled term ``plan``.

    Row block ``i`` holds output component ``i`` at every point of ``X``,
    column block ``j`` component ``j`` at every point of ``X2``.
    """
    X = np.ascontiguousarray(X, dtype=float).reshape(-1, 2)
    X2 = np.ascontiguousarray(X2, dtype=float).reshape(-1, 2)
    p, q = plan[8], plan[9]
    if plan[2].shape[0] == 0:
        return np.zeros((p * X.shape[0], q * X2.shape[0]))
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    fn = _assemble_nb if backend == "numba" else _assemble_np
    return fn(X, X2, *plan)


def pair_values(X, X2, plan):
    """Kernel values at matched pairs ``(X[m], X2[m])`` as a ``(p, q, M)`` array."""
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    X2 = np.asarray(X2, dtype=float).reshape(-1, 2)
    p, q = plan[8], plan[9]
    R1 = X[:, 0] - X2[:, 0]
    R2 = X[:, 1] - X2[:, 1]
    blocks = _term_blocks_np(R1, R2, plan)
    return np.array([[blocks[i][j] for j in range(q)] for i in range(p)]).reshape(p, q, -1)


# --------------------------------------------------------------------------
# buoy advection: fixed-step RK4 through a bilinearly interpolated grid field
# --------------------------------------------------------------------------

OUTSIDE = -1


@njit(cache=True)
def _bilinear_nb(x1g, x2g, U, V, px, py):
    nx = x1g.shape[0]
    ny = x2g.shape[0]
    dx = (x1g[nx - 1] - x1g[0]) / (nx - 1)
    dy = (x2g[ny - 1] - x2g[0]) / (ny - 1)
    fx = (px - x1g[0]) / dx
    fy = (py - x2g[0]) / dy
    i = int(math.floor(fx))
    j = int(math.floor(fy))
    if i < 0:
        i = 0
    if i > nx - 2:
        i = nx - 2
    if j < 0:
        j = 0
    if j > ny - 2:
        j = ny - 2
    tx = fx - i
    ty = fy - j
    w00 = (1 - tx) * (1 - ty)
    w10 = tx * (1 - ty)
    w01 = (1 - tx) * ty
    w11 = tx * ty
    u = w00 * U[j, i] + w10 * U[j, i + 1] + w01 * U[j + 1, i] + w11 * U[j + 1, i + 1]
    v = w00 * V[j, i] + w10 * V[j, i + 1] + w01 * V[j + 1, i] + w11 * V[j + 1, i + 1]
    return u, v


@njit(cache=True)
def _inside_nb(x1g, x2g, px, py, slack):
    return (x1g[0] - slack <= px <= x1g[-1] + slack) and (x2g[0] - slack <= py <= x2g[-1] + slack)


@njit(cache=True)
def _advect_nb(x1g, x2g, U, V, starts, n_obs, n_sub, h, slack):
    B = starts.shape[0]
    pos = np.empty((B, n_obs, 2))
    fail_buoy = -1
    fail_step = -1
    for b in range(B):
        px = starts[b, 0]
        py = starts[b, 1]
        step = 0
        for k in range(n_obs):
            for s in range(n_sub):
                k1u, k1v = _bilinear_nb(x1g, x2g, U, V, px, py)
                ax = px + 0.5 * h * k1u
                ay = py + 0.5 * h * k1v
                k2u, k2v = _bilinear_nb(x1g, x2g, U, V, ax, ay)
                ax = px + 0.5 * h * k2u
                ay = py + 0.5 * h * k2v
                k3u, k3v = _bilinear_nb(x1g, x2g, U, V, ax, ay)
                ax = px + h * k3u
                ay = py + h * k3v
                k4u, k4v = _bilinear_nb(x1g, x2g, U, V, ax, ay)
                px = px + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
                py = py + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
                step += 1
                if not _inside_nb(x1g, x2g, px, py, slack):
                    pos[b, k, 0] = px
                    pos[b, k, 1] = py
                    return pos, b, step
            pos[b, k, 0] = px
            pos[b, k, 1] = py
    return pos, fail_buoy, fail_step


def _bilinear_np(x1g, x2g, U, V, px, py):
    nx, ny = x1g.shape[0], x2g.shape[0]
    fx = (px - x1g[0]) / ((x1g[-1] - x1g[0]) / (nx - 1))
    fy = (py - x2g[0]) / ((x2g[-1] - x2g[0]) / (ny - 1))
    i = np.clip(np.floor(fx).astype(int), 0, nx - 2)
    j = np.clip(np.floor(fy).astype(int), 0, ny - 2)
    tx = fx - i
    ty = fy - j
    w00 = (1 - tx) * (1 - ty)
    w10 = tx * (1 - ty)
    w01 = (1 - tx) * ty
    w11 = tx * ty
    u = w00 * U[j, i] + w10 * U[j, i + 1] + w01 * U[j + 1, i] + w11 * U[j + 1, i + 1]
    v = w00 * V[j, i] + w10 * V[j, i + 1] + w01 * V[j + 1, i] + w11 * V[j + 1, i + 1]
    return u, v


def _advect_np(x1g, x2g, U, V, starts, n_obs, n_sub, h, slack):
    # all buoys advance together; the first one to leave the grid is reported
    px = starts[:, 0].copy()
    py = starts[:, 1].copy()
    B = starts.shape[0]
    pos = np.empty((B, n_obs, 2))
    step = 0
    for k in range(n_obs):
        for _ in range(n_sub):
            k1u, k1v = _bilinear_np(x1g, x2g, U, V, px, py)
            k2u, k2v = _bilinear_np(x1g, x2g, U, V, px + 0.5 * h * k1u, py + 0.5 * h * k1v)
            k3u, k3v = _bilinear_np(x1g, x2g, U, V, px + 0.5 * h * k2u, py + 0.5 * h * k2v)
            k4u, k4v = _bilinear_np(x1g, x2g, U, V, px + h * k3u, py + h * k3v)
            px = px + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
            py = py + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
            step += 1
            out = ((px < x1g[0] - slack) | (px > x1g[-1] + slack)
                   | (py < x2g[0] - slack) | (py > x2g[-1] + slack))
            if out.any():
                b = int(np.argmax(out))
                pos[b, k] = (px[b], py[b])
                return pos, b, step
        pos[:, k, 0] = px
        pos[:, k, 1] = py
    return pos, -1, -1


def advect(x1g, x2g, U, V, starts, n_obs, n_sub, h, slack, backend=None):
    """Integrate every start through ``n_obs`` intervals of ``n_sub`` RK4 steps.

    Returns ``(positions, failed_buoy, failed_step)``; ``failed_buoy`` is -1
    when every trajectory stayed on the grid.  When several buoys leave the
    grid the numba path reports the lowest-indexed one, the numpy path the
    earliest in time.
    """
    args = (np.ascontiguousarray(x1g, dtype=float), np.ascontiguousarray(x2g, dtype=float),
            np.ascontiguousarray(U, dtype=float), np.ascontiguousarray(V, dtype=float),
            np.ascontiguousarray(starts, dtype=float).reshape(-1, 2),
            int(n_obs), int(n_sub), float(h), float(slack))
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    fn = _advect_nb if backend == "numba" else _advect_np
    pos, b, step = fn(*args)
    return pos, int(b), int(step)


def bilinear(x1g, x2g, U, V, pts):
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    u, v = _bilinear_np(np.asarray(x1g, float), np.asarray(x2g, float),
                        np.asarray(U, float), np.asarray(V, float), pts[:, 0], pts[:, 1])
    return np.column_stack([u, v])
