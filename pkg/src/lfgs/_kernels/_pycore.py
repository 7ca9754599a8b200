"""Pure NumPy implementation of the hot kernels.

Mirrors ``_core.pyx`` function for function; used when the compiled
extension is unavailable or ``LFGS_PURE_PYTHON`` is set.
"""

import math

import numpy as np

OK = 0
MAX_ITER = 1
STAGNATION = 2
NONFINITE = 3

_TAYLOR_DEGREE = 16
_SCALE_THETA = 0.5
_MAX_HALVINGS = 20


def _scaling(norm1):
    if norm1 <= _SCALE_THETA:
        return 0
    return int(math.ceil(math.log2(norm1 / _SCALE_THETA)))


def expm(a):
    """Matrix exponential by scaling and squaring around a Taylor core."""
    a = np.asarray(a, dtype=float)
    k = a.shape[0]
    if k == 0:
        return np.zeros((0, 0))
    s = _scaling(np.abs(a).sum(axis=0).max())
    b = a / (2.0 ** s)
    eye = np.eye(k)
    out = eye + b / _TAYLOR_DEGREE
    for j in range(_TAYLOR_DEGREE - 1, 0, -1):
        out = eye + (b @ out) / j
    for _ in range(s):
        out = out @ out
    return out


def expm_batch(a):
    """Exponentials of a stack of square matrices with a shared scaling."""
    a = np.asarray(a, dtype=float)
    k = a.shape[-1]
    if k == 0:
        return np.zeros(a.shape)
    s = _scaling(np.abs(a).sum(axis=-2).max())
    b = a / (2.0 ** s)
    eye = np.eye(k)
    out = eye + b / _TAYLOR_DEGREE
    for j in range(_TAYLOR_DEGREE - 1, 0, -1):
        out = eye + np.matmul(b, out) / j
    for _ in range(s):
        out = np.matmul(out, out)
    return out


def polar(z):
    """Orthogonal polar factor z (z^T z)^{-1/2} via the Gram eigendecomposition."""
    w, v = np.linalg.eigh(z.T @ z)
    return z @ ((v / np.sqrt(w)) @ v.T)


def reduce_pair(x, y):
    """Basis of the complement directions a geodesic from x to y can use.

    Returns ``(basis, target)`` with ``y = [x basis] @ target``.
    """
    n, p = x.shape
    r = min(p, n - p)
    m = x.T @ y
    if r == 0:
        return np.zeros((n, 0)), m
    q, _ = np.linalg.qr(np.hstack([x, y - x @ m]))
    basis = np.ascontiguousarray(q[:, p:p + r])
    return basis, np.vstack([m, basis.T @ y])


def _generator(u, p, r):
    s = p + r
    v = np.zeros((s, s))
    iu = np.triu_indices(p, 1)
    nw = len(iu[0])
    om = np.zeros((p, p))
    om[iu] = u[:nw]
    om -= om.T
    b = u[nw:].reshape(r, p)
    v[:p, :p] = om
    v[p:, :p] = b
    v[:p, p:] = -b.T
    return v


def _generators(u, p, r, fd_step):
    nu = u.size
    us = np.repeat(u[None, :], nu + 1, axis=0)
    us[1:] += fd_step * np.eye(nu)
    return np.stack([_generator(w, p, r) for w in us])


def split_unknowns(u, p, r):
    """Unpack the unknown vector into (omega, b)."""
    v = _generator(u, p, r)
    return v[:p, :p].copy(), v[p:, :p].copy()


def shoot(x, y, tol, max_iter, fd_step):
    """Single shooting for the canonical-metric logarithm.

    Gauss-Newton on ``expm(V)[:, :p] = target`` in the reduced frame
    ``[x basis]`` with a forward-difference Jacobian and step halving.
    Returns ``(omega, b, basis, residual, iterations, status)`` where the
    tangent vector is ``x @ omega + basis @ b``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = x.shape
    r = min(p, n - p)
    basis, target = reduce_pair(x, y)

    a = target[:p]
    iu = np.triu_indices(p, 1)
    u = np.concatenate([(0.5 * (a - a.T))[iu], target[p:].ravel()])

    def residual(w):
        return expm(_generator(w, p, r))[:, :p] - target

    f = residual(u)
    res = float(np.linalg.norm(f))
    it = 0
    status = OK
    while res > tol:
        if it >= max_iter:
            status = MAX_ITER
            break
        if not np.isfinite(res):
            status = NONFINITE
            break
        it += 1
        e = expm_batch(_generators(u, p, r, fd_step))[:, :, :p]
        jac = ((e[1:] - e[0]) / fd_step).reshape(u.size, -1).T
        step = np.linalg.lstsq(jac, -f.ravel(), rcond=None)[0]
        alpha = 1.0
        for _ in range(_MAX_HALVINGS + 1):
            trial = u + alpha * step
            ft = residual(trial)
            rt = float(np.linalg.norm(ft))
            if rt < res:
                break
            alpha *= 0.5
        else:
            status = STAGNATION
            break
        u, f, res = trial, ft, rt

    omega, b = split_unknowns(u, p, r)
    return omega, b, basis, res, it, status


def canonical_norm(omega, b):
    return math.sqrt(0.5 * float(np.sum(omega * omega)) + float(np.sum(b * b)))


def geodesic_point(x, basis, omega, b, t):
    p = x.shape[1]
    r = basis.shape[1]
    s = p + r
    v = np.zeros((s, s))
    v[:p, :p] = omega
    v[p:, :p] = b
    v[:p, p:] = -b.T
    g = expm(t * v)[:, :p]
    return x @ g[:p] + basis @ g[p:]


def midpoint(x, y, tol, max_iter, fd_step):
    """Geodesic midpoint of x and y.

    Returns ``(mid, norm, residual, iterations, status)``; ``norm`` is the
    canonical length of the full connecting geodesic.
    """
    omega, b, basis, res, it, status = shoot(x, y, tol, max_iter, fd_step)
    mid = polar(geodesic_point(x, basis, omega, b, 0.5))
    return mid, canonical_norm(omega, b), res, it, status
