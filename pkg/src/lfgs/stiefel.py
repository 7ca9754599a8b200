"""Points, tangent vectors and geodesics of St(n, p) under the canonical metric."""

import math

import numpy as np

from .errors import NotOnManifold
from .linalg import _as_matrix, matrix_exp, orth_complement, polar_orthogonal, read_matrix, write_matrix

MANIFOLD_TOL = 1e-10
SKEW_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def orthonormality_defect(mat):
    p = mat.shape[1]
    return float(np.linalg.norm(mat.T @ mat - np.eye(p)))


class StiefelPoint:
    """An n-by-p matrix with orthonormal columns.

    The orthogonal complement is computed on first use and cached, so
    every tangent vector built at this point shares the same basis.
    """

    __slots__ = ("mat", "_complement")

    def __init__(self, mat, tol=MANIFOLD_TOL):
        mat = _as_matrix(mat, "point")
        if mat.shape[1] > mat.shape[0]:
            raise ValueError(f"need p <= n, got shape {mat.shape}")
        defect = orthonormality_defect(mat)
        if defect > tol:
            raise NotOnManifold(defect, tol)
        self.mat = _frozen(mat)
        self._complement = None

    @property
    def n(self):
        return self.mat.shape[0]

    @property
    def p(self):
        return self.mat.shape[1]

    @property
    def shape(self):
        return self.mat.shape

    @property
    def complement(self):
        if self._complement is None:
            self._complement = _frozen(orth_complement(self.mat))
        return self._complement

    def __array__(self, dtype=None, copy=None):
        return self.mat if dtype is None else self.mat.astype(dtype)

    def __repr__(self):
        return f"StiefelPoint(n={self.n}, p={self.p})"


def make_point(mat, tol=MANIFOLD_TOL):
    """Validate ``mat`` against the manifold tolerance and wrap it."""
    return mat if isinstance(mat, StiefelPoint) else StiefelPoint(mat, tol)


def _coerce(x):
    return x if isinstance(x, StiefelPoint) else StiefelPoint(x)


class TangentVector:
    """Tangent vector ``xi = X Omega + X_perp K`` at a base point."""

    __slots__ = ("base", "omega", "k", "complement", "ambient")

    def __init__(self, base, omega, k, complement):
        self.base = base
        self.omega = _frozen(omega)
        self.k = _frozen(k)
        self.complement = _frozen(complement)
        self.ambient = _frozen(base.mat @ self.omega + self.complement @ self.k)

    @property
    def norm(self):
        """Canonical norm ``sqrt(|Omega|^2 / 2 + |K|^2)``."""
        return math.sqrt(0.5 * float(np.sum(self.omega ** 2)) + float(np.sum(self.k ** 2)))

    def scaled(self, c):
        return TangentVector(self.base, c * self.omega, c * self.k, self.complement)

    def __repr__(self):
        return f"TangentVector(n={self.base.n}, p={self.base.p}, norm={self.norm:.6g})"


def tangent_from_blocks(base, omega, k, complement=None):
    """Assemble a tangent vector from its (Omega, K) blocks."""
    base = _coerce(base)
    n, p = base.shape
    omega = np.asarray(omega, dtype=float).reshape(p, p)
    k = np.asarray(k, dtype=float).reshape(n - p, p)
    scale = max(1.0, float(np.linalg.norm(omega)))
    if np.linalg.norm(omega + omega.T) > SKEW_TOL * scale:
        raise ValueError("omega is not skew-symmetric")
    omega = 0.5 * (omega - omega.T)
    if complement is None:
        complement = base.complement
    return TangentVector(base, omega, k, complement)


def tangent_from_ambient(base, xi, complement=None):
    """Tangent vector from its ambient n-by-p form.

    The skew part of ``base^T xi`` becomes Omega; the complement block is
    read off directly, so a non-tangent ``xi`` is projected.
    """
    base = _coerce(base)
    xi = _as_matrix(xi, "tangent")
    if complement is None:
        complement = base.complement
    a = base.mat.T @ xi
    return TangentVector(base, 0.5 * (a - a.T), complement.T @ xi, complement)


def canonical_inner(base, xi, eta):
    """Canonical metric ``tr(xi^T (I - X X^T / 2) eta)``."""
    base = _coerce(base)
    for v in (xi, eta):
        if v.base is not base and not np.array_equal(v.base.mat, base.mat):
            raise ValueError("tangent vectors live at a different base point")
    x = base.mat
    a, b = xi.ambient, eta.ambient
    return float(np.sum(a * b) - 0.5 * np.sum((x.T @ a) * (x.T @ b)))


def canonical_norm(xi):
    return xi.norm


def exp_map(base, xi, t=1.0):
    """Point ``Y(t) = [X X_perp] expm(t [[Omega, -K^T], [K, 0]]) [I_p; 0]``.

    Uses the complement stored in ``xi`` and finishes with one polar
    projection to stop drift.
    """
    base = _coerce(base)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    n, p = base.shape
    if t == 0.0:
        return base
    v = np.zeros((n, n))
    v[:p, :p] = xi.omega
    v[p:, :p] = xi.k
    v[:p, p:] = -xi.k.T
    g = matrix_exp(t * v)[:, :p]
    y = base.mat @ g[:p] + xi.complement @ g[p:]
    return StiefelPoint(polar_orthogonal(y))


def _rng(seed, stream):
    key = tuple(stream) if isinstance(stream, (tuple, list)) else (stream,)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def random_point(n, p, seed, stream=0):
    """Polar factor of a standard Gaussian n-by-p draw."""
    rng = _rng(seed, stream)
    return StiefelPoint(polar_orthogonal(rng.standard_normal((n, p))))


def random_tangent(base, norm_target, seed, stream=0):
    """Gaussian (Omega, K) draw rescaled to the requested canonical norm.

    Omega takes its strictly upper triangle from standard normals.
    """
    if norm_target < 0:
        raise ValueError("norm_target must be nonnegative")
    base = _coerce(base)
    n, p = base.shape
    rng = _rng(seed, stream)
    a = np.triu(rng.standard_normal((p, p)), 1)
    omega = a - a.T
    k = rng.standard_normal((n - p, p))
    c = math.sqrt(0.5 * float(np.sum(omega ** 2)) + float(np.sum(k ** 2)))
    if c == 0.0:
        return tangent_from_blocks(base, omega, k)
    s = norm_target / c
    return tangent_from_blocks(base, s * omega, s * k)


def save_point(path, x):
    write_matrix(path, _coerce(x).mat)


def load_point(path):
    return StiefelPoint(read_matrix(path))
