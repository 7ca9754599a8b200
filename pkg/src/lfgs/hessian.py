"""Extended distance, its derivatives, and the block Hessian of the leapfrog objective.

Vectorization is column-major. ``hessian_L_exact(x, y)`` is the mixed
derivative with rows indexed by the entries of ``y`` and columns by those
of ``x``. In the assembled matrix the block below the diagonal at
(interior i+1, interior i) is ``hessian_L_exact(X_i, X_{i+1})``.
"""

import math
from dataclasses import astuple, dataclass, fields
from functools import lru_cache

import numpy as np

from .errors import RankDeficient, SingularDiagonal
from .geodesics import GAP_GUARD, riemannian_distance
from .linalg import RANK_TOL, _as_matrix, orth_complement, polar_orthogonal, vec_perm
from .stiefel import StiefelPoint, _coerce

E_BOUND_LINEAR = 43.0
E_BOUND_QUADRATIC = 90.0


@dataclass(frozen=True)
class ExtendedDistanceValue:
    """Value of the extended squared distance, or the tagged infinite case."""

    finite: bool
    value: float = None
    px: np.ndarray = None
    py: np.ndarray = None

    @classmethod
    def infinite(cls):
        return cls(False)

    def __float__(self):
        if not self.finite:
            raise ValueError("extended distance is infinite (rank-deficient input)")
        return float(self.value)


def _matrix(a):
    if isinstance(a, StiefelPoint):
        return a.mat
    return _as_matrix(a)


def _polar_or_none(z):
    try:
        return polar_orthogonal(z)
    except RankDeficient:
        return None


def ext_dist_sq(xt, yt, gap_guard=GAP_GUARD, **shoot_kwargs):
    """``d^2(P xt, P yt) + |xt - P xt|^2 + |yt - P yt|^2`` or the infinite tag."""
    xt, yt = _matrix(xt), _matrix(yt)
    px, py = _polar_or_none(xt), _polar_or_none(yt)
    if px is None or py is None:
        return ExtendedDistanceValue.infinite()
    d = riemannian_distance(StiefelPoint(px), StiefelPoint(py), gap_guard=gap_guard, **shoot_kwargs)
    value = d * d + float(np.sum((xt - px) ** 2)) + float(np.sum((yt - py) ** 2))
    return ExtendedDistanceValue(True, value, px, py)


def ext_dist_sq_expansion(xt, yt):
    """Extended distance with the squared distance replaced by its quartic-accurate expansion."""
    xt, yt = _matrix(xt), _matrix(yt)
    px, py = polar_orthogonal(xt), polar_orthogonal(yt)
    p = xt.shape[1]
    return (float(np.sum((px - py) ** 2))
            - 0.5 * float(np.sum((np.eye(p) - px.T @ py) ** 2))
            + float(np.sum((xt - px) ** 2)) + float(np.sum((yt - py) ** 2)))


def _grad(x, y):
    n = x.shape[0]
    return (-(np.eye(n) - 0.5 * x @ x.T) @ y + 0.5 * x @ y.T @ x
            - (np.eye(n) - x @ x.T) @ y @ y.T @ x)


def grad_ext_dist_sq_X(x, yt):
    """Gradient in the first argument at an on-manifold ``x``."""
    return _grad(_coerce(x).mat, polar_orthogonal(_matrix(yt)))


def grad_ext_dist_sq_Y(xt, y):
    """Gradient in the second argument at an on-manifold ``y``."""
    return _grad(_coerce(y).mat, polar_orthogonal(_matrix(xt)))


@lru_cache(maxsize=64)
def _pi(p, n):
    out = vec_perm(p, n)
    out.setflags(write=False)
    return out


def _sym(a):
    return 0.5 * (a + a.T)


def hessian_D_exact(x, y):
    """Hessian in the first argument of the truncated extended distance, both points on-manifold."""
    x, y = _coerce(x).mat, _coerce(y).mat
    n, p = x.shape
    pi = _pi(p, n)
    ip, i_n, k = np.eye(p), np.eye(n), np.kron
    xx, yy = x @ x.T, y @ y.T
    ytx = y.T @ x
    xtyyt = x.T @ yy
    t1 = _sym(k(ytx, i_n) + k(y.T, x) @ pi + k(ip, y @ x.T))
    t2 = -0.75 * _sym(k(y.T @ xx, x) @ pi + k(x.T, x @ y.T @ x) @ pi
                      + k(ip, xx @ y @ x.T) + k(ytx, xx))
    t3 = 2.0 * _sym(k(xtyyt, x) @ pi + k(ip, xx @ yy) - k(xtyyt @ xx, x) @ pi)
    c = xtyyt @ x
    t4 = k(x.T, x) @ pi + k(ip, xx) - k(ip, yy) + k(c, i_n)
    t5 = -k(ip, xx @ yy @ xx) - k(c, xx)
    return t1 + t2 + t3 + t4 + t5


def hessian_L_exact(x, y):
    """Mixed second derivative of the truncated extended distance.

    Rows follow ``vec`` of the second argument, columns the first.
    """
    x, y = _coerce(x).mat, _coerce(y).mat
    n, p = x.shape
    pi = _pi(p, n)
    ip, i_n, k = np.eye(p), np.eye(n), np.kron
    xx, yy = x @ x.T, y @ y.T
    ytx = y.T @ x
    ytxx = y.T @ xx
    return (-np.eye(n * p) + 0.5 * k(ip, yy) - 0.25 * k(ip, yy @ xx) - 0.25 * k(x.T, yy @ x) @ pi
            + 0.5 * k(ip, xx) + 0.5 * k(x.T, x) @ pi + 0.5 * k(y.T, y) @ pi - 0.25 * k(ytxx, y) @ pi
            - 0.25 * k(ytx, y @ x.T) + k(y.T, yy @ x) @ pi - k(ytxx, yy @ x) @ pi
            - k(ytx, yy @ xx) + k(ytx, yy) - k(y.T, x) @ pi + k(ytxx, x) @ pi
            + k(ytx, xx) - k(ytx, i_n))


def s_matrix(x):
    """``(x^T kron x) Pi_{p,n}``; symmetric with square ``I_p kron x x^T``."""
    x = _coerce(x).mat
    n, p = x.shape
    return np.kron(x.T, x) @ _pi(p, n)


def hessian_D_leading(x):
    x = _coerce(x).mat
    n, p = x.shape
    return 2.0 * np.eye(n * p) + 0.5 * s_matrix(x) - 0.5 * np.kron(np.eye(p), x @ x.T)


def hessian_L_leading(x):
    x = _coerce(x).mat
    n, p = x.shape
    return -2.0 * np.eye(n * p) + 0.5 * s_matrix(x) + 1.5 * np.kron(np.eye(p), x @ x.T)


def perturbation_bounds(delta):
    """Bounds on the D and L deviations for a chordal gap ``delta``."""
    return 14.0 * delta + 10.0 * delta ** 2, 5.5 * delta + 10.0 * delta ** 2 + 4.0 * delta ** 3


def mixed_base_bound(delta):
    return 7.5 * delta + 15.5 * delta ** 2 + 14.0 * delta ** 3 + 4.0 * delta ** 4


def hessian_perturbation_norms(x, y, check=False):
    """Spectral norms of ``D(x, y) - D(x, x)`` and ``L(x, y) - L(x, x)``.

    With ``check`` set, raises AssertionError when either exceeds
    ``perturbation_bounds(|x - y|_2)``.
    """
    x, y = _coerce(x), _coerce(y)
    nd = float(np.linalg.norm(hessian_D_exact(x, y) - hessian_D_exact(x, x), 2))
    nl = float(np.linalg.norm(hessian_L_exact(x, y) - hessian_L_exact(x, x), 2))
    if check:
        bd, bl = perturbation_bounds(float(np.linalg.norm(x.mat - y.mat, 2)))
        if nd > bd or nl > bl:
            raise AssertionError(f"perturbation norms ({nd:.4g}, {nl:.4g}) exceed bounds ({bd:.4g}, {bl:.4g})")
    return nd, nl


# diagonalization ----------------------------------------------------------

def _skew_count(p):
    return p * (p - 1) // 2


def build_hat_Q(n, p):
    """Orthogonal matrix diagonalizing ``diag(Pi_{p,p}, 0)``.

    Column order: normalized skew elementary matrices for pairs i < j, the
    (n-p)p complement coordinates, then normalized symmetric elementary
    matrices for pairs i < j followed by the diagonal ones. The eigenvalues
    in this order are -1, 0 and +1.
    """
    if not 1 <= p <= n:
        raise ValueError("need 1 <= p <= n")
    size = n * p
    q = np.zeros((size, size))
    r2 = 1.0 / math.sqrt(2.0)
    col = 0
    for i in range(p):
        for j in range(i + 1, p):
            q[i + j * p, col] = r2
            q[j + i * p, col] = -r2
            col += 1
    for t in range((n - p) * p):
        q[p * p + t, col] = 1.0
        col += 1
    for i in range(p):
        for j in range(i + 1, p):
            q[i + j * p, col] = r2
            q[j + i * p, col] = r2
            col += 1
    for i in range(p):
        q[i + i * p, col] = 1.0
        col += 1
    return q


def hat_Lambda(n, p):
    s = _skew_count(p)
    return np.concatenate([-np.ones(s), np.zeros((n - p) * p), np.ones(p * p - s)])


def diag_D(n, p):
    s = _skew_count(p)
    return np.concatenate([np.ones(s), 2.0 * np.ones(n * p - s)])


def diag_L(n, p):
    s = _skew_count(p)
    return np.concatenate([-np.ones(s), -2.0 * np.ones((n - p) * p), np.zeros(p * p - s)])


def build_Q_i(x, complement=None):
    """``[I_p kron X, I_p kron X_perp] @ hat_Q``."""
    x = _coerce(x)
    n, p = x.shape
    c = x.complement if complement is None else np.asarray(complement, dtype=float)
    qbar = np.hstack([np.kron(np.eye(p), x.mat), np.kron(np.eye(p), c)])
    return qbar @ build_hat_Q(n, p)


def transport_complement(c, y):
    """Complement of ``range(y)`` closest to the columns of ``c``."""
    y = _coerce(y).mat
    return polar_orthogonal(c - y @ (y.T @ c))


def _complements(points, mode):
    if mode == "independent":
        return [orth_complement(q.mat) for q in points]
    if mode != "transport":
        raise ValueError(f"unknown complement mode {mode!r}")
    out = [orth_complement(points[0].mat)]
    for q in points[1:]:
        out.append(transport_complement(out[-1], q))
    return out


# assembly ------------------------------------------------------------------

@dataclass
class HessianBlocks:
    """Block-tridiagonal Hessian of the leapfrog objective in the interior points.

    ``diag_blocks[i]`` belongs to interior point i+1; ``off_blocks[i]`` sits
    below the diagonal, coupling interior points i+2 (rows) and i+1
    (columns).
    """

    m: int
    n: int
    p: int
    diag_blocks: list
    off_blocks: list

    @property
    def block_size(self):
        return self.n * self.p

    def dense(self):
        b, k = self.block_size, len(self.diag_blocks)
        g = np.zeros((k * b, k * b))
        for i, d in enumerate(self.diag_blocks):
            g[i * b:(i + 1) * b, i * b:(i + 1) * b] = d
        for i, low in enumerate(self.off_blocks):
            g[(i + 1) * b:(i + 2) * b, i * b:(i + 1) * b] = low
            g[i * b:(i + 1) * b, (i + 1) * b:(i + 2) * b] = low.T
        return g


def assemble_Gprime(path):
    pts = path.points
    m = len(pts)
    if m < 3:
        raise ValueError("need at least one interior point")
    diag = [hessian_D_exact(pts[i], pts[i - 1]) + hessian_D_exact(pts[i], pts[i + 1])
            for i in range(1, m - 1)]
    off = [hessian_L_exact(pts[i], pts[i + 1]) for i in range(1, m - 2)]
    return HessianBlocks(m, path.n, path.p, diag, off)


def toeplitz_M(k):
    return np.eye(k, k=1) + np.eye(k, k=-1)


def assemble_A(m, n, p):
    """``2 I kron D + M kron L`` with the diagonal D and L above."""
    k = m - 2
    return 2.0 * np.kron(np.eye(k), np.diag(diag_D(n, p))) + np.kron(toeplitz_M(k), np.diag(diag_L(n, p)))


def lambda_spectrum_A(m, n, p):
    """All eigenvalues ``2 d_j + mu_k l_j`` of the model matrix, ascending."""
    if m < 3:
        raise ValueError("m must be at least 3")
    mu = -2.0 * np.cos(np.arange(1, m - 1) * math.pi / (m - 1))
    d, ell = diag_D(n, p), diag_L(n, p)
    return np.sort((2.0 * d[:, None] + ell[:, None] * mu[None, :]).ravel())


def lambda_min_A(m, p=2):
    """Smallest eigenvalue of the model matrix; p = 1 has no skew block."""
    c = math.cos(math.pi / (m - 1))
    return 2.0 - 2.0 * c if p >= 2 else 4.0 - 4.0 * c


def delta_threshold(m):
    """Largest gap for which the perturbation bound keeps the Hessian positive definite."""
    if m < 3:
        raise ValueError("m must be at least 3")
    return (math.sqrt(2569.0 - 720.0 * math.cos(math.pi / (m - 1))) - 43.0) / 180.0


def e_norm_bound(delta):
    return E_BOUND_LINEAR * delta + E_BOUND_QUADRATIC * delta ** 2


def _dense_and_block(g):
    if isinstance(g, HessianBlocks):
        return g.dense(), g.block_size
    g, b = g
    return np.asarray(g, dtype=float), int(b)


def bgs_iteration_matrix(g):
    """``(D - L)^{-1} U`` for the splitting ``G = D - L - U`` into block parts."""
    dense, b = _dense_and_block(g)
    nb = dense.shape[0] // b
    lower = np.zeros_like(dense)
    for i in range(nb):
        blk = dense[i * b:(i + 1) * b, i * b:(i + 1) * b]
        if np.linalg.cond(blk) > 1e12:
            raise SingularDiagonal(f"diagonal block {i} is numerically singular")
        lower[i * b:, i * b:(i + 1) * b] = dense[i * b:, i * b:(i + 1) * b]
    upper = dense - lower
    return -np.linalg.solve(lower, upper)


def bgs_spectral_radius(g):
    """Spectral radius of the block Gauss-Seidel iteration matrix.

    Accepts HessianBlocks or a ``(matrix, block_size)`` pair.
    """
    mbgs = bgs_iteration_matrix(g)
    if not np.any(mbgs):
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(mbgs))))


# spectral split --------------------------------------------------------------

@dataclass
class SpectralReport:
    m: int
    n: int
    p: int
    delta: float
    lambda_min_A: float
    lambda_min_Gprime: float
    norm_E_actual: float
    norm_E_bound: float
    rho_bgs: float
    vmin_E_vmin: float
    threshold_delta: float

    CSV_COLUMNS = ("m", "n", "p", "delta", "lambda_min_A", "lambda_min_Gprime", "normE",
                   "boundE", "rho_bgs", "vEv", "threshold")

    def row(self):
        return astuple(self)


def min_eigenspace_A(m, n, p):
    """Orthonormal basis of the eigenspace of the smallest eigenvalue of the model matrix.

    Columns are ``u kron e_j`` with ``u_i = sin(i pi / (m - 1))`` normalized
    and j running over the diagonal entries attaining the minimum.
    """
    k = m - 2
    u = np.sin(np.arange(1, k + 1) * math.pi / (m - 1))
    u /= np.linalg.norm(u)
    c = 2.0 * math.cos(math.pi / (m - 1))
    lam = 2.0 * diag_D(n, p) + c * diag_L(n, p)
    idx = np.flatnonzero(lam <= lam.min() + 1e-12)
    eye = np.eye(n * p)
    return np.column_stack([np.kron(u, eye[:, j]) for j in idx])


def split_A_E(path, complements="transport", compute_rho=True):
    """Rotate the assembled Hessian by block-diagonal Q_i and split off the model part.

    ``complements`` chooses the X_perp used in each Q_i: ``transport`` starts
    from ``orth_complement(X_1)`` and carries it along the path by
    projection and polar factor, ``independent`` calls ``orth_complement``
    at every point. Returns ``(A, E, SpectralReport)``.

    ``vmin_E_vmin`` is the smallest eigenvalue of ``V^T E V`` with V spanning
    the minimal eigenspace of A, which is the first-order shift of
    ``lambda_min`` also when that eigenvalue is repeated (p > 2).
    """
    m, n, p = path.m, path.n, path.p
    blocks = assemble_Gprime(path)
    g = blocks.dense()
    inner = list(path.points[1:-1])
    comps = _complements(inner, complements)
    b = n * p
    qq = np.zeros_like(g)
    for i, (pt, c) in enumerate(zip(inner, comps)):
        qq[i * b:(i + 1) * b, i * b:(i + 1) * b] = build_Q_i(pt, c)
    rotated = qq.T @ g @ qq
    a = assemble_A(m, n, p)
    e = _sym(rotated - a)
    delta = float(path.gaps().max())
    v = min_eigenspace_A(m, n, p)
    report = SpectralReport(
        m=m, n=n, p=p, delta=delta,
        lambda_min_A=float(np.linalg.eigvalsh(a)[0]),
        lambda_min_Gprime=float(np.linalg.eigvalsh(_sym(g))[0]),
        norm_E_actual=float(np.max(np.abs(np.linalg.eigvalsh(e)))),
        norm_E_bound=e_norm_bound(delta),
        rho_bgs=bgs_spectral_radius(blocks) if compute_rho else math.nan,
        vmin_E_vmin=float(np.linalg.eigvalsh(_sym(v.T @ e @ v))[0]),
        threshold_delta=delta_threshold(m),
    )
    return a, e, report


def gershgorin_radii(e, block_size):
    """Block Gershgorin radii ``|E_{i-1,i}|_2 + |E_{i,i+1}|_2`` and diagonal-block eigenvalues."""
    b = block_size
    nb = e.shape[0] // b
    radii, eigs = [], []
    for i in range(nb):
        r = 0.0
        if i > 0:
            r += np.linalg.norm(e[i * b:(i + 1) * b, (i - 1) * b:i * b], 2)
        if i < nb - 1:
            r += np.linalg.norm(e[i * b:(i + 1) * b, (i + 1) * b:(i + 2) * b], 2)
        radii.append(float(r))
        eigs.append(np.linalg.eigvalsh(_sym(e[i * b:(i + 1) * b, i * b:(i + 1) * b])))
    return radii, eigs


def report_field_names():
    return [f.name for f in fields(SpectralReport)]
