"""Dense linear-algebra primitives.

Every function is a pure function of its arguments. Matrices are NumPy
float64 arrays; ``vec`` stacks columns (Fortran order).
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NotConverged, RankDeficient

RANK_TOL = 1e-8
SYMMETRY_TOL = 1e-10


def _as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def vec(a):
    """Column-stacking vectorization."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v, rows, cols):
    return np.asarray(v).reshape((rows, cols), order="F")


def matrix_exp(a):
    """Matrix exponential by scaling and squaring of a degree-16 Taylor core."""
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix_exp needs a square matrix, got {a.shape}")
    return _kernels.expm(np.ascontiguousarray(a))


def singular_values(z):
    return np.linalg.svd(z, compute_uv=False)


def polar_orthogonal(z, rank_tol=RANK_TOL):
    """Orthogonal polar factor ``Z (Z^T Z)^{-1/2}`` via the thin SVD.

    Raises RankDeficient when the smallest singular value is at most
    ``rank_tol`` times the largest.
    """
    z = _as_matrix(z)
    if z.shape[1] > z.shape[0]:
        raise ValueError(f"polar factor needs rows >= cols, got {z.shape}")
    u, s, vt = np.linalg.svd(z, full_matrices=False)
    limit = rank_tol * s[0]
    if s[0] == 0.0 or s[-1] <= limit:
        raise RankDeficient(float(s[-1]), float(limit))
    return u @ vt


def orth_complement(x):
    """Orthonormal basis of the orthogonal complement of ``range(x)``.

    Householder QR of ``[x | I_n]``; each column is then flipped so that its
    first entry of magnitude above 1e-12 is positive. The result is a pure
    function of ``x``.
    """
    x = _as_matrix(x)
    n, p = x.shape
    if p > n:
        raise ValueError(f"need p <= n, got {x.shape}")
    q, _ = np.linalg.qr(np.hstack([x, np.eye(n)]), mode="complete")
    comp = q[:, p:n].copy()
    for j in range(comp.shape[1]):
        col = comp[:, j]
        lead = np.flatnonzero(np.abs(col) > 1e-12)
        if lead.size and col[lead[0]] < 0:
            comp[:, j] = -col
    return comp


def vec_perm(a, b):
    """Vec-permutation matrix ``Pi_{a,b}``.

    ``vec(Z) = Pi_{a,b} @ vec(Z.T)`` for every a-by-b matrix ``Z``; hence
    ``Pi_{p,n} @ vec(X) = vec(X.T)`` for an n-by-p ``X``.
    """
    if a < 1 or b < 1:
        raise ValueError("vec_perm dimensions must be positive")
    i, j = np.meshgrid(np.arange(a), np.arange(b), indexing="ij")
    out = np.zeros((a * b, a * b))
    out[(i + j * a).ravel(), (j + i * b).ravel()] = 1.0
    return out


@dataclass(frozen=True)
class SymEigResult:
    values: np.ndarray
    vectors: np.ndarray


def sym_eig(s):
    """Ascending eigen-decomposition of a symmetric matrix."""
    s = _as_matrix(s)
    if s.shape[0] != s.shape[1]:
        raise ValueError(f"sym_eig needs a square matrix, got {s.shape}")
    scale = np.linalg.norm(s)
    if np.linalg.norm(s - s.T) > SYMMETRY_TOL * max(scale, 1.0):
        raise ValueError("sym_eig input is not symmetric")
    try:
        w, v = np.linalg.eigh(0.5 * (s + s.T))
    except np.linalg.LinAlgError as exc:
        raise NotConverged(f"symmetric eigensolver failed: {exc}") from exc
    return SymEigResult(w, v)


def spectral_norm(a):
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


# text I/O ---------------------------------------------------------------

def format_matrix(a):
    a = np.asarray(a, dtype=float)
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    for row in a:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def _parse_matrix(lines, pos):
    header = lines[pos].split()
    if len(header) != 2:
        raise ValueError(f"bad matrix header on line {pos + 1}: {lines[pos]!r}")
    rows, cols = int(header[0]), int(header[1])
    data = []
    for k in range(rows):
        vals = [float(t) for t in lines[pos + 1 + k].split()]
        if len(vals) != cols:
            raise ValueError(f"line {pos + 2 + k}: expected {cols} values, got {len(vals)}")
        data.append(vals)
    return np.array(data, dtype=float).reshape(rows, cols), pos + 1 + rows


def parse_matrix(text):
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    mat, end = _parse_matrix(lines, 0)
    if end != len(lines):
        raise ValueError("trailing data after matrix")
    return mat


def write_matrix(path, a):
    with open(path, "w") as fh:
        fh.write(format_matrix(a))


def read_matrix(path):
    with open(path) as fh:
        return parse_matrix(fh.read())
