"""Fast invariant checks behind ``lfgs selftest``."""

import math

import numpy as np

from . import _kernels
from .geodesics import geodesic_midpoint, initialize_path, leapfrog_run, log_map_shooting, riemannian_distance
from .hessian import build_Q_i, diag_D, diag_L, hessian_D_exact, hessian_L_exact, lambda_min_A, assemble_A
from .linalg import matrix_exp, polar_orthogonal, vec, vec_perm
from .stiefel import canonical_inner, exp_map, random_point, random_tangent


def _expm_orthogonal():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((7, 7))
    q = matrix_exp(3.0 * (a - a.T))
    return float(np.abs(q.T @ q - np.eye(7)).max()), 1e-12


def _vec_perm():
    x = np.random.default_rng(2).standard_normal((4, 3))
    return float(np.abs(vec(x) - vec_perm(4, 3) @ vec(x.T)).max()), 0.0


def _polar_idempotent():
    z = np.random.default_rng(3).standard_normal((6, 2))
    u = polar_orthogonal(z)
    return float(np.abs(polar_orthogonal(u) - u).max()), 1e-13


def _metric_identity():
    worst = 0.0
    for s in range(20):
        x = random_point(12, 3, s)
        xi = random_tangent(x, 1.0 + s, s, stream=1)
        g = canonical_inner(x, xi, xi)
        alt = np.sum(xi.ambient ** 2) - 0.5 * np.sum((x.mat.T @ xi.ambient) ** 2)
        worst = max(worst, abs(g - alt) / max(1.0, g))
    return worst, 1e-12


def _roundtrip():
    worst = 0.0
    for s in range(10):
        x = random_point(12, 3, s)
        xi = random_tangent(x, 0.9, s, stream=1)
        res = log_map_shooting(x, exp_map(x, xi))
        worst = max(worst, float(np.linalg.norm(res.xi.ambient - xi.ambient)))
    return worst, 1e-8


def _circle():
    t = 0.7
    x = np.array([[1.0], [0.0]])
    y = np.array([[math.cos(t)], [math.sin(t)]])
    return abs(riemannian_distance(x, y) - t), 1e-8


def _midpoint_equidistant():
    x = random_point(8, 2, 5)
    y = exp_map(x, random_tangent(x, 1.0, 5, stream=1))
    mid = geodesic_midpoint(x, y)
    return abs(riemannian_distance(x, mid) - riemannian_distance(mid, y)), 1e-8


def _diagonalization():
    worst = 0.0
    for n, p in ((4, 2), (12, 3), (5, 1)):
        x = random_point(n, p, n + p)
        q = build_Q_i(x)
        worst = max(worst,
                    float(np.abs(q.T @ hessian_D_exact(x, x) @ q - np.diag(diag_D(n, p))).max()),
                    float(np.abs(q.T @ hessian_L_exact(x, x) @ q - np.diag(diag_L(n, p))).max()))
    return worst, 1e-12


def _lambda_min():
    return max(abs(np.linalg.eigvalsh(assemble_A(m, 4, 2))[0] - lambda_min_A(m)) for m in range(3, 12)), 1e-12


def _leapfrog_descent():
    x = random_point(6, 2, 9)
    xi = random_tangent(x, 2.0, 9, stream=1)
    y = exp_map(x, xi)
    ref = initialize_path(x, y, 6, "geodesic", xi=xi)
    _, tr = leapfrog_run(initialize_path(x, y, 6, "chord", seed=9), 40, reference=ref)
    f = np.array(tr.F)
    return max(0.0, float(np.max(np.diff(f)))), 1e-12


def _backends():
    from ._kernels import _pycore

    x = random_point(9, 3, 11).mat
    y = exp_map(x, random_tangent(x, 1.2, 11, stream=1)).mat
    a = _kernels.midpoint(x, y, 1e-13, 100, 1e-7)[0]
    b = _pycore.midpoint(x, y, 1e-13, 100, 1e-7)[0]
    return float(np.abs(a - b).max()), 1e-12


CHECKS = [
    ("matrix_exp of skew is orthogonal", _expm_orthogonal),
    ("vec_perm shuffles vec(X^T) to vec(X)", _vec_perm),
    ("polar factor is idempotent", _polar_idempotent),
    ("canonical metric two-term identity", _metric_identity),
    ("exp/log roundtrip", _roundtrip),
    ("circle arc length", _circle),
    ("midpoint equidistance", _midpoint_equidistant),
    ("Q_i diagonalizes D_ii and L_ii", _diagonalization),
    ("lambda_min(A) closed form", _lambda_min),
    ("leapfrog F non-increasing", _leapfrog_descent),
    ("compiled and Python kernels agree", _backends),
]


def run_selftest(stream):
    ok_all = True
    stream.write(f"backend: {_kernels.BACKEND}\n")
    for name, fn in CHECKS:
        try:
            value, tol = fn()
            ok = value <= tol
            detail = f"{value:.3e} <= {tol:.0e}"
        except Exception as exc:  # report and keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= ok
        stream.write(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})\n")
    return ok_all
