import math

import numpy as np
import pytest

from lfgs.errors import SingularDiagonal
from lfgs.geodesics import initialize_path, riemannian_distance
from lfgs.hessian import (assemble_A, assemble_Gprime, bgs_iteration_matrix, bgs_spectral_radius,
                          build_hat_Q, build_Q_i, delta_threshold, diag_D, diag_L, e_norm_bound,
                          ext_dist_sq, ext_dist_sq_expansion, gershgorin_radii, grad_ext_dist_sq_X,
                          grad_ext_dist_sq_Y, hat_Lambda, hessian_D_exact, hessian_D_leading,
                          hessian_L_exact, hessian_L_leading, hessian_perturbation_norms,
                          lambda_min_A, lambda_spectrum_A, min_eigenspace_A,
                          perturbation_bounds, report_field_names, s_matrix, split_A_E,
                          transport_complement)
from lfgs.linalg import unvec, vec, vec_perm
from lfgs.stiefel import StiefelPoint, exp_map, random_point, random_tangent

H1, H2 = 1e-6, 1e-4


def near_pair(n, p, gap, seed):
    x = random_point(n, p, seed)
    xi = random_tangent(x, 1.0, seed)
    # scale so the chordal 2-norm gap equals `gap`
    t = gap
    for _ in range(3):
        y = exp_map(x, xi, t)
        t *= gap / np.linalg.norm(x.mat - y.mat, 2)
    return x, exp_map(x, xi, t)


def fd_grad(f, x):
    g = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        e = np.zeros_like(x)
        e[idx] = H1
        g[idx] = (f(x + e) - f(x - e)) / (2 * H1)
    return g


def fd_hess(f, x, y, mixed):
    """Second derivatives of f(X, Y) in column-major vec coordinates.

    ``mixed`` false: d^2/dX^2; true: rows vec(Y), columns vec(X).
    """
    n, p = x.shape
    size = n * p
    h = np.zeros((size, size))
    for a in range(size):
        ea = unvec(np.eye(size)[a] * H2, n, p)
        for b in range(size):
            eb = unvec(np.eye(size)[b] * H2, n, p)
            if mixed:
                v = (f(x + eb, y + ea) - f(x - eb, y + ea) - f(x + eb, y - ea) + f(x - eb, y - ea))
            else:
                v = (f(x + ea + eb, y) - f(x + ea - eb, y) - f(x - ea + eb, y) + f(x - ea - eb, y))
            h[a, b] = v / (4 * H2 * H2)
    return h


# extended distance ------------------------------------------------------------

def test_ext_dist_matches_distance_on_manifold():
    x, y = near_pair(6, 2, 0.3, 0)
    v = ext_dist_sq(x, y)
    assert v.finite
    assert abs(float(v) - riemannian_distance(x, y) ** 2) <= 1e-12


def test_ext_dist_adds_projection_residual():
    x, y = near_pair(6, 2, 0.3, 1)
    xt = 1.3 * x.mat
    expected = riemannian_distance(x, y) ** 2 + 0.09 * 2
    assert abs(float(ext_dist_sq(xt, y)) - expected) <= 1e-12


def test_ext_dist_infinite_when_rank_deficient():
    x = random_point(5, 2, 2)
    z = x.mat.copy()
    z[:, 1] = 0.0
    v = ext_dist_sq(z, x)
    assert not v.finite
    with pytest.raises(ValueError):
        float(v)


def test_expansion_is_quartic_accurate():
    x = random_point(6, 3, 3)
    xi = random_tangent(x, 1.0, 3)
    ratios = []
    for t in (0.1, 0.05, 0.025):
        y = exp_map(x, xi, t)
        ratios.append(abs(ext_dist_sq_expansion(x, y) - t * t))
    assert ratios[0] / ratios[1] > 12 and ratios[1] / ratios[2] > 12


# derivatives ----------------------------------------------------------------

@pytest.mark.parametrize("n,p,seed", [(4, 2, 0), (4, 2, 1), (6, 3, 2), (6, 3, 3)])
def test_gradients_match_finite_differences(n, p, seed):
    x, y = near_pair(n, p, 0.2, seed)
    gx = fd_grad(lambda z: ext_dist_sq_expansion(z, y.mat), x.mat)
    gy = fd_grad(lambda z: ext_dist_sq_expansion(x.mat, z), y.mat)
    assert np.abs(grad_ext_dist_sq_X(x, y) - gx).max() <= 1e-4
    assert np.abs(grad_ext_dist_sq_Y(x, y) - gy).max() <= 1e-4


@pytest.mark.parametrize("n,p,seed", [(4, 2, 4), (6, 3, 5)])
def test_hessian_D_matches_finite_differences(n, p, seed):
    x, y = near_pair(n, p, 0.2, seed)
    fd = fd_hess(ext_dist_sq_expansion, x.mat, y.mat, mixed=False)
    assert np.abs(hessian_D_exact(x, y) - fd).max() <= 1e-4


@pytest.mark.parametrize("n,p,seed", [(4, 2, 6), (6, 3, 7)])
def test_hessian_L_matches_finite_differences(n, p, seed):
    x, y = near_pair(n, p, 0.2, seed)
    fd = fd_hess(ext_dist_sq_expansion, x.mat, y.mat, mixed=True)
    assert np.abs(hessian_L_exact(x, y) - fd).max() <= 1e-4


def test_hessians_at_coincident_points_equal_leading_terms():
    x = random_point(7, 3, 8)
    assert np.abs(hessian_D_exact(x, x) - hessian_D_leading(x)).max() <= 1e-13
    assert np.abs(hessian_L_exact(x, x) - hessian_L_leading(x)).max() <= 1e-13


def test_hessian_D_is_symmetric():
    x, y = near_pair(6, 3, 0.3, 9)
    h = hessian_D_exact(x, y)
    assert np.abs(h - h.T).max() <= 1e-13


@pytest.mark.parametrize("gap", [0.2, 0.05, 0.01])
def test_perturbation_norms_within_bounds(gap):
    for seed in range(5):
        x, y = near_pair(8, 3, gap, 10 + seed)
        nd, nl = hessian_perturbation_norms(x, y, check=True)
        bd, bl = perturbation_bounds(gap)
        assert nd <= bd and nl <= bl


def test_perturbation_check_raises_when_violated(monkeypatch):
    from lfgs import hessian

    x, y = near_pair(6, 2, 0.1, 20)
    hessian_perturbation_norms(x, StiefelPoint(x.mat), check=True)
    monkeypatch.setattr(hessian, "perturbation_bounds", lambda d: (0.0, 0.0))
    with pytest.raises(AssertionError):
        hessian_perturbation_norms(x, y, check=True)


# diagonalization -----------------------------------------------------------

@pytest.mark.parametrize("n,p", [(5, 1), (4, 2), (6, 3), (12, 4), (3, 3)])
def test_hat_Q_diagonalizes_permutation(n, p):
    q = build_hat_Q(n, p)
    assert np.abs(q.T @ q - np.eye(n * p)).max() <= 1e-15
    block = np.zeros((n * p, n * p))
    block[:p * p, :p * p] = vec_perm(p, p)
    assert np.abs(q.T @ block @ q - np.diag(hat_Lambda(n, p))).max() <= 1e-15


def test_Q_i_diagonalizes_leading_blocks():
    rng = np.random.default_rng(0)
    for s in range(50):
        n = int(rng.integers(2, 13))
        p = int(rng.integers(1, min(4, n) + 1))
        x = random_point(n, p, s)
        q = build_Q_i(x)
        assert np.abs(q.T @ q - np.eye(n * p)).max() <= 1e-12
        assert np.abs(q.T @ hessian_D_leading(x) @ q - np.diag(diag_D(n, p))).max() <= 1e-12
        assert np.abs(q.T @ hessian_L_leading(x) @ q - np.diag(diag_L(n, p))).max() <= 1e-12


def test_transport_complement_is_close_and_orthogonal():
    x, y = near_pair(9, 3, 0.05, 40)
    c = transport_complement(x.complement, y)
    assert np.linalg.norm(y.mat.T @ c) <= 1e-13
    assert np.abs(c.T @ c - np.eye(6)).max() <= 1e-13
    assert np.linalg.norm(c - x.complement, 2) <= 2 * 0.05


# model matrix ----------------------------------------------------------------

@pytest.mark.parametrize("m", [3, 4, 5, 8, 12, 20])
@pytest.mark.parametrize("n,p", [(4, 2), (5, 3), (4, 1)])
def test_lambda_min_closed_form(m, n, p):
    a = assemble_A(m, n, p)
    eig = np.linalg.eigvalsh(a)
    assert abs(eig[0] - lambda_min_A(m, p)) <= 1e-12
    assert np.abs(eig - lambda_spectrum_A(m, n, p)).max() <= 1e-12


def test_min_eigenspace_spans_minimizers():
    for m, n, p in [(6, 5, 3), (10, 4, 2), (5, 4, 1)]:
        a = assemble_A(m, n, p)
        v = min_eigenspace_A(m, n, p)
        lam = lambda_min_A(m, p)
        assert np.abs(a @ v - lam * v).max() <= 1e-12
        mult = int(np.sum(np.abs(np.linalg.eigvalsh(a) - lam) <= 1e-9))
        assert v.shape[1] == mult


def test_threshold_is_root_of_bound():
    for m in (4, 10, 50):
        d = delta_threshold(m)
        assert abs(e_norm_bound(d) - lambda_min_A(m)) <= 1e-12
        assert d > 0


def test_lambda_min_decays_like_inverse_square():
    assert abs(lambda_min_A(201) * 200 ** 2 / math.pi ** 2 - 1.0) <= 1e-4


# assembled Hessian --------------------------------------------------------------

def test_gprime_is_hessian_of_energy():
    """Assembled matrix against FD of the summed truncated expansion over the interior."""
    x = random_point(4, 2, 50)
    path = initialize_path(x, None, 4, "geodesic", xi=random_tangent(x, 0.3, 50))
    pts = [q.mat for q in path.points]
    n, p = 4, 2
    size = n * p
    g = assemble_Gprime(path).dense()

    def energy(v):
        inner = [unvec(v[i * size:(i + 1) * size], n, p) for i in range(2)]
        xs = [pts[0], *inner, pts[-1]]
        return sum(ext_dist_sq_expansion(a, b) for a, b in zip(xs[:-1], xs[1:]))

    v0 = np.concatenate([vec(q) for q in pts[1:-1]])
    fd = np.zeros_like(g)
    h = H2
    for a in range(2 * size):
        for b in range(2 * size):
            ea, eb = np.eye(2 * size)[a] * h, np.eye(2 * size)[b] * h
            fd[a, b] = (energy(v0 + ea + eb) - energy(v0 + ea - eb) - energy(v0 - ea + eb)
                        + energy(v0 - ea - eb)) / (4 * h * h)
    assert np.abs(g - fd).max() <= 1e-4
    assert np.abs(g - g.T).max() <= 1e-13


def test_split_on_tiny_geodesic_recovers_model():
    x = random_point(6, 2, 51)
    path = initialize_path(x, None, 6, "geodesic", xi=random_tangent(x, 1e-4, 51))
    a, e, rep = split_A_E(path)
    assert rep.norm_E_actual <= rep.norm_E_bound
    assert abs(rep.lambda_min_Gprime - rep.lambda_min_A) <= rep.norm_E_actual + 1e-12
    assert len(report_field_names()) == len(rep.CSV_COLUMNS)
    assert len(rep.row()) == len(rep.CSV_COLUMNS)


def test_split_with_independent_complements_keeps_spectrum():
    x = random_point(6, 2, 52)
    path = initialize_path(x, None, 5, "geodesic", xi=random_tangent(x, 0.1, 52))
    r1 = split_A_E(path, "transport", compute_rho=False)[2]
    r2 = split_A_E(path, "independent", compute_rho=False)[2]
    assert abs(r1.lambda_min_Gprime - r2.lambda_min_Gprime) <= 1e-12
    with pytest.raises(ValueError):
        split_A_E(path, "random")


def test_gershgorin_encloses_E_spectrum():
    x = random_point(6, 2, 53)
    path = initialize_path(x, None, 6, "perturbed", xi=random_tangent(x, 0.2, 53), sigma=0.01, seed=1)
    _, e, _ = split_A_E(path, compute_rho=False)
    radii, eigs = gershgorin_radii(e, 12)
    lo = min(ev.min() - r for ev, r in zip(eigs, radii))
    hi = max(ev.max() + r for ev, r in zip(eigs, radii))
    w = np.linalg.eigvalsh(e)
    assert lo - 1e-12 <= w.min() and w.max() <= hi + 1e-12


# Gauss-Seidel ---------------------------------------------------------------

def _power_radius(mat, iters=4000):
    v = np.random.default_rng(0).standard_normal(mat.shape[0])
    r = 0.0
    for _ in range(iters):
        w = mat @ v
        r = np.linalg.norm(w) / np.linalg.norm(v)
        v = w / np.linalg.norm(w)
    return r


def test_bgs_radius_on_scalar_laplacian():
    for k in (3, 6, 10):
        t = 2 * np.eye(k) - toeplitz(k)
        rho = bgs_spectral_radius((t, 1))
        assert abs(rho - math.cos(math.pi / (k + 1)) ** 2) <= 1e-12


def toeplitz(k):
    return np.eye(k, k=1) + np.eye(k, k=-1)


def test_bgs_radius_matches_power_iteration():
    x = random_point(5, 2, 54)
    path = initialize_path(x, None, 6, "geodesic", xi=random_tangent(x, 0.5, 54))
    blocks = assemble_Gprime(path)
    rho = bgs_spectral_radius(blocks)
    assert 0 < rho < 1
    assert abs(rho - _power_radius(bgs_iteration_matrix(blocks))) <= 1e-3


def test_bgs_iteration_matrix_definition():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((6, 6))
    g = a @ a.T + 6 * np.eye(6)
    m = bgs_iteration_matrix((g, 2))
    blk = np.arange(6) // 2
    lower = np.where(blk[None, :] <= blk[:, None], g, 0.0)
    upper = g - lower
    assert np.abs(m + np.linalg.solve(lower, upper)).max() <= 1e-13


def test_bgs_singular_diagonal_block():
    g = np.eye(4)
    g[0, 0] = 0.0
    with pytest.raises(SingularDiagonal):
        bgs_spectral_radius((g, 2))


def test_bgs_radius_zero_for_block_diagonal():
    assert bgs_spectral_radius((np.eye(6), 3)) == 0.0


def test_s_matrix_definition():
    x = random_point(5, 2, 55)
    z = np.random.default_rng(2).standard_normal((5, 2))
    assert np.abs(s_matrix(x) @ vec(z) - vec(x @ z.T @ x)).max() <= 1e-14
