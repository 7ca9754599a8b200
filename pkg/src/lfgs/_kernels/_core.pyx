# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: small dense exponentials and the shooting solver.

All internal buffers are column-major so they can be handed to BLAS/LAPACK
directly. The Python-facing signatures match ``_pycore``.
"""

import numpy as np

from libc.math cimport sqrt, fabs, ceil, log2, isfinite
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy, memset
from scipy.linalg.cython_blas cimport dgemm
from scipy.linalg.cython_lapack cimport dgeqrf, dorgqr, dgelsd, dsyev

cdef enum:
    ST_OK = 0
    ST_MAX_ITER = 1
    ST_STAGNATION = 2
    ST_NONFINITE = 3
    ST_LAPACK = 4

OK = ST_OK
MAX_ITER = ST_MAX_ITER
STAGNATION = ST_STAGNATION
NONFINITE = ST_NONFINITE

cdef int TAYLOR_DEGREE = 16
cdef double SCALE_THETA = 0.5
cdef int MAX_HALVINGS = 20


cdef inline void _mm(int m, int k, int n, double* a, int lda, double* b, int ldb,
                     double* c, int ldc, double alpha, double beta) noexcept nogil:
    cdef char tr = b'N'
    dgemm(&tr, &tr, &m, &n, &k, &alpha, a, &lda, b, &ldb, &beta, c, &ldc)


cdef void _expm(int s, double* a, double* out, double* w1, double* w2) noexcept nogil:
    """out = exp(a) for an s x s column-major matrix; w1, w2 hold s*s doubles."""
    cdef int i, j, k, sq = 0
    cdef double col, norm1 = 0.0, scale
    if s == 0:
        return
    for j in range(s):
        col = 0.0
        for i in range(s):
            col += fabs(a[i + j * s])
        if col > norm1:
            norm1 = col
    if norm1 > SCALE_THETA:
        sq = <int>ceil(log2(norm1 / SCALE_THETA))
    scale = 1.0
    for i in range(sq):
        scale *= 0.5
    for k in range(s * s):
        w2[k] = a[k] * scale
    # Horner: out = I + B/deg, then out = I + B out / j
    for k in range(s * s):
        out[k] = w2[k] / TAYLOR_DEGREE
    for i in range(s):
        out[i + i * s] += 1.0
    for j in range(TAYLOR_DEGREE - 1, 0, -1):
        _mm(s, s, s, w2, s, out, s, w1, s, 1.0 / j, 0.0)
        for i in range(s):
            w1[i + i * s] += 1.0
        memcpy(out, w1, s * s * sizeof(double))
    for k in range(sq):
        _mm(s, s, s, out, s, out, s, w1, s, 1.0, 0.0)
        memcpy(out, w1, s * s * sizeof(double))


cdef void _generator(double* u, int p, int r, double* v) noexcept nogil:
    cdef int s = p + r, i, j, idx = 0
    memset(v, 0, s * s * sizeof(double))
    for i in range(p):
        for j in range(i + 1, p):
            v[i + j * s] = u[idx]
            v[j + i * s] = -u[idx]
            idx += 1
    for i in range(r):
        for j in range(p):
            v[(p + i) + j * s] = u[idx]
            v[j + (p + i) * s] = -u[idx]
            idx += 1


cdef double _residual(double* u, int p, int r, double* target, double* f,
                      double* v, double* e, double* w1, double* w2) noexcept nogil:
    """f = exp(V(u))[:, :p] - target, returns its Frobenius norm."""
    cdef int s = p + r, k
    cdef double acc = 0.0
    _generator(u, p, r, v)
    _expm(s, v, e, w1, w2)
    for k in range(s * p):
        f[k] = e[k] - target[k]
        acc += f[k] * f[k]
    return sqrt(acc)


cdef int _reduce(double* x, double* y, int n, int p, double* basis,
                 double* target) noexcept nogil:
    """Fill basis (n x r) and target ((p+r) x p) so that y = [x basis] target."""
    cdef int r = p if p < n - p else n - p
    cdef int s = p + r, i, j, info = 0, lwork, ncol = 2 * p
    cdef double wq
    cdef double* a
    cdef double* tau
    cdef double* work
    # M = x^T y
    cdef char tt = b'T'
    cdef char nn = b'N'
    cdef double one = 1.0, zero = 0.0
    dgemm(&tt, &nn, &p, &p, &n, &one, x, &n, y, &n, &zero, target, &s)
    if r == 0:
        return 0
    a = <double*>malloc(n * ncol * sizeof(double))
    tau = <double*>malloc(ncol * sizeof(double))
    memcpy(a, x, n * p * sizeof(double))
    memcpy(a + n * p, y, n * p * sizeof(double))
    # y - x M into the second block
    _mm(n, p, p, x, n, target, s, a + n * p, n, -1.0, 1.0)
    lwork = -1
    dgeqrf(&n, &ncol, a, &n, tau, &wq, &lwork, &info)
    lwork = <int>wq
    if lwork < n * ncol:
        lwork = n * ncol
    work = <double*>malloc(lwork * sizeof(double))
    dgeqrf(&n, &ncol, a, &n, tau, work, &lwork, &info)
    if info == 0:
        dorgqr(&n, &s, &s, a, &n, tau, work, &lwork, &info)
    if info == 0:
        memcpy(basis, a + n * p, n * r * sizeof(double))
        # N = basis^T y
        dgemm(&tt, &nn, &r, &p, &n, &one, basis, &n, y, &n, &zero, target + p, &s)
    free(work)
    free(tau)
    free(a)
    return info


cdef int _shoot(double* x, double* y, int n, int p, double tol, int max_iter,
                double h, double* u, double* basis, double* res_out,
                int* it_out) noexcept nogil:
    cdef int r = p if p < n - p else n - p
    cdef int s = p + r
    cdef int nw = p * (p - 1) // 2
    cdef int nu = nw + r * p
    cdef int meq = s * p
    cdef int i, j, c, k, idx, it = 0, status = 0, info = 0, lwork, rank
    cdef int nrhs = 1, halving
    cdef double res, rt, alpha, rcond = -1.0, wq
    cdef int nbuf = (s * p) * 3 + s * s * 4 + meq * nu + nu * 3 + 2 * meq + nu
    cdef double* buf = <double*>malloc(nbuf * sizeof(double))
    cdef double* target = buf
    cdef double* f = target + s * p
    cdef double* ft = f + s * p
    cdef double* v = ft + s * p
    cdef double* e = v + s * s
    cdef double* w1 = e + s * s
    cdef double* w2 = w1 + s * s
    cdef double* jac = w2 + s * s
    cdef double* trial = jac + meq * nu
    cdef double* step = trial + nu
    cdef double* sv = step + nu
    cdef double* rhs = sv + nu
    cdef double* e0 = rhs + meq + nu
    cdef double* work = NULL
    cdef int* iwork = NULL
    cdef int liwork

    info = _reduce(x, y, n, p, basis, target)
    if info != 0:
        free(buf)
        return ST_LAPACK

    idx = 0
    for i in range(p):
        for j in range(i + 1, p):
            u[idx] = 0.5 * (target[i + j * s] - target[j + i * s])
            idx += 1
    for i in range(r):
        for j in range(p):
            u[idx] = target[(p + i) + j * s]
            idx += 1

    res = _residual(u, p, r, target, f, v, e, w1, w2)

    if nu > 0:
        lwork = -1
        liwork = 0
        dgelsd(&meq, &nu, &nrhs, jac, &meq, rhs, &meq, sv, &rcond, &rank,
               &wq, &lwork, &liwork, &info)
        lwork = <int>wq + 1
        if liwork < 1:
            liwork = 1
        liwork = liwork if liwork > 30 * (meq + nu) else 30 * (meq + nu)
        work = <double*>malloc(lwork * sizeof(double))
        iwork = <int*>malloc(liwork * sizeof(int))

    while res > tol:
        if it >= max_iter:
            status = ST_MAX_ITER
            break
        if not isfinite(res):
            status = ST_NONFINITE
            break
        if nu == 0:
            status = ST_STAGNATION
            break
        it += 1
        # forward-difference Jacobian; e0 = exp(V(u))[:, :p]
        for k in range(meq):
            e0[k] = f[k] + target[k]
        for c in range(nu):
            memcpy(trial, u, nu * sizeof(double))
            trial[c] += h
            _generator(trial, p, r, v)
            _expm(s, v, e, w1, w2)
            for k in range(meq):
                jac[k + c * meq] = (e[k] - e0[k]) / h
        for k in range(meq):
            rhs[k] = -f[k]
        dgelsd(&meq, &nu, &nrhs, jac, &meq, rhs, &meq, sv, &rcond, &rank,
               work, &lwork, iwork, &info)
        if info != 0:
            status = ST_LAPACK
            break
        memcpy(step, rhs, nu * sizeof(double))
        alpha = 1.0
        halving = 0
        while True:
            for k in range(nu):
                trial[k] = u[k] + alpha * step[k]
            rt = _residual(trial, p, r, target, ft, v, e, w1, w2)
            if rt < res:
                break
            halving += 1
            if halving > MAX_HALVINGS:
                break
            alpha *= 0.5
        if halving > MAX_HALVINGS:
            status = ST_STAGNATION
            break
        memcpy(u, trial, nu * sizeof(double))
        memcpy(f, ft, meq * sizeof(double))
        res = rt

    res_out[0] = res
    it_out[0] = it
    if work != NULL:
        free(work)
    if iwork != NULL:
        free(iwork)
    free(buf)
    return status


cdef void _geodesic_point(double* x, double* basis, int n, int p, int r,
                          double* omega, double* b, int ldb, double t,
                          double* out) noexcept nogil:
    """out = [x basis] exp(t V)[:, :p] with V built from omega (p x p) and b (r x p, leading dim ldb)."""
    cdef int s = p + r, i, j
    cdef double* v = <double*>malloc(s * s * 4 * sizeof(double))
    cdef double* e = v + s * s
    cdef double* w1 = e + s * s
    cdef double* w2 = w1 + s * s
    memset(v, 0, s * s * sizeof(double))
    for j in range(p):
        for i in range(p):
            v[i + j * s] = t * omega[i + j * p]
    for i in range(r):
        for j in range(p):
            v[(p + i) + j * s] = t * b[i + j * ldb]
            v[j + (p + i) * s] = -t * b[i + j * ldb]
    _expm(s, v, e, w1, w2)
    _mm(n, p, p, x, n, e, s, out, n, 1.0, 0.0)
    if r > 0:
        _mm(n, r, p, basis, n, e + p, s, out, n, 1.0, 1.0)
    free(v)


cdef int _polar(double* z, int n, int p, double* out) noexcept nogil:
    """out = z (z^T z)^{-1/2} through the symmetric eigendecomposition of z^T z."""
    cdef int i, j, info = 0, lwork = -1
    cdef double wq, d
    cdef char tt = b'T'
    cdef char nn = b'N'
    cdef char jobz = b'V'
    cdef char uplo = b'U'
    cdef double one = 1.0, zero = 0.0
    cdef double* g = <double*>malloc(p * p * 3 * sizeof(double))
    cdef double* w = g + p * p
    cdef double* h = w + p * p
    cdef double* work
    dgemm(&tt, &nn, &p, &p, &n, &one, z, &n, z, &n, &zero, g, &p)
    dsyev(&jobz, &uplo, &p, g, &p, w, &wq, &lwork, &info)
    lwork = <int>wq
    if lwork < 3 * p:
        lwork = 3 * p
    work = <double*>malloc(lwork * sizeof(double))
    dsyev(&jobz, &uplo, &p, g, &p, w, work, &lwork, &info)
    free(work)
    if info != 0:
        free(g)
        return info
    # h = g diag(w^{-1/2})
    for j in range(p):
        d = 1.0 / sqrt(w[j])
        for i in range(p):
            h[i + j * p] = g[i + j * p] * d
    dgemm(&nn, &tt, &p, &p, &p, &one, h, &p, g, &p, &zero, w, &p)
    _mm(n, p, p, z, n, w, p, out, n, 1.0, 0.0)
    free(g)
    return 0


def expm(a):
    """Matrix exponential by scaling and squaring around a Taylor core."""
    cdef double[::1, :] av = np.array(a, dtype=np.float64, order="F", copy=True)
    cdef int s = av.shape[0]
    out = np.zeros((s, s), order="F")
    if s == 0:
        return out
    cdef double[::1, :] ov = out
    cdef double[::1, :] work = np.empty((s, 2 * s), order="F")
    with nogil:
        _expm(s, &av[0, 0], &ov[0, 0], &work[0, 0], &work[0, s])
    return np.ascontiguousarray(out)


def polar(z):
    """Orthogonal polar factor z (z^T z)^{-1/2} via the Gram eigendecomposition."""
    cdef double[::1, :] zv = np.array(z, dtype=np.float64, order="F")
    cdef int n = zv.shape[0], p = zv.shape[1], info
    out = np.empty((n, p), order="F")
    cdef double[::1, :] ov = out
    with nogil:
        info = _polar(&zv[0, 0], n, p, &ov[0, 0])
    if info != 0:
        raise np.linalg.LinAlgError("symmetric eigensolver failed in polar")
    return np.ascontiguousarray(out)


def _unpack(double[::1] u, int p, int r):
    omega = np.zeros((p, p))
    b = np.zeros((r, p))
    cdef int i, j, idx = 0
    for i in range(p):
        for j in range(i + 1, p):
            omega[i, j] = u[idx]
            omega[j, i] = -u[idx]
            idx += 1
    for i in range(r):
        for j in range(p):
            b[i, j] = u[idx]
            idx += 1
    return omega, b


def shoot(x, y, double tol, int max_iter, double fd_step):
    """Single shooting for the canonical-metric logarithm (see ``_pycore.shoot``)."""
    cdef double[::1, :] xv = np.array(x, dtype=np.float64, order="F")
    cdef double[::1, :] yv = np.array(y, dtype=np.float64, order="F")
    cdef int n = xv.shape[0], p = xv.shape[1]
    cdef int r = p if p < n - p else n - p
    cdef int nu = p * (p - 1) // 2 + r * p
    cdef double res = 0.0
    cdef int it = 0, status
    u = np.zeros(nu + 1)
    basis = np.zeros((n, r + 1), order="F")
    cdef double[::1] uv = u
    cdef double[::1, :] bv = basis
    with nogil:
        status = _shoot(&xv[0, 0], &yv[0, 0], n, p, tol, max_iter, fd_step,
                        &uv[0], &bv[0, 0], &res, &it)
    if status == ST_LAPACK:
        raise np.linalg.LinAlgError("LAPACK failure inside the shooting kernel")
    omega, b = _unpack(uv[:nu], p, r)
    return omega, b, np.ascontiguousarray(basis[:, :r]), res, it, status


def geodesic_point(x, basis, omega, b, double t):
    cdef double[::1, :] xv = np.array(x, dtype=np.float64, order="F")
    cdef int n = xv.shape[0], p = xv.shape[1]
    cdef int r = basis.shape[1]
    cdef double[::1, :] qv = np.array(
        basis if r > 0 else np.zeros((n, 1)), dtype=np.float64, order="F")
    cdef double[::1, :] ov = np.array(omega, dtype=np.float64, order="F")
    cdef double[::1, :] bv = np.array(
        b if r > 0 else np.zeros((1, p)), dtype=np.float64, order="F")
    out = np.empty((n, p), order="F")
    cdef double[::1, :] outv = out
    with nogil:
        _geodesic_point(&xv[0, 0], &qv[0, 0], n, p, r, &ov[0, 0], &bv[0, 0],
                        bv.shape[0], t, &outv[0, 0])
    return np.ascontiguousarray(out)


def midpoint(x, y, double tol, int max_iter, double fd_step):
    """Geodesic midpoint of x and y (see ``_pycore.midpoint``)."""
    cdef double[::1, :] xv = np.array(x, dtype=np.float64, order="F")
    cdef double[::1, :] yv = np.array(y, dtype=np.float64, order="F")
    cdef int n = xv.shape[0], p = xv.shape[1]
    cdef int r = p if p < n - p else n - p
    cdef int nw = p * (p - 1) // 2
    cdef int nu = nw + r * p
    cdef int i, j, idx, it = 0, status, info = 0
    cdef double res = 0.0, acc = 0.0
    cdef double[::1] uv = np.zeros(nu + 1)
    cdef double[::1, :] bv = np.zeros((n, r + 1), order="F")
    cdef double[::1, :] om = np.zeros((p, p), order="F")
    cdef double[::1, :] bb = np.zeros((r + 1, p), order="F")
    cdef double[::1, :] z = np.empty((n, p), order="F")
    out = np.empty((n, p), order="F")
    cdef double[::1, :] outv = out
    with nogil:
        status = _shoot(&xv[0, 0], &yv[0, 0], n, p, tol, max_iter, fd_step,
                        &uv[0], &bv[0, 0], &res, &it)
        if status != ST_LAPACK:
            idx = 0
            for i in range(p):
                for j in range(i + 1, p):
                    om[i, j] = uv[idx]
                    om[j, i] = -uv[idx]
                    acc += uv[idx] * uv[idx]
                    idx += 1
            for i in range(r):
                for j in range(p):
                    bb[i, j] = uv[idx]
                    acc += uv[idx] * uv[idx]
                    idx += 1
            _geodesic_point(&xv[0, 0], &bv[0, 0], n, p, r, &om[0, 0], &bb[0, 0],
                            r + 1, 0.5, &z[0, 0])
            info = _polar(&z[0, 0], n, p, &outv[0, 0])
    if status == ST_LAPACK or info != 0:
        raise np.linalg.LinAlgError("LAPACK failure inside the midpoint kernel")
    # sum of u^2 is 0.5 ||omega||_F^2 + ||b||_F^2
    return np.ascontiguousarray(out), sqrt(acc), res, it, status
