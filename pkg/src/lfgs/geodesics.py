"""Riemannian logarithm, geodesic midpoints and the leapfrog iteration.

The logarithm is computed by single shooting. Gauss-Newton runs in the
reduced frame ``[x, basis]`` where ``basis`` spans the part of ``range(y)``
orthogonal to ``x``; a geodesic from ``x`` to ``y`` only ever leaves
``range(x)`` inside that subspace, so the frame is exact and keeps the
unknown count at ``p(p-1)/2 + min(p, n-p) p``.
"""

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import _kernels
from .errors import IllPosed, NotConverged, TooFarApart
from .linalg import _parse_matrix, format_matrix, polar_orthogonal
from .stiefel import StiefelPoint, _coerce, _rng, exp_map, random_tangent, tangent_from_ambient

DELTA_G = 0.89 * math.pi
SHOOT_TOL = 1e-10
SHOOT_MAX_ITER = 100
FD_STEP = 1e-7
GAP_GUARD = 1.4
# Midpoints inside leapfrog are solved well below SHOOT_TOL so that err-k can
# fall to RATE_FLOOR without hitting the solver's noise floor; a solve that
# stagnates there is still accepted once its residual is under SHOOT_TOL.
LEAPFROG_TOL = 1e-13
STOP_TOL = 1e-12
RATE_FLOOR = 1e-12


@dataclass(frozen=True)
class ShootingResult:
    """Outcome of single shooting.

    ``minimal`` is set only when the geodesic is converged and no longer than
    ``DELTA_G``, the radius below which the minimizing geodesic is unique.
    Longer solutions may still be minimal but are not certified.
    """

    xi: object
    residual: float
    iterations: int
    converged: bool
    minimal: bool
    status: int = _kernels.OK

    @property
    def length(self):
        return self.xi.norm


def _chord(x, y):
    return float(np.linalg.norm(x - y))


def log_map_shooting(x, y, tol=SHOOT_TOL, max_iter=SHOOT_MAX_ITER, gap_guard=GAP_GUARD,
                     fd_step=FD_STEP, raise_on_failure=True):
    """Tangent vector at ``x`` whose geodesic reaches ``y`` at t = 1.

    ``gap_guard`` bounds the Frobenius chord before any work is done; pass
    None to disable it. With ``raise_on_failure`` false a non-converged
    result is returned instead of raising NotConverged.
    """
    x, y = _coerce(x), _coerce(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if gap_guard is not None:
        chord = _chord(x.mat, y.mat)
        if chord > gap_guard:
            raise TooFarApart(chord, gap_guard)
    omega, b, basis, res, it, status = _kernels.shoot(x.mat, y.mat, tol, max_iter, fd_step)
    converged = bool(res <= tol)
    if not converged and raise_on_failure:
        raise NotConverged(f"shooting stopped with residual {res:.3e} after {it} iterations "
                           f"(status {status})", residual=res, iterations=it)
    xi = tangent_from_ambient(x, x.mat @ omega + basis @ b)
    minimal = converged and xi.norm <= DELTA_G
    return ShootingResult(xi, float(res), int(it), converged, minimal, int(status))


def riemannian_distance(x, y, **kwargs):
    """Canonical length of the shooting solution from ``x`` to ``y``."""
    return log_map_shooting(x, y, **kwargs).xi.norm


def _midpoint_arrays(a, b, tol, max_iter, fd_step, limit, accept_tol=None):
    mid, norm, res, it, status = _kernels.midpoint(a, b, tol, max_iter, fd_step)
    ok = res <= tol or (status == _kernels.STAGNATION and accept_tol is not None and res <= accept_tol)
    if not ok:
        raise NotConverged(f"midpoint shooting stopped with residual {res:.3e} "
                           f"(status {status})", residual=res, iterations=it)
    if limit is not None and norm > limit:
        raise TooFarApart(norm, limit, "geodesic distance")
    return mid, norm


def geodesic_midpoint(a, b, tol=SHOOT_TOL, max_iter=SHOOT_MAX_ITER, limit=DELTA_G, fd_step=FD_STEP):
    """Midpoint of the geodesic from ``a`` to ``b``.

    Raises TooFarApart when the connecting geodesic is longer than ``limit``.
    """
    a, b = _coerce(a), _coerce(b)
    mid, _ = _midpoint_arrays(a.mat, b.mat, tol, max_iter, fd_step, limit)
    return StiefelPoint(mid)


class PiecewisePath:
    """Ordered tuple ``(X_0, ..., X_{m-1})`` of points with fixed endpoints."""

    __slots__ = ("points",)

    def __init__(self, points):
        pts = tuple(_coerce(p) for p in points)
        if len(pts) < 3:
            raise ValueError(f"a path needs m >= 3 points, got {len(pts)}")
        shape = pts[0].shape
        if any(q.shape != shape for q in pts):
            raise ValueError("all points must share (n, p)")
        self.points = pts

    @classmethod
    def from_arrays(cls, arrays):
        return cls([StiefelPoint(a) for a in arrays])

    @property
    def m(self):
        return len(self.points)

    @property
    def n(self):
        return self.points[0].n

    @property
    def p(self):
        return self.points[0].p

    def arrays(self):
        return [q.mat for q in self.points]

    def stacked(self):
        return np.stack(self.arrays())

    def gaps(self):
        """Chordal spectral-norm gaps between consecutive points."""
        s = self.stacked()
        return np.linalg.norm(s[1:] - s[:-1], ord=2, axis=(1, 2))

    def with_interior(self, interior):
        if len(interior) != self.m - 2:
            raise ValueError("wrong number of interior points")
        return PiecewisePath((self.points[0], *interior, self.points[-1]))

    def __getitem__(self, i):
        return self.points[i]

    def __len__(self):
        return self.m

    def __repr__(self):
        return f"PiecewisePath(m={self.m}, n={self.n}, p={self.p})"


def _max_gap(xs):
    s = np.stack(xs)
    return float(np.linalg.norm(s[1:] - s[:-1], ord=2, axis=(1, 2)).max())


def _sweep_arrays(xs, tol, max_iter, fd_step, limit, accept_tol=SHOOT_TOL):
    """One in-place Gauss-Seidel pass over the interior of ``xs``.

    Returns the largest point movement and the m-1 segment lengths, which
    fall out of the midpoint solves: after ``X_i`` is replaced, its left
    segment is half the geodesic it was placed on, and the last segment is
    half of the final solve.
    """
    m = len(xs)
    seg = np.empty(m - 1)
    moved = 0.0
    for i in range(1, m - 1):
        try:
            mid, norm = _midpoint_arrays(xs[i - 1], xs[i + 1], tol, max_iter, fd_step, limit,
                                         accept_tol)
        except (NotConverged, TooFarApart) as exc:
            raise IllPosed(f"midpoint subproblem at interior index {i}: {exc}", index=i) from exc
        moved = max(moved, float(np.linalg.norm(mid - xs[i])))
        xs[i] = mid
        seg[i - 1] = 0.5 * norm
    seg[m - 2] = seg[m - 3]
    return moved, seg


def leapfrog_sweep(path, tol=LEAPFROG_TOL, max_iter=SHOOT_MAX_ITER, limit=DELTA_G, fd_step=FD_STEP):
    """Replace ``X_1, ..., X_{m-2}`` in order by midpoints of their neighbours."""
    xs = [np.array(a) for a in path.arrays()]
    _sweep_arrays(xs, tol, max_iter, fd_step, limit)
    return path.with_interior([StiefelPoint(a) for a in xs[1:-1]])


TRACE_COLUMNS = ("sweep", "length", "F", "err", "max_gap", "mu")


@dataclass
class LeapfrogTrace:
    """Per-sweep history of a leapfrog run.

    Row k describes the path after sweep k. ``mu[k]`` is err-k over
    err-(k-1) and is NaN without a reference or once the previous error is
    below ``RATE_FLOOR``.
    """

    sweep: list = field(default_factory=list)
    length: list = field(default_factory=list)
    F: list = field(default_factory=list)
    err: list = field(default_factory=list)
    max_gap: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    movement: list = field(default_factory=list)
    err0: float = math.nan
    max_gap0: float = math.nan
    termination: str = "max_iters"

    def __len__(self):
        return len(self.sweep)

    def rates(self):
        """Recorded reduction rates, starting with mu_0 = err-1 / err-0."""
        mu = np.asarray(self.mu, dtype=float)
        return mu[np.isfinite(mu)]

    def to_csv(self, stream=None, header_comment=True):
        out = stream if stream is not None else io.StringIO()
        if header_comment:
            stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
            out.write(f"# lfgs leapfrog trace, generated {stamp}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in zip(self.sweep, self.length, self.F, self.err, self.max_gap, self.mu):
            w.writerow([row[0]] + [_fmt(v) for v in row[1:]])
        return out.getvalue() if stream is None else None


def _fmt(v):
    return "" if not math.isfinite(v) else repr(float(v))


def _err(xs, ref):
    return math.sqrt(sum(float(np.sum((a - b) ** 2)) for a, b in zip(xs, ref)))


def leapfrog_run(path0, max_sweeps, stop_tol=STOP_TOL, reference=None, tol=LEAPFROG_TOL,
                 max_iter=SHOOT_MAX_ITER, limit=DELTA_G, fd_step=FD_STEP, min_sweeps=0):
    """Iterate leapfrog sweeps.

    Stops when no point moves more than ``stop_tol`` (Frobenius) in a sweep,
    after at least ``min_sweeps`` sweeps, or after ``max_sweeps``. Raises
    IllPosed with ``sweep`` and the partial ``trace`` attached when a
    midpoint leaves the unique-geodesic region.
    """
    xs = [np.array(a) for a in path0.arrays()]
    ref = None
    if reference is not None:
        if reference.m != path0.m:
            raise ValueError("reference must have the same number of points")
        ref = reference.arrays()
    trace = LeapfrogTrace()
    trace.max_gap0 = _max_gap(xs)
    prev = math.nan
    if ref is not None:
        trace.err0 = prev = _err(xs, ref)
    for k in range(1, max_sweeps + 1):
        try:
            moved, seg = _sweep_arrays(xs, tol, max_iter, fd_step, limit)
        except IllPosed as exc:
            trace.termination = "ill_posed"
            exc.sweep, exc.trace = k, trace
            raise
        e = _err(xs, ref) if ref is not None else math.nan
        trace.sweep.append(k)
        trace.length.append(float(seg.sum()))
        trace.F.append(float(np.dot(seg, seg)))
        trace.err.append(e)
        trace.max_gap.append(_max_gap(xs))
        trace.mu.append(e / prev if prev > RATE_FLOOR else math.nan)
        trace.movement.append(moved)
        prev = e
        if moved <= stop_tol and k >= min_sweeps:
            trace.termination = "converged"
            break
    return path0.with_interior([StiefelPoint(a) for a in xs[1:-1]]), trace


def _key(stream):
    return tuple(stream) if isinstance(stream, (tuple, list)) else (stream,)


_MODES = {
    "chord": "chord", "chord_project": "chord",
    "geodesic": "geodesic", "geodesic_sample": "geodesic",
    "perturbed": "perturbed", "perturbed_geodesic": "perturbed",
}


def initialize_path(x, y, m, mode="chord", seed=0, xi=None, sigma=0.0, stream=0, sort=True):
    """Starting path for leapfrog.

    ``chord``: polar projections of ``(1 - t) x + t y`` at m-2 uniform
    parameters, sorted unless ``sort`` is false.
    ``geodesic``: ``exp_map(x, xi, i / (m - 1))``; needs ``xi``.
    ``perturbed``: the geodesic samples plus tangent noise of canonical
    norm ``sigma`` at each interior point, projected back with the polar
    factor.
    """
    if m < 3:
        raise ValueError("m must be at least 3")
    try:
        kind = _MODES[mode]
    except KeyError:
        raise ValueError(f"unknown init mode {mode!r}") from None
    x = _coerce(x)
    if kind == "chord":
        y = _coerce(y)
        t = _rng(seed, stream).uniform(size=m - 2)
        if sort:
            t = np.sort(t)
        inner = [StiefelPoint(polar_orthogonal((1.0 - s) * x.mat + s * y.mat)) for s in t]
        return PiecewisePath([x, *inner, y])
    if xi is None:
        raise ValueError(f"mode {mode!r} needs the connecting tangent xi")
    y = exp_map(x, xi, 1.0) if y is None else _coerce(y)
    inner = [exp_map(x, xi, i / (m - 1)) for i in range(1, m - 1)]
    if kind == "perturbed" and sigma > 0:
        inner = [StiefelPoint(polar_orthogonal(q.mat + random_tangent(q, sigma, seed, (*_key(stream), i)).ambient))
                 for i, q in enumerate(inner, start=1)]
    return PiecewisePath([x, *inner, y])


def path_length(path, gap_guard=GAP_GUARD, **kwargs):
    """Return ``(sum of segment distances, sum of squared distances)``."""
    d = np.array([riemannian_distance(a, b, gap_guard=gap_guard, **kwargs)
                  for a, b in zip(path.points[:-1], path.points[1:])])
    return float(d.sum()), float(np.dot(d, d))


def format_path(path):
    parts = [f"{path.m} {path.n} {path.p}\n"]
    parts.extend(format_matrix(q.mat) for q in path.points)
    return "".join(parts)


def parse_path(text):
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    m, n, p = (int(t) for t in lines[0].split())
    pos, pts = 1, []
    for _ in range(m):
        mat, pos = _parse_matrix(lines, pos)
        if mat.shape != (n, p):
            raise ValueError(f"matrix {len(pts)} has shape {mat.shape}, header says {(n, p)}")
        pts.append(StiefelPoint(mat))
    if pos != len(lines):
        raise ValueError("trailing data after path")
    return PiecewisePath(pts)


def write_path(filename, path):
    with open(filename, "w") as fh:
        fh.write(format_path(path))


def read_path(filename):
    with open(filename) as fh:
        return parse_path(fh.read())
