"""Seeded experiments: convergence histories, rate tables and spectral studies.

Random streams are keyed by ``(seed, stream)`` through NumPy's
``SeedSequence.spawn_key``: stream 0 draws the endpoint tangent, ``(1, m,
trial)`` the chord parameters of a trial, ``(2, m, trial)`` the noise of a
perturbed start, and ``(3,)``/``(4,)`` the base point and direction of a
spectral study.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import IllPosed
from .geodesics import RATE_FLOOR, STOP_TOL, initialize_path, leapfrog_run
from .hessian import split_A_E
from .stiefel import StiefelPoint, exp_map, random_point, random_tangent

DEFAULT_SEED = 2021
DEFAULT_LENGTH = 0.95 * math.pi
TABLE1_M = (4, 6, 8, 10, 20, 50, 100)
CONVERGENCE_M = (10, 20, 50, 100)
INIT_MODES = ("chord", "geodesic", "perturbed")


@dataclass(frozen=True)
class ProblemSpec:
    n: int = 12
    p: int = 3
    m: int = 10
    target_length: float = DEFAULT_LENGTH
    seed: int = DEFAULT_SEED
    init_mode: str = "chord"
    sweeps: int = 300
    stop_tol: float = STOP_TOL
    sigma: float = 0.0
    sort: bool = True

    def __post_init__(self):
        if not self.target_length > 0:
            raise ValueError("target_length must be positive")
        if self.m < 3:
            raise ValueError("m must be at least 3")
        if not 1 <= self.p <= self.n:
            raise ValueError("need 1 <= p <= n")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}")


@dataclass(frozen=True)
class Problem:
    x: StiefelPoint
    y: StiefelPoint
    xi_star: object
    reference: object


def gen_problem(spec):
    """Endpoints ``x = [I_p; 0]`` and ``y = Exp_x(xi*)`` with the equidistant reference path."""
    x = StiefelPoint(np.eye(spec.n)[:, :spec.p])
    xi = random_tangent(x, spec.target_length, spec.seed, stream=0)
    y = exp_map(x, xi, 1.0)
    reference = initialize_path(x, y, spec.m, "geodesic", xi=xi)
    return Problem(x, y, xi, reference)


def initial_path(spec, problem, trial=0):
    if spec.init_mode == "chord":
        return initialize_path(problem.x, problem.y, spec.m, "chord", seed=spec.seed,
                               stream=(1, spec.m, trial), sort=spec.sort)
    if spec.init_mode == "geodesic":
        return problem.reference
    return initialize_path(problem.x, problem.y, spec.m, "perturbed", seed=spec.seed,
                           xi=problem.xi_star, sigma=spec.sigma, stream=(2, spec.m, trial))


def run_leapfrog(spec, trial=0, problem=None):
    """One leapfrog run from the ProblemSpec's initial path, measured against the reference."""
    problem = gen_problem(spec) if problem is None else problem
    return leapfrog_run(initial_path(spec, problem, trial), spec.sweeps, stop_tol=spec.stop_tol,
                        reference=problem.reference)


def run_convergence(spec, m_list=CONVERGENCE_M):
    """Full err-k histories for each m; returns ``{m: LeapfrogTrace}``."""
    return {m: run_leapfrog(replace(spec, m=m))[1] for m in m_list}


@dataclass(frozen=True)
class RateSummary:
    m: int
    trials: int
    trials_ok: int
    excluded: int
    iters: int
    max_mu0: float
    max_mu_all: float
    median_max_mu: float

    CSV_COLUMNS = ("m", "trials_ok", "max_mu0", "max_mu_all", "median_max_mu")

    def row(self):
        return (self.m, self.trials_ok, self.max_mu0, self.max_mu_all, self.median_max_mu)


def thread_count(threads=None):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("LFGS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _trial_rates(spec, problem, trial):
    try:
        _, trace = run_leapfrog(spec, trial, problem)
    except IllPosed:
        return None
    return trace.rates()


def summarize_rates(m, rates, iters):
    """Table statistics from per-trial rate arrays; ``None`` marks an excluded trial."""
    ok = [r for r in rates if r is not None and r.size]
    if not ok:
        return RateSummary(m, len(rates), 0, len(rates), iters, math.nan, math.nan, math.nan)
    per_trial_max = np.array([r.max() for r in ok])
    return RateSummary(
        m=m, trials=len(rates), trials_ok=len(ok), excluded=len(rates) - len(ok), iters=iters,
        max_mu0=float(max(r[0] for r in ok)),
        max_mu_all=float(per_trial_max.max()),
        median_max_mu=float(np.median(per_trial_max)),
    )


def run_rate_table(trials=100, iters=50, m_list=TABLE1_M, n=12, p=3, length=DEFAULT_LENGTH,
                   seed=DEFAULT_SEED, threads=None, sort=True, stop_tol=STOP_TOL):
    """Worst first-sweep rate, worst rate and median per-trial worst rate for each m.

    Rates ``err-(k+1) / err-k`` are taken over the first ``iters`` sweeps
    while err-k exceeds ``RATE_FLOOR``. Trials that hit IllPosed are counted
    in ``excluded``. Trials run on ``LFGS_THREADS`` threads (the compiled
    kernel releases the GIL); results are keyed by trial index.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    out = []
    workers = thread_count(threads)
    for m in m_list:
        spec = ProblemSpec(n=n, p=p, m=m, target_length=length, seed=seed, sweeps=iters,
                           stop_tol=stop_tol, sort=sort)
        problem = gen_problem(spec)
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                rates = list(pool.map(lambda t: _trial_rates(spec, problem, t), range(trials)))
        else:
            rates = [_trial_rates(spec, problem, t) for t in range(trials)]
        out.append(summarize_rates(m, rates, iters))
    return out


# spectral study ---------------------------------------------------------------

@dataclass
class SpectralStudy:
    reports: list
    slope_lambda: float
    slope_vEv: float
    slope_E: float


def fit_loglog_slope(x, y):
    x, y = np.asarray(x, dtype=float), np.abs(np.asarray(y, dtype=float))
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def spectral_path(x, direction, m, delta, at_limit, seed, sigma_ratio=0.25, index=0):
    """Path with largest chordal gap close to ``delta``.

    The geodesic along ``direction`` is rescaled twice so that its sampled
    gaps match ``delta``; away from the limit each interior point then gets
    tangent noise of canonical norm ``sigma_ratio * delta``.
    """
    length = delta * (m - 1)
    for _ in range(3):
        xi = direction.scaled(length)
        path = initialize_path(x, None, m, "geodesic", xi=xi)
        length *= delta / float(path.gaps().max())
    xi = direction.scaled(length)
    if at_limit:
        return initialize_path(x, None, m, "geodesic", xi=xi)
    return initialize_path(x, None, m, "perturbed", xi=xi, sigma=sigma_ratio * delta, seed=seed,
                           stream=(5, index))


def run_spectral_study(n, p, m, delta_list, at_limit, seed=DEFAULT_SEED, complements="transport",
                       compute_rho=False, sigma_ratio=0.25):
    """SpectralReport per delta plus log-log slopes against the measured delta.

    ``slope_lambda`` fits ``|lambda_min(G') - lambda_min(A)|``, ``slope_vEv``
    fits ``|v_min^T E v_min|`` and ``slope_E`` fits ``|E|_2``.
    """
    deltas = [float(d) for d in delta_list]
    if any(d <= 0 for d in deltas):
        raise ValueError("deltas must be positive")
    x = random_point(n, p, seed, stream=3)
    direction = random_tangent(x, 1.0, seed, stream=4)
    reports = []
    for i, d in enumerate(deltas):
        path = spectral_path(x, direction, m, d, at_limit, seed, sigma_ratio, i)
        reports.append(split_A_E(path, complements=complements, compute_rho=compute_rho)[2])
    dx = [r.delta for r in reports]
    return SpectralStudy(
        reports=reports,
        slope_lambda=fit_loglog_slope(dx, [r.lambda_min_Gprime - r.lambda_min_A for r in reports]),
        slope_vEv=fit_loglog_slope(dx, [r.vmin_E_vmin for r in reports]),
        slope_E=fit_loglog_slope(dx, [r.norm_E_actual for r in reports]),
    )


def asymptotic_rate(trace, tail=10):
    """Geometric mean of the last ``tail`` recorded rates."""
    r = trace.rates()
    if r.size == 0:
        return math.nan
    r = r[-tail:]
    return float(np.exp(np.mean(np.log(r))))


__all__ = [
    "CONVERGENCE_M", "DEFAULT_LENGTH", "DEFAULT_SEED", "Problem", "ProblemSpec", "RATE_FLOOR",
    "RateSummary", "SpectralStudy", "TABLE1_M", "asymptotic_rate", "fit_loglog_slope",
    "gen_problem", "initial_path", "run_convergence", "run_leapfrog", "run_rate_table",
    "run_spectral_study", "spectral_path", "summarize_rates", "thread_count",
]
