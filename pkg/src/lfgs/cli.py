"""Command-line interface: ``lfgs {log,leapfrog,table1,spectral,selftest}``.

Exit status is 0 on success, 1 on a numerical failure and 2 on a usage
error. Data goes to ``--out`` or standard output, diagnostics to standard
error.
"""

import argparse
import csv
import math
import re
import sys
from contextlib import contextmanager
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import IllPosed, LfgsError, NotConverged, RankDeficient, TooFarApart
from .experiments import (DEFAULT_SEED, TABLE1_M, ProblemSpec, gen_problem, initial_path,
                          run_rate_table, run_spectral_study)
from .geodesics import GAP_GUARD, STOP_TOL, leapfrog_run, log_map_shooting, write_path
from .linalg import format_matrix, read_matrix
from .stiefel import StiefelPoint, exp_map, random_point, random_tangent

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2
NUMERIC_ERRORS = (NotConverged, IllPosed, TooFarApart, RankDeficient)


class UsageError(Exception):
    pass


def parse_length(text):
    """``'2.5'``, ``'0.95pi'`` or ``'pi'``."""
    m = re.fullmatch(r"\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*(pi)?\s*", text)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise argparse.ArgumentTypeError(f"not a length: {text!r}")
    value = float(m.group(1)) if m.group(1) is not None else 1.0
    return value * math.pi if m.group(2) else value


def parse_int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def parse_float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from None


def parse_init(text):
    if text in ("chord", "geodesic"):
        return text, 0.0
    if text.startswith("perturbed:"):
        try:
            sigma = float(text.split(":", 1)[1])
        except ValueError:
            sigma = -1.0
        if sigma >= 0:
            return "perturbed", sigma
    raise argparse.ArgumentTypeError("--init must be chord, geodesic or perturbed:<sigma>")


def _stamp():
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if not math.isfinite(v) else repr(v)


def _problem_args(sp, sweeps=True):
    sp.add_argument("--n", type=int, default=12)
    sp.add_argument("--p", type=int, default=3)
    sp.add_argument("--length", type=parse_length, default=0.95 * math.pi,
                    help="geodesic length, e.g. 2.9 or 0.95pi")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out", default=None, help="output file (default: standard output)")


def build_parser():
    ap = argparse.ArgumentParser(prog="lfgs", description="Leapfrog geodesics on the Stiefel manifold")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("log", help="Riemannian logarithm by single shooting")
    _problem_args(sp)
    sp.add_argument("--x", help="matrix file for the base point")
    sp.add_argument("--y", help="matrix file for the target point")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-iter", type=int, default=100)
    sp.add_argument("--no-guard", action="store_true", help="skip the chordal gap guard")

    sp = sub.add_parser("leapfrog", help="run leapfrog and write the per-sweep trace")
    _problem_args(sp)
    sp.add_argument("--m", type=int, default=10)
    sp.add_argument("--sweeps", type=int, default=300)
    sp.add_argument("--stop-tol", type=float, default=STOP_TOL)
    sp.add_argument("--init", type=parse_init, default=("chord", 0.0))
    sp.add_argument("--unsorted", action="store_true", help="do not sort chord parameters")
    sp.add_argument("--path-out", help="write the final path to this file")

    sp = sub.add_parser("table1", help="reduction-rate statistics over random starts")
    _problem_args(sp)
    sp.add_argument("--m", type=parse_int_list, default=list(TABLE1_M))
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--iters", type=int, default=50)
    sp.add_argument("--stop-tol", type=float, default=STOP_TOL)
    sp.add_argument("--unsorted", action="store_true")
    sp.add_argument("--threads", type=int, default=None, help="overrides LFGS_THREADS")

    sp = sub.add_parser("spectral", help="eigenvalue perturbation study of the block Hessian")
    sp.add_argument("--n", type=int, default=12)
    sp.add_argument("--p", type=int, default=3)
    sp.add_argument("--m", type=int, default=5)
    sp.add_argument("--deltas", type=parse_float_list,
                    default=[float(d) for d in np.logspace(-1, -3, 9)])
    sp.add_argument("--at-limit", action="store_true", help="evaluate on the geodesic itself")
    sp.add_argument("--rho", action="store_true", help="also compute the Gauss-Seidel spectral radius")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out", default=None)

    sub.add_parser("selftest", help="run the built-in invariant checks")
    return ap


def cmd_log(args):
    if (args.x is None) != (args.y is None):
        raise UsageError("--x and --y must be given together")
    if args.x is not None:
        x, y = StiefelPoint(read_matrix(args.x)), StiefelPoint(read_matrix(args.y))
    else:
        x = random_point(args.n, args.p, args.seed, stream=0)
        y = exp_map(x, random_tangent(x, args.length, args.seed, stream=1))
    res = log_map_shooting(x, y, tol=args.tol, max_iter=args.max_iter,
                           gap_guard=None if args.no_guard else GAP_GUARD)
    with _output(args.out) as fh:
        fh.write(f"# distance {res.xi.norm!r} residual {res.residual:.3e} "
                 f"iterations {res.iterations} minimal {res.minimal}\n")
        fh.write(format_matrix(res.xi.ambient))
    print(f"distance {res.xi.norm:.15g} ({res.iterations} iterations)", file=sys.stderr)
    return EXIT_OK


def cmd_leapfrog(args):
    mode, sigma = args.init
    spec = ProblemSpec(n=args.n, p=args.p, m=args.m, target_length=args.length, seed=args.seed,
                       init_mode=mode, sweeps=args.sweeps, stop_tol=args.stop_tol, sigma=sigma,
                       sort=not args.unsorted)
    problem = gen_problem(spec)
    path, trace = leapfrog_run(initial_path(spec, problem), spec.sweeps, stop_tol=spec.stop_tol,
                               reference=problem.reference)
    with _output(args.out) as fh:
        trace.to_csv(fh)
    if args.path_out:
        write_path(args.path_out, path)
    last = trace.err[-1] if trace.err else math.nan
    print(f"{len(trace)} sweeps, termination {trace.termination}, err {last:.3e}", file=sys.stderr)
    return EXIT_OK


def cmd_table1(args):
    if args.trials < 1 or args.iters < 1:
        raise UsageError("--trials and --iters must be positive")
    if any(m < 3 for m in args.m):
        raise UsageError("every m must be at least 3")
    rows = run_rate_table(trials=args.trials, iters=args.iters, m_list=args.m, n=args.n, p=args.p,
                          length=args.length, seed=args.seed, threads=args.threads,
                          sort=not args.unsorted, stop_tol=args.stop_tol)
    with _output(args.out) as fh:
        fh.write(f"# lfgs table1, generated {_stamp()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(rows[0].CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) for v in r.row()])
    for r in rows:
        if r.excluded:
            print(f"m={r.m}: {r.excluded} of {r.trials} trials excluded (ill-posed midpoint)",
                  file=sys.stderr)
    return EXIT_OK


def cmd_spectral(args):
    if not args.deltas or any(d <= 0 for d in args.deltas):
        raise UsageError("--deltas must be positive")
    study = run_spectral_study(args.n, args.p, args.m, args.deltas, args.at_limit, seed=args.seed,
                               compute_rho=args.rho)
    cols = list(study.reports[0].CSV_COLUMNS)
    with _output(args.out) as fh:
        fh.write(f"# lfgs spectral, generated {_stamp()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols + ["slope_lambda", "slope_vEv"])
        for r in study.reports:
            w.writerow([_fmt(v) for v in r.row()] + ["", ""])
        w.writerow([""] * len(cols) + [_fmt(study.slope_lambda), _fmt(study.slope_vEv)])
    print(f"slopes: lambda {study.slope_lambda:.3f}, vEv {study.slope_vEv:.3f}, "
          f"|E| {study.slope_E:.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_selftest(args):
    from .selftest import run_selftest

    return EXIT_OK if run_selftest(sys.stdout) else EXIT_NUMERIC


COMMANDS = {"log": cmd_log, "leapfrog": cmd_leapfrog, "table1": cmd_table1,
            "spectral": cmd_spectral, "selftest": cmd_selftest}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"lfgs {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"lfgs {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"lfgs {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LfgsError as exc:
        print(f"lfgs {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
