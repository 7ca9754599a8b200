"""Time the compiled kernels against the NumPy reference implementation.

    python benchmarks/bench_kernels.py [--repeat 200]
"""

import argparse
import timeit

import numpy as np

from lfgs._kernels import _pycore

try:
    from lfgs._kernels import _core
except ImportError:
    _core = None

from lfgs.stiefel import exp_map, random_point, random_tangent


def cases():
    for n, p, length in [(12, 3, 1.4), (6, 2, 1.0), (30, 5, 1.0)]:
        x = random_point(n, p, 0)
        y = exp_map(x, random_tangent(x, length, 0))
        yield f"St({n},{p})", x.mat.copy(), y.mat.copy()


def bench(fn, repeat):
    t = timeit.repeat(fn, number=1, repeat=repeat)
    return min(t), float(np.median(t))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    backends = [("python", _pycore)] + ([("cython", _core)] if _core is not None else [])
    if _core is None:
        print("compiled extension not built; timing the Python backend only")
    print(f"{'kernel':<10}{'case':<10}" + "".join(f"{name + ' med (us)':>20}" for name, _ in backends)
          + ("    speedup" if len(backends) == 2 else ""))
    for label, x, y in cases():
        k = np.zeros((x.shape[0], x.shape[0]))
        k[:x.shape[1], :x.shape[1]] = 0.3 * (x.T @ y - y.T @ x)
        jobs = {
            "expm": lambda mod: mod.expm(k),
            "shoot": lambda mod: mod.shoot(x, y, 1e-10, 100, 1e-7),
            "midpoint": lambda mod: mod.midpoint(x, y, 1e-13, 100, 1e-7),
        }
        for name, job in jobs.items():
            meds = [bench(lambda: job(mod), args.repeat)[1] * 1e6 for _, mod in backends]
            line = f"{name:<10}{label:<10}" + "".join(f"{v:>20.1f}" for v in meds)
            if len(meds) == 2:
                line += f"{meds[0] / meds[1]:>10.1f}x"
            print(line)


if __name__ == "__main__":
    main()
