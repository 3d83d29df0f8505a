"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_core.py [--scale 1.0]

Each case runs on both backends, checks that the outputs agree, and reports
wall time and speedup.
"""
import argparse
import math
import time

import numpy as np

from hrwalk._core import _fallback

try:
    from hrwalk._core import _ext
except ImportError:  # extension not built
    _ext = None


def _timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def cases(scale: float):
    geo = (2, math.log(0.5), np.zeros(0))
    table = (3, 0.0, np.array([0.5, 0.8, 0.95, 0.99, 1.0]))
    n_rep = max(10, int(2000 * scale))
    grid = np.exp(-np.linspace(0, 10, max(100, int(4000 * scale)) + 1))
    yield "walk_discrete geometric", "walk_discrete", (*geo, 100, 1, 0, n_rep, 128)
    yield "walk_discrete table", "walk_discrete", (*table, 100, 1, 0, n_rep, 128)
    yield "walk_return_times", "walk_return_times", (*geo, 100.0, 1, 0, n_rep, 128)
    yield "walk_occupation", "walk_occupation", (*geo, np.ones(4), 2, 200.0, 1, 0, n_rep, 128)
    yield "lower_gamma_scaled", "lower_gamma_scaled", (1.5, np.logspace(-3, 3, max(100, int(20000 * scale))))
    yield "renewal_solve", "renewal_solve", (grid, 0.01)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0, help="problem size multiplier")
    args = ap.parse_args(argv)
    if _ext is None:
        raise SystemExit("compiled extension not available; build with `pip install -e .`")
    print(f"{'case':28s} {'cython s':>10s} {'python s':>10s} {'speedup':>9s}  agree")
    for name, fn, fargs in cases(args.scale):
        a, ta = _timed(getattr(_ext, fn), *fargs)
        b, tb = _timed(getattr(_fallback, fn), *fargs)
        a = a if isinstance(a, tuple) else (a,)
        b = b if isinstance(b, tuple) else (b,)
        agree = all(np.allclose(x, y, rtol=1e-10, atol=0) for x, y in zip(a, b))
        print(f"{name:28s} {ta:10.4f} {tb:10.4f} {tb / max(ta, 1e-9):9.1f}  {agree}")


if __name__ == "__main__":
    main()
