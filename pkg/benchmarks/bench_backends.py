"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_backends.py [--nx 240] [--nt 7680] [--repeat 5]

Times the forward march, its transpose, and a full Test-1 epsilon sweep
under each backend, and checks that both backends agree.
"""

import argparse
import time
from contextlib import contextmanager

import numpy as np

from odeheat import _kernels
from odeheat.experiments import load_preset, run_experiment


def random_steps(rng, n, steps):
    lo = -rng.uniform(0.5, 1.0, (steps, n))
    up = -rng.uniform(0.5, 1.0, (steps, n))
    lo[:, 0] = up[:, -1] = 0.0
    di = 4.0 + rng.uniform(0, 1, (steps, n))
    col = 0.1 * rng.normal(size=(steps, n))
    row = 0.1 * rng.normal(size=(steps, n))
    cor = 4.0 + rng.uniform(0, 1, steps)
    return lo, di, up, col, row, cor


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


@contextmanager
def backend(name):
    saved = _kernels.BACKEND
    _kernels.BACKEND = name
    try:
        yield
    finally:
        _kernels.BACKEND = saved


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--nx", type=int, default=240)
    p.add_argument("--nt", type=int, default=7680)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--out", default="/tmp/odeheat-bench")
    args = p.parse_args()

    rng = np.random.default_rng(0)
    A = random_steps(rng, args.nx, args.nt)
    B = random_steps(rng, args.nx, args.nt)
    extra = rng.normal(size=(args.nt, args.nx + 1))
    x0 = rng.normal(size=args.nx + 1)

    # compile outside the timed region
    _kernels.march(A, B, extra, x0, backend="numba")
    _kernels.march_transposed(A, B, x0, backend="numba")

    print(f"march / march_transposed, Nx={args.nx}, Nt={args.nt}, best of {args.repeat}")
    results = {}
    for name in ("numpy", "numba"):
        tf, X = best_of(lambda: _kernels.march(A, B, extra, x0, backend=name), args.repeat)
        tb, (V, _) = best_of(lambda: _kernels.march_transposed(A, B, x0, backend=name), args.repeat)
        results[name] = (X, V)
        print(f"  {name:6s} forward {tf * 1e3:9.2f} ms   transposed {tb * 1e3:9.2f} ms")
    for i, what in enumerate(("forward", "transposed")):
        a, b = results["numba"][i], results["numpy"][i]
        print(f"  max |numba - numpy| / max |numpy| ({what}): {np.abs(a - b).max() / np.abs(b).max():.2e}")

    print("Test-1 epsilon sweep (4 HUM-CG runs, Nx=30, Nt=120)")
    cfg = load_preset("test1")
    for name in ("numpy", "numba"):
        with backend(name):
            t, rows = best_of(lambda: run_experiment(cfg, f"{args.out}/{name}"), max(1, args.repeat // 2))
        print(f"  {name:6s} {t:7.3f} s   N_iter {[r.N_iter for r in rows]}")


if __name__ == "__main__":
    main()
