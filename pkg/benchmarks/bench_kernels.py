"""Benchmark the compiled integration kernels against the pure-NumPy fallback.

Run from the repository root after installing the package:

    python3 benchmarks/bench_kernels.py

Both backends implement identical contracts (see ``lrkb._kernels_py``); this
script times the subspace-flow and Riccati RK4 loops on representative sizes
and reports the speedup of the compiled extension.
"""

import time

import numpy as np

from lrkb import _kernels_py

try:
    from lrkb import _kernels as compiled
except ImportError:
    compiled = None


def _time(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_oja(n, r, steps, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    m = rng.standard_normal((n, r))
    q, rr = np.linalg.qr(m)
    u0 = np.ascontiguousarray(q * np.sign(np.diag(rr)))
    h = 0.05 / np.linalg.norm(a, 2)
    args = (np.ascontiguousarray(a), u0, h, steps, 0.0, steps)
    return args


def bench_riccati(n, steps, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) - n * np.eye(n)
    g = rng.standard_normal((n, n))
    c = rng.standard_normal((max(1, n // 2), n))
    q = g @ g.T
    s = c.T @ c
    return (a, q, s, np.eye(n), 1e-3, steps, 0.0, steps)


def main():
    if compiled is None:
        print("compiled extension not available; nothing to compare")
        return
    rows = []
    for n, r, steps in [(10, 2, 5000), (20, 3, 5000), (40, 5, 2000)]:
        args = bench_oja(n, r, steps)
        tc = _time(compiled.oja_rk4, *args)
        tp = _time(_kernels_py.oja_rk4, *args)
        rows.append((f"subspace flow n={n} r={r} ({steps} steps)", tc, tp))
    for n, steps in [(8, 5000), (16, 5000), (32, 2000)]:
        args = bench_riccati(n, steps)
        tc = _time(compiled.riccati_rk4, *args)
        tp = _time(_kernels_py.riccati_rk4, *args)
        rows.append((f"Riccati ODE n={n} ({steps} steps)", tc, tp))
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  compiled    python      speedup")
    for name, tc, tp in rows:
        print(f"{name:<{width}}  {tc * 1e3:8.1f}ms  {tp * 1e3:8.1f}ms  {tp / tc:6.1f}x")


if __name__ == "__main__":
    main()
