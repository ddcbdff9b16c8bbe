"""Time the numba kernels against the pure-numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is called once
to trigger compilation, then timed over several repeats; the table reports
the best time per call and checks that both paths agree.
"""

import argparse
import time

import numpy as np

from oicap import _kernels
from oicap.channels import ChannelSpec
from oicap.mi_oracle import _row_entropies, default_x_grid, discretize


def best_time(fn, repeats):
    fn()
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    grid = default_x_grid(1e-2, 4.29)
    w = discretize(ChannelSpec.gaussian(), grid)
    wlogw = _row_entropies(w)
    p0 = np.full(grid.size, 1.0 / grid.size)

    def ba(k):
        return lambda: k.ba_inner(w, wlogw, grid, 1.0, p0.copy(), 1e-300, 200)[1]

    # active-set solves touch only a handful of rows
    rows = np.linspace(0, grid.size - 1, 12).astype(int)
    ws, wlogws, xs = w[rows], wlogw[rows], grid[rows]
    ps = np.full(rows.size, 1.0 / rows.size)

    def ba_small(k):
        return lambda: k.ba_inner(ws, wlogws, xs, 1.0, ps.copy(), 1e-300, 200)[1]

    means = np.linspace(0.5, 60.0, 400)
    ys = np.arange(0.0, 200.0)

    def table(k):
        return lambda: k.log_poisson_table(means, ys)

    samples = np.random.default_rng(0).standard_normal(1 << 22)

    def count(k):
        return lambda: k.count_above(samples, 1.5)

    return [
        ("ba_inner (201x%d, 200 it)" % w.shape[1], ba),
        ("ba_inner (%dx%d, 200 it)" % ws.shape, ba_small),
        ("log_poisson_table (400x200)", table),
        ("count_above (4M samples)", count),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    if _kernels.NUMBA is None:
        print("numba is not importable; only the numpy path is available")
        return
    print(f"{'kernel':32s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}  agree")
    for name, make in cases():
        ref, fast = make(_kernels.NUMPY)(), make(_kernels.NUMBA)()
        agree = np.allclose(ref, fast, rtol=1e-10, atol=1e-12)
        t_np = best_time(make(_kernels.NUMPY), args.repeats)
        t_nb = best_time(make(_kernels.NUMBA), args.repeats)
        print(f"{name:32s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:8.1f}  {agree}")


if __name__ == "__main__":
    main()
