"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_backends.py [--repeats 3] [--quick]

Times the LAP solver, a full FLAS sort and a SOM sort on random colors with
each backend, checks that both return the same result, and prints a table.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from gridsort import GridSpec, solve_lap
from gridsort.bench import random_colors
from gridsort.sorters import FlasParams, SomParams, flas_sort, som_sort


def _best_time(fn, repeats: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv: list[str] | None = None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args(argv)

    lap_n = 200 if args.quick else 500
    side = 16 if args.quick else 32
    rng = np.random.default_rng(0)
    costs = rng.random((lap_n, lap_n))
    ds = random_colors(side * side, seed=1)
    spec = GridSpec(side, side)
    cases = [
        (f"lap {lap_n}x{lap_n}", lambda b: solve_lap(costs, backend=b)[1]),
        (f"flas {side}x{side}", lambda b: flas_sort(ds, spec, FlasParams(seed=3), backend=b).cells.tobytes()),
        (f"som {side}x{side}", lambda b: som_sort(ds, spec, SomParams(seed=3, epochs=10), backend=b).cells.tobytes()),
    ]
    print(f"{'case':<16}{'cython s':>11}{'python s':>11}{'speedup':>9}  same")
    for name, fn in cases:
        tc, rc = _best_time(lambda: fn("cython"), args.repeats)
        tp, rp = _best_time(lambda: fn("python"), args.repeats)
        same = rc == rp if not isinstance(rc, float) else abs(rc - rp) <= 1e-9 * max(1.0, abs(rc))
        print(f"{name:<16}{tc:>11.4f}{tp:>11.4f}{tp / tc:>8.1f}x  {'yes' if same else 'NO'}")


if __name__ == "__main__":
    main()
