"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times each kernel at a few sizes plus two end-to-end estimators, and prints
one row per (task, size) with the best time of each backend.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from nctrunc import _kernels

SIZES = (10_000, 1_000_000, 10_000_000)


def kernel_rows(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n in SIZES:
        x = rng.uniform(-1, 1, n)
        keys = np.sort(rng.integers(0, n // 8 + 1, n)).astype(float)
        delta = rng.normal(size=min(n, 4_000_000))
        for task, call in (
            ("compensated_cumsum", lambda k: k["compensated_cumsum"](x)),
            ("compensated_sum", lambda k: k["compensated_sum"](x)),
            ("eigenspace_ends", lambda k: k["eigenspace_ends"](keys)),
            ("flow_kernel", lambda k: k["flow_kernel"](delta, 10.0)),
        ):
            times = {}
            for name in _kernels.BACKENDS:
                k = _kernels.get_kernels(name)
                call(k)  # compile / warm up
                times[name] = min(timeit.repeat(lambda: call(k), number=1, repeat=repeat))
            rows.append((task, n, times))
    return rows


_E2E = """
import time
from nctrunc import circle_model, nc_torus_model, integrals
c = circle_model(); t = nc_torus_model(2)
integrals.log_mean_diagonal(c, c.proj_pos(), [1000, 10000])
t0 = time.perf_counter()
integrals.log_mean_diagonal(c, c.proj_pos())
integrals.dixmier_diagonal(t, t.identity())
integrals.heat_integral(c, c.identity())
print(time.perf_counter() - t0)
"""


def e2e_rows(repeat):
    times = {}
    for name in _kernels.BACKENDS:
        env = dict(os.environ, NCTRUNC_BACKEND=name)
        runs = [
            float(subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True,
                                 text=True, check=True).stdout)
            for _ in range(max(1, repeat // 2))
        ]
        times[name] = min(runs)
    return [("estimators end-to-end", 0, times)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    names = _kernels.BACKENDS
    print(f"{'task':<24}{'size':>11}" + "".join(f"{n:>12}" for n in names) + f"{'ratio':>9}")
    for task, n, times in kernel_rows(args.repeat) + e2e_rows(args.repeat):
        cells = "".join(f"{times[b] * 1e3:>10.2f}ms" for b in names)
        ratio = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        print(f"{task:<24}{n or '-':>11}{cells}{ratio:>8.2f}x")


if __name__ == "__main__":
    main()
