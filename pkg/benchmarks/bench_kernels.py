"""Compare the numba and plain numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Kernel timings call both implementations in this process.  The full-matrix
timing runs once per backend in a subprocess, since the backend is chosen
at import time from FAULTSCALE_DISABLE_NUMBA.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from faultscale import _kernels

MATRIX_SNIPPET = """
import time
from faultscale import _kernels
from faultscale.analysis import run_matrix
from faultscale.config import default_config
cfg = default_config(seeds=[1, 2, 3, 4, 5])
run_matrix(default_config(faults="syn", instances="m5.large"))  # warm-up / JIT
t0 = time.perf_counter()
n = len(run_matrix(cfg))
print(_kernels.BACKEND, n, time.perf_counter() - t0)
"""


def _best(stmt, repeat, number):
    return min(timeit.repeat(stmt, repeat=repeat, number=number)) / number


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    shocks = rng.normal(0.0, 0.01, 86_400)
    samples = rng.random((4, 86_400))
    cases = [
        ("ar1_path (86400)", "ar1_path", (0.45, 0.9, shocks)),
        ("channel_max (4x86400)", "channel_max", (samples, 0, samples.shape[1])),
        ("bucket_max (86400, 60)", "bucket_max", (samples[0].copy(), 60)),
    ]
    fast = {"ar1_path": _kernels._ar1_nb, "channel_max": _kernels._channel_max_nb,
            "bucket_max": _kernels._bucket_max_nb}
    print(f"{'kernel':<26}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for label, name, args in cases:
        py = _kernels.PY_KERNELS[name]
        t_py = _best(lambda: py(*args), repeat, 3)
        if _kernels.HAVE_NUMBA:
            fast[name](*args)  # compile
            t_nb = _best(lambda: fast[name](*args), repeat, 20)
            assert np.array_equal(py(*args), fast[name](*args))
            print(f"{label:<26}{t_py * 1e3:>10.3f}{t_nb * 1e3:>10.3f}{t_py / t_nb:>8.1f}x")
        else:
            print(f"{label:<26}{t_py * 1e3:>10.3f}{'-':>10}{'-':>9}")


def bench_matrix():
    print("\nfull matrix, 5 seeds (1080 scenarios)")
    for disable in ("1", "0"):
        env = dict(os.environ, FAULTSCALE_DISABLE_NUMBA=disable)
        out = subprocess.run([sys.executable, "-c", MATRIX_SNIPPET], env=env, capture_output=True, text=True,
                             check=True).stdout.split()
        backend, n, seconds = out[0], int(out[1]), float(out[2])
        print(f"  {backend:<6} {n} scenarios in {seconds:.3f} s")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--skip-matrix", action="store_true")
    args = parser.parse_args(argv)
    print(f"backend in this process: {_kernels.BACKEND}")
    bench_kernels(args.repeat)
    if not args.skip_matrix:
        bench_matrix()


if __name__ == "__main__":
    main()
