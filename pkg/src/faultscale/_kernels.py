"""Inner loops, compiled with numba when available.

Set ``FAULTSCALE_DISABLE_NUMBA=1`` to force the plain numpy/Python path.  Both
paths perform the same floating point operations in the same order, so
results are bit-identical between backends.
"""
import os

import numpy as np

_DISABLED = os.environ.get("FAULTSCALE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by FAULTSCALE_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


BACKEND = "numba" if HAVE_NUMBA else "numpy"


def _ar1_py(mean, coef, shocks):
    n = shocks.shape[0]
    out = np.empty(n, dtype=np.float64)
    dev = 0.0
    for k in range(n):
        if k > 0:
            dev = coef * dev + shocks[k]
        out[k] = mean + dev
    return out


def _channel_max_py(samples, lo, hi):
    # samples: (channels, n)
    return samples[:, lo:hi].max(axis=1)


def _bucket_max_py(row, bucket):
    n = row.shape[0]
    nb = (n + bucket - 1) // bucket
    pad = nb * bucket - n
    if pad:
        row = np.concatenate((row, np.full(pad, -np.inf)))
    return row.reshape(nb, bucket).max(axis=1)


@njit(cache=True)
def _ar1_nb(mean, coef, shocks):
    n = shocks.shape[0]
    out = np.empty(n, dtype=np.float64)
    dev = 0.0
    for k in range(n):
        if k > 0:
            dev = coef * dev + shocks[k]
        out[k] = mean + dev
    return out


@njit(cache=True)
def _channel_max_nb(samples, lo, hi):
    c = samples.shape[0]
    out = np.empty(c, dtype=np.float64)
    for i in range(c):
        m = samples[i, lo]
        for k in range(lo + 1, hi):
            v = samples[i, k]
            if v > m:
                m = v
        out[i] = m
    return out


@njit(cache=True)
def _bucket_max_nb(row, bucket):
    n = row.shape[0]
    nb = (n + bucket - 1) // bucket
    out = np.empty(nb, dtype=np.float64)
    for b in range(nb):
        start = b * bucket
        stop = min(start + bucket, n)
        m = row[start]
        for k in range(start + 1, stop):
            if row[k] > m:
                m = row[k]
        out[b] = m
    return out


if HAVE_NUMBA:
    ar1_path, channel_max, bucket_max = _ar1_nb, _channel_max_nb, _bucket_max_nb
else:
    ar1_path, channel_max, bucket_max = _ar1_py, _channel_max_py, _bucket_max_py

PY_KERNELS = {"ar1_path": _ar1_py, "channel_max": _channel_max_py, "bucket_max": _bucket_max_py}
