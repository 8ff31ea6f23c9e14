"""Hot numeric kernels with optional numba acceleration.

Two code paths exist for every kernel: a numba ``@njit`` version and a
pure-numpy fallback. The fallback is selected when the environment
variable ``DISTPROBE_NUMBA`` is set to ``0``/``false``/``off`` or when
numba is not importable. Both paths agree to floating-point roundoff;
bit-for-bit determinism is guaranteed within a path, not across paths.

``benchmarks/bench_kernels.py`` compares the two paths.
"""

from __future__ import annotations

import math
import os

import numpy as np

_flag = os.environ.get("DISTPROBE_NUMBA", "1").strip().lower()
if _flag in ("0", "false", "off", "no"):
    _want_numba = False
else:
    _want_numba = True

try:
    if _want_numba:
        from numba import njit

        NUMBA_ENABLED = True
    else:
        raise ImportError
except ImportError:
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


_LOG_2PI = math.log(2.0 * math.pi)


@njit(cache=True)
def _kde_log_density_jit(queries, centers, bandwidths):
    q, d = queries.shape
    n = centers.shape[0]
    out = np.empty(q, dtype=np.float64)
    log_n = math.log(n)
    comp = np.empty(n, dtype=np.float64)
    for k in range(q):
        best = -np.inf
        for i in range(n):
            acc = 0.0
            for j in range(d):
                u = (queries[k, j] - centers[i, j]) / bandwidths[i, j]
                acc += -0.5 * u * u - math.log(bandwidths[i, j]) - 0.5 * _LOG_2PI
            comp[i] = acc
            if acc > best:
                best = acc
        s = 0.0
        for i in range(n):
            s += math.exp(comp[i] - best)
        out[k] = best + math.log(s) - log_n
    return out


def _kde_log_density_np(queries, centers, bandwidths):
    # chunked so the [chunk, n, d] broadcast stays small
    q = queries.shape[0]
    n = centers.shape[0]
    out = np.empty(q, dtype=np.float64)
    log_norm = np.sum(np.log(bandwidths), axis=1) + 0.5 * _LOG_2PI * centers.shape[1]
    chunk = max(1, int(4e6) // max(1, n * centers.shape[1]))
    for start in range(0, q, chunk):
        block = queries[start : start + chunk]
        u = (block[:, None, :] - centers[None, :, :]) / bandwidths[None, :, :]
        comp = -0.5 * np.sum(u * u, axis=2) - log_norm[None, :]
        best = comp.max(axis=1)
        s = np.sum(np.exp(comp - best[:, None]), axis=1)
        out[start : start + chunk] = best + np.log(s) - math.log(n)
    return out


def kde_log_density_many(
    queries: np.ndarray, centers: np.ndarray, bandwidths: np.ndarray
) -> np.ndarray:
    """Log of a diagonal-Gaussian mixture density (uniform weights) at each query row."""
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    bandwidths = np.ascontiguousarray(bandwidths, dtype=np.float64)
    if NUMBA_ENABLED:
        return _kde_log_density_jit(queries, centers, bandwidths)
    return _kde_log_density_np(queries, centers, bandwidths)


@njit(cache=True)
def _min_cross_linf_jit(flat, labels):
    n, d = flat.shape
    best = np.inf
    for a in range(n):
        la = labels[a]
        for b in range(a + 1, n):
            if labels[b] == la:
                continue
            dist = 0.0
            for j in range(d):
                diff = abs(flat[a, j] - flat[b, j])
                if diff > dist:
                    dist = diff
                    if dist >= best:
                        break
            if dist < best:
                best = dist
    return best


def _min_cross_linf_np(flat, labels):
    n = flat.shape[0]
    best = np.inf
    for a in range(n - 1):
        rest = slice(a + 1, n)
        mask = labels[rest] != labels[a]
        if not mask.any():
            continue
        dists = np.max(np.abs(flat[rest][mask] - flat[a]), axis=1)
        m = dists.min()
        if m < best:
            best = m
    return float(best)


def min_cross_class_linf(flat: np.ndarray, labels: np.ndarray) -> float:
    """Minimum L-infinity distance over all pairs of rows with different labels."""
    flat = np.ascontiguousarray(flat, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if NUMBA_ENABLED:
        return float(_min_cross_linf_jit(flat, labels))
    return _min_cross_linf_np(flat, labels)
