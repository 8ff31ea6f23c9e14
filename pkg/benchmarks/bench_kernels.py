"""Compare the numba and pure-numpy kernel paths.

Run twice, once per path:

    python3 benchmarks/bench_kernels.py
    DISTPROBE_NUMBA=0 python3 benchmarks/bench_kernels.py

or let this script spawn itself with the flag flipped (default) and
print both timings side by side.
"""

from __future__ import annotations

import os
import subprocess
import sys
import time

import numpy as np


def _timings() -> dict:
    from distprobe import kernels

    rng = np.random.Generator(np.random.PCG64(7))
    out = {"numba": kernels.NUMBA_ENABLED}

    centers = rng.normal(size=(2000, 8))
    bw = rng.uniform(0.3, 1.2, size=(2000, 8))
    queries = rng.normal(size=(500, 8))
    kernels.kde_log_density_many(queries[:2], centers, bw)  # warm the JIT
    t0 = time.perf_counter()
    for _ in range(5):
        kernels.kde_log_density_many(queries, centers, bw)
    out["kde_log_density_s"] = (time.perf_counter() - t0) / 5

    flat = rng.uniform(size=(600, 256))
    labels = rng.integers(0, 3, size=600)
    kernels.min_cross_class_linf(flat[:20], labels[:20])
    t0 = time.perf_counter()
    for _ in range(3):
        kernels.min_cross_class_linf(flat, labels)
    out["min_cross_linf_s"] = (time.perf_counter() - t0) / 3
    return out


def main() -> int:
    if len(sys.argv) > 1 and sys.argv[1] == "--single":
        t = _timings()
        print(f"{'numba' if t['numba'] else 'numpy'},"
              f"{t['kde_log_density_s']!r},{t['min_cross_linf_s']!r}")
        return 0

    rows = []
    for flag in ("1", "0"):
        env = dict(os.environ, DISTPROBE_NUMBA=flag)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--single"],
            env=env, capture_output=True, text=True, check=True,
        )
        rows.append(proc.stdout.strip().split(","))

    print(f"{'path':<8} {'kde_log_density':>18} {'min_cross_linf':>18}")
    for name, kde_s, linf_s in rows:
        print(f"{name:<8} {float(kde_s):>16.4f}s {float(linf_s):>16.4f}s")
    if rows[0][0] == rows[1][0]:
        print("note: numba unavailable; both runs used the numpy path")
    else:
        speedup = float(rows[1][1]) / float(rows[0][1])
        print(f"kde kernel speedup: {speedup:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
