"""Benchmark the compiled occupation-basis kernels against the numpy fallback.

Run:  python benchmarks/bench_kernels.py [--repeat N]

The hot loops are the second-quantization assembly kernels (state
enumeration with fermionic phases); everything downstream is BLAS-bound
and identical across backends.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from fermidyn import _kernels_py
from fermidyn.basis import sector_basis

try:
    from fermidyn import _kernels as _kernels_cy
except ImportError:
    _kernels_cy = None


CASES = [
    ("creation  M=32 n=3 -> 4", "creation_coo",
     lambda rng: (sector_basis(32, 3), sector_basis(32, 4),
                  rng.standard_normal(32) + 1j * rng.standard_normal(32))),
    ("creation  M=64 n=2 -> 3", "creation_coo",
     lambda rng: (sector_basis(64, 2), sector_basis(64, 3),
                  rng.standard_normal(64) + 1j * rng.standard_normal(64))),
    ("dgamma    M=32 n=3", "dgamma_coo",
     lambda rng: (sector_basis(32, 3),
                  rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32)))),
    ("dgamma    M=64 n=2", "dgamma_coo",
     lambda rng: (sector_basis(64, 2),
                  rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64)))),
    ("pair diag M=64 n=3", "pair_diagonal",
     lambda rng: (sector_basis(64, 3), np.abs(rng.standard_normal(64)))),
    ("embed m=1 M=64 n=2", "embed_coo",
     lambda rng: (sector_basis(64, 1), sector_basis(64, 2),
                  rng.standard_normal((64, 64)) * (rng.random((64, 64)) < 0.1), 0.5)),
    ("embed m=2 M=24 n=3", "embed_coo",
     lambda rng: (sector_basis(24, 2), sector_basis(24, 3),
                  rng.standard_normal((276, 276)) * (rng.random((276, 276)) < 0.02), 0.5)),
    ("[V,a*]    M=64 n=2", "interaction_creation_coo",
     lambda rng: (sector_basis(64, 2), sector_basis(64, 3),
                  rng.standard_normal(64) + 1j * rng.standard_normal(64),
                  np.r_[1.0, 0.5, np.zeros(62)])),
]


def timeit(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    opts = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'python':>10s} {'cython':>10s} {'speedup':>9s}")
    for label, name, build in CASES:
        args = build(rng)
        t_py = timeit(getattr(_kernels_py, name), args, opts.repeat)
        if _kernels_cy is None:
            print(f"{label:28s} {t_py * 1e3:9.2f}ms {'-':>10s} {'-':>9s}")
            continue
        t_cy = timeit(getattr(_kernels_cy, name), args, opts.repeat)
        print(f"{label:28s} {t_py * 1e3:9.2f}ms {t_cy * 1e3:9.2f}ms "
              f"{t_py / t_cy:8.1f}x")


if __name__ == "__main__":
    main()
