"""Benchmark the compiled kernels against the pure-numpy fallback.

Run:  python benchmarks/bench_kernels.py [--repeats 5]

Covers the two hot loops: bilinear homography warps (ingest cost) and
weighted edit distances (store-scan cost).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from platefind import _kernels_py
from platefind.matching import ConfusionTable, encode_plate
from platefind.model import PLATE_ALPHABET

try:
    from platefind import _kernels

    IMPLS = {"cython": _kernels, "pure": _kernels_py}
except ImportError:
    IMPLS = {"pure": _kernels_py}


def bench_warp(impl, repeats: int) -> float:
    rng = np.random.default_rng(0)
    src = rng.uniform(0, 255, size=(180, 260))
    hinv = np.array([[1.1, 0.02, 4.0], [0.01, 0.95, 2.0], [1e-4, -5e-5, 1.0]])
    start = time.perf_counter()
    for _ in range(repeats):
        for _ in range(40):
            impl.warp_bilinear_gray(src, hinv, 240, 80)
    return (time.perf_counter() - start) / repeats


def bench_levenshtein(impl, repeats: int) -> float:
    rng = np.random.default_rng(1)
    table = ConfusionTable()
    pairs = []
    for _ in range(4000):
        a = "".join(PLATE_ALPHABET[i] for i in rng.integers(0, 36, size=9))
        b = "".join(PLATE_ALPHABET[i] for i in rng.integers(0, 36, size=9))
        pairs.append((encode_plate(a), encode_plate(b)))
    start = time.perf_counter()
    for _ in range(repeats):
        for ca, cb in pairs:
            impl.weighted_levenshtein(ca, cb, table.matrix, 1.0)
    return (time.perf_counter() - start) / repeats


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"{'kernel':<24}" + "".join(f"{name:>12}" for name in IMPLS))
    rows = {
        "warp 40x (260x180)": bench_warp,
        "levenshtein 4000 pairs": bench_levenshtein,
    }
    for label, fn in rows.items():
        times = {name: fn(impl, args.repeats) for name, impl in IMPLS.items()}
        cells = "".join(f"{1e3 * times[name]:>10.1f}ms" for name in IMPLS)
        print(f"{label:<24}{cells}", end="")
        if len(times) == 2:
            print(f"   ({times['pure'] / times['cython']:.1f}x speedup)")
        else:
            print()


if __name__ == "__main__":
    main()
