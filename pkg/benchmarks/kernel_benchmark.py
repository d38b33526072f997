#!/usr/bin/env python3
"""Benchmark the compiled convolution kernels against the NumPy fallback.

Runs forward and backward passes on the reconstruction harness's working
shapes and prints a throughput table plus the speedup of the compiled path.

    python benchmarks/kernel_benchmark.py [--repeats 20]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from bioattn.kernels import _conv_py  # noqa: E402

try:
    from bioattn.kernels import _conv_cy
except ImportError:
    _conv_cy = None

SHAPES = [
    # (batch, c_in, h, w, c_out, k) -- the desk benchmark's three conv layers
    (4, 1, 64, 64, 16, 3),
    (4, 16, 64, 64, 16, 3),
    (4, 16, 64, 64, 1, 3),
    (2, 32, 32, 32, 32, 3),
]


def time_case(mod, x, w, b, go, repeats):
    best_f = best_b = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = mod.conv2d_forward(x, w, b, 1, 1)
        best_f = min(best_f, time.perf_counter() - t0)
        t0 = time.perf_counter()
        mod.conv2d_backward(x, w, go, 1, 1)
        best_b = min(best_b, time.perf_counter() - t0)
    return best_f, best_b, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if _conv_cy is None:
        print("compiled kernels not built (python setup.py build_ext --inplace)",
              file=sys.stderr)

    rng = np.random.default_rng(0)
    print(f"{'shape':<28}{'path':<9}{'fwd ms':>9}{'bwd ms':>9}{'fwd GMAC/s':>12}{'bwd GMAC/s':>12}")
    for n, ci, h, wd, co, k in SHAPES:
        x = rng.normal(size=(n, ci, h, wd))
        w = rng.normal(size=(co, ci, k, k))
        b = rng.normal(size=co)
        go = rng.normal(size=(n, co, h, wd))
        macs = n * ci * co * k * k * h * wd
        label = f"{n}x{ci}x{h}x{wd} -> {co}ch"
        results = {}
        for name, mod in [("python", _conv_py)] + ([("cython", _conv_cy)] if _conv_cy else []):
            fwd, bwd, out = time_case(mod, x, w, b, go, args.repeats)
            results[name] = (fwd, bwd, out)
            print(f"{label:<28}{name:<9}{fwd * 1e3:>9.2f}{bwd * 1e3:>9.2f}"
                  f"{macs / fwd / 1e9:>12.2f}{2 * macs / bwd / 1e9:>12.2f}")
        if len(results) == 2:
            diff = np.abs(results["python"][2] - results["cython"][2]).max()
            speedup = results["python"][0] / results["cython"][0]
            print(f"{'':<28}{'':<9}  agree within {diff:.2e}, "
                  f"compiled forward speedup x{speedup:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
