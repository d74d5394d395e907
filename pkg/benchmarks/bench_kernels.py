"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--size 256] [--repeat 20]

Reports the best-of-N wall time per kernel and backend, the speedup, and a
whole fuse_pair call on each backend. Outputs are checked to be identical.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from ctxfuse import kernels
from ctxfuse.fusion import FusionProfile, fuse_pair
from ctxfuse.imagecore import Image


def best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(size: int, rng):
    x = rng.standard_normal((size, size))
    taps = 8
    idx = (np.arange(size // 2)[:, None] * 2 + np.arange(taps)[None, :]) % size
    w = rng.standard_normal((size // 2, taps))
    labels = rng.integers(0, 2, size=(size, size)).astype(np.uint8)
    return {
        "filter_rows": lambda k: k.filter_rows(x, idx, w),
        "box_sum": lambda k: k.box_sum(x * x, 3),
        "majority3": lambda k: k.majority3(labels),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    names = sorted(kernels.BACKENDS)
    if "compiled" not in names:
        print("compiled kernels not built; timing the NumPy backend only")
    print(f"{'kernel':<12}" + "".join(f"{n:>14}" for n in names) + ("   speedup" if len(names) > 1 else ""))

    rows = dict(cases(args.size, rng))
    a = Image.from_array(rng.integers(0, 256, (args.size, args.size)), 8)
    b = Image.from_array(rng.integers(0, 256, (args.size, args.size)), 8)
    profile = FusionProfile("high", "db4", 3, 8, 3, 1.0)
    rows["fuse_pair"] = lambda k: fuse_pair(a, b, profile)

    for name, fn in rows.items():
        times, outs = {}, {}
        for backend in names:
            kernels.use(backend)
            outs[backend] = fn(kernels)
            times[backend] = best_of(lambda: fn(kernels), args.repeat)
        first = outs[names[0]]
        first = first.pixels if hasattr(first, "pixels") else first
        for backend in names[1:]:
            other = outs[backend].pixels if hasattr(outs[backend], "pixels") else outs[backend]
            assert np.array_equal(first, other), f"{name}: backends disagree"
        line = f"{name:<12}" + "".join(f"{times[n] * 1e3:>11.3f} ms" for n in names)
        if len(names) > 1:
            line += f"   {times['pure'] / times['compiled']:7.2f}x"
        print(line)
    kernels.use("compiled" if "compiled" in names else "pure")


if __name__ == "__main__":
    main()
