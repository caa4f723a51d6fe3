"""Benchmark the compiled conv kernels against the numpy reference.

Usage: python benchmarks/bench_kernels.py [repeats]
"""

import sys
import time

import numpy as np

from coala.engine.kernels import reference

try:
    from coala.engine.kernels import _fast
except ImportError:
    _fast = None

CASES = [
    ("encoder block 1", (32, 1, 96, 96), 4, 4, 2, 2, 1, 1),
    ("encoder block 2", (32, 128, 48, 48), 4, 4, 2, 2, 1, 1),
    ("encoder block 4", (32, 128, 12, 12), 4, 4, 2, 2, 1, 1),
]


def bench(fn, args, repeats):
    fn(*args)                                     # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 5
    rng = np.random.default_rng(0)
    print(f"{'case':<18} {'op':<8} {'reference':>12} {'compiled':>12} {'speedup':>9}")
    for name, shape, kh, kw, sh, sw, ph, pw in CASES:
        x = rng.standard_normal(shape).astype(np.float32)
        args = (x, kh, kw, sh, sw, ph, pw)
        t_ref = bench(reference.im2col, args, repeats)
        row = f"{name:<18} {'im2col':<8} {t_ref * 1e3:>10.2f}ms"
        if _fast is not None:
            t_fast = bench(_fast.im2col, args, repeats)
            row += f" {t_fast * 1e3:>10.2f}ms {t_ref / t_fast:>8.1f}x"
        else:
            row += f" {'n/a':>12} {'':>9}"
        print(row)

        b, c, h, w = shape
        ho = (h + 2 * ph - kh) // sh + 1
        wo = (w + 2 * pw - kw) // sw + 1
        cols = rng.standard_normal((b, c * kh * kw, ho * wo)).astype(np.float32)
        cargs = (cols, c, h, w, kh, kw, sh, sw, ph, pw)
        t_ref = bench(reference.col2im, cargs, repeats)
        row = f"{name:<18} {'col2im':<8} {t_ref * 1e3:>10.2f}ms"
        if _fast is not None:
            t_fast = bench(_fast.col2im, cargs, repeats)
            row += f" {t_fast * 1e3:>10.2f}ms {t_ref / t_fast:>8.1f}x"
        else:
            row += f" {'n/a':>12} {'':>9}"
        print(row)
    if _fast is None:
        print("\ncompiled extension not built; showing reference timings only")


if __name__ == "__main__":
    main()
