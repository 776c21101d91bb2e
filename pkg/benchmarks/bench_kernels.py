"""Time the compiled kernels against their NumPy twins.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel with the median time of each backend, the
speed-up, and the largest absolute difference between their outputs.
"""
import argparse
import timeit

import numpy as np

from lfaa import _kernels_py as py
from lfaa.kernels import compiled_available


def cases(rng):
    x = rng.standard_normal((64, 17, 256))
    shifts = rng.uniform(-12, 12, 17)
    idx = rng.integers(0, 17, (33, 4))
    w = rng.standard_normal((33, 4))
    cols = rng.standard_normal((8, 12, 72, 10, 5, 5))
    return {
        "shear_rows": ((x, shifts), {}),
        "shear_rows_adjoint": ((x, shifts), {}),
        "gather_rows": ((x.transpose(0, 2, 1).reshape(-1, 17), idx, w), {}),
        "col2im": ((cols, 16 + 4, 72 + 4, 1, 1), {}),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not compiled_available():
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return 1
    from lfaa import _kernels as cy

    print(f"{'kernel':<20} {'python ms':>10} {'cython ms':>10} {'speed-up':>9} {'max diff':>10}")
    for name, (a, kw) in cases(np.random.default_rng(args.seed)).items():
        fp, fc = getattr(py, name), getattr(cy, name)
        t_py = np.median(timeit.repeat(lambda: fp(*a, **kw), number=1, repeat=args.repeat)) * 1e3
        t_cy = np.median(timeit.repeat(lambda: fc(*a, **kw), number=1, repeat=args.repeat)) * 1e3
        diff = float(np.max(np.abs(np.asarray(fp(*a, **kw)) - np.asarray(fc(*a, **kw)))))
        print(f"{name:<20} {t_py:>10.3f} {t_cy:>10.3f} {t_py / t_cy:>8.1f}x {diff:>10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
