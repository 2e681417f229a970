"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from a2sbnn import kernels
from a2sbnn.field import make_grid


def cases():
    rng = np.random.default_rng(0)
    p = rng.uniform(1e-12, 1 - 1e-12, 1_000_000)
    t = rng.uniform(size=1_000_000)
    pts = make_grid(32).coords
    cov = kernels.pure.sq_exp_cov(pts, 1.0, 0.2)
    return [
        ("ndtri 1e6", lambda m: m.ndtri(p)),
        ("a2_inv_generator 1e6", lambda m: m.a2_inv_generator(t, 3.0)),
        ("sq_exp_cov 1024x1024", lambda m: m.sq_exp_cov(pts, 1.0, 0.2)),
        ("cholesky 1024", lambda m: m.cholesky_lower(cov, 1e-8)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = [("python", kernels.pure)]
    if kernels.compiled is not None:
        backends.append(("cython", kernels.compiled))
    else:
        print("compiled kernels unavailable; timing the fallback only")
    print(f"{'kernel':<24}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    for label, fn in cases():
        times = [min(timeit.repeat(lambda: fn(m), number=1, repeat=args.repeat)) for _, m in backends]
        speed = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else ""
        print(f"{label:<24}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
