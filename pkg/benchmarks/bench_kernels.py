"""Compiled vs numpy kernels: wall time and bitwise agreement.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from ddpm_lowdim import _pykernels
from ddpm_lowdim.covering import grid_cloud
from ddpm_lowdim.errors import OVERFLOW_LIMIT
from ddpm_lowdim.schedules import build_paper_schedule, simple_design, star_design

try:
    from ddpm_lowdim import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases():
    for r, per_side, eps in ((2, 61, 0.1), (3, 25, 0.05), (2, 101, 0.05)):
        pts = grid_cloud(r, per_side, 50).points
        yield f"greedy_net r={r} n={len(pts)} d=50 eps={eps}", lambda mod, p=pts, e=eps: mod.greedy_net(p, e)
    unif = np.random.default_rng(0).uniform(size=(10_000, 50))
    unif[:, 2:] = 0.0
    yield "greedy_net unit square n=10000 d=50 eps=0.05", lambda mod: mod.greedy_net(unif, 0.05)
    for T in (1000, 100_000):
        s = build_paper_schedule(T)
        for des in (star_design(s), simple_design(s)):
            yield (
                f"propagate T={T} {des.name}",
                lambda mod, s=s, des=des: mod.propagate_block_variances(
                    s.alpha, s.one_minus_alpha_bar, des.eta, des.sigma2, 1, 1.0, 1.0, OVERFLOW_LIMIT**2
                ),
            )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'case':<46} {'numpy s':>10} {'cython s':>10} {'speedup':>8}  identical")
    for name, fn in cases():
        t_py, out_py = best_of(lambda: fn(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:<46} {t_py:>10.4f} {'n/a':>10} {'n/a':>8}  n/a")
            continue
        t_c, out_c = best_of(lambda: fn(_ckernels), args.repeat)
        same = np.array_equal(out_py, out_c) if isinstance(out_py, np.ndarray) else out_py == out_c
        print(f"{name:<46} {t_py:>10.4f} {t_c:>10.4f} {t_py / t_c:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
