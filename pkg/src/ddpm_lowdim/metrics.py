"""Monte Carlo total-variation estimates between block-diagonal Gaussians."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

from .analytic import DiagGaussianLaw
from .errors import DimensionMismatchError, InvalidParameterError
from .seeding import mix, rng

EXP_CLAMP = 700.0
BATCH_SIZE = 65536


class TvEstimate(NamedTuple):
    value: float
    stderr: float
    n: int


def _log_ratio_batch(p: DiagGaussianLaw, q: DiagGaussianLaw, m: int, seed: int) -> np.ndarray:
    """log q(X) - log p(X) for m draws X ~ p."""
    g = rng(seed)
    if p.mean is None and q.mean is None:
        # the ratio only depends on the two block sums of squares
        k, rest = p.k, p.d - p.k
        out = np.zeros(m)
        if k:
            s_on = p.on_var * g.chisquare(k, m)
            out += 0.5 * s_on * (1.0 / p.on_var - 1.0 / q.on_var) - 0.5 * k * math.log(q.on_var / p.on_var)
        if rest:
            s_off = p.off_var * g.chisquare(rest, m)
            out += 0.5 * s_off * (1.0 / p.off_var - 1.0 / q.off_var) - 0.5 * rest * math.log(q.off_var / p.off_var)
        return out
    x = p.sample(m, g)
    return q.logpdf(x) - p.logpdf(x)


def tv_integrand(log_ratio) -> np.ndarray:
    """(1 - q/p)_+ with the exponent clamped to +-700."""
    return np.maximum(0.0, -np.expm1(np.clip(log_ratio, -EXP_CLAMP, EXP_CLAMP)))


def mc_tv_diag_gaussians(
    p: DiagGaussianLaw,
    q: DiagGaussianLaw,
    n: int,
    seed: int,
    threads: int = 1,
    batch_size: int = BATCH_SIZE,
) -> TvEstimate:
    """Estimate TV(p, q) = E_p[(1 - q/p)_+] from n draws of p.

    Batch j uses seed ``mix(seed, j)``, so the estimate does not depend on
    the number of threads.
    """
    if (p.k, p.d) != (q.k, q.d):
        raise DimensionMismatchError("laws must share (k, d)")
    if n < 100:
        raise InvalidParameterError("need n >= 100 samples")
    sizes = [min(batch_size, n - lo) for lo in range(0, n, batch_size)]

    def work(jm):
        j, m = jm
        return tv_integrand(_log_ratio_batch(p, q, m, mix(seed, j)))

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, enumerate(sizes)))
    else:
        parts = [work(jm) for jm in enumerate(sizes)]
    h = np.concatenate(parts)
    value = float(np.mean(h))
    stderr = float(np.std(h, ddof=1) / math.sqrt(n))
    return TvEstimate(min(max(value, 0.0), 1.0), stderr, n)
