"""Monte Carlo engine for the DDPM reverse process.

The ensemble is split into fixed-size chunks; chunk ``j`` draws all of its
Gaussian variates from ``mix(seed, j)``. Worker threads take whole chunks,
so the output depends on ``(seed, chunk_size)`` but never on ``threads``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import OVERFLOW_LIMIT, InvalidParameterError, NumericOverflowError
from .schedules import CoefficientDesign, Schedule
from .seeding import mix, rng
from .targets import ScoreOracle


@dataclass(frozen=True)
class ReverseRunConfig:
    schedule: Schedule
    design: CoefficientDesign
    oracle: ScoreOracle
    n: int
    stop_t: int = 1
    seed: int = 0
    record_trajectory: bool = False
    chunk_size: int = 8192
    threads: int = 1

    def validate(self):
        T = self.schedule.T
        if self.design.T != T:
            raise InvalidParameterError(f"design has {self.design.T} steps, schedule has {T}")
        if not 1 <= self.stop_t <= T:
            raise InvalidParameterError(f"stop_t={self.stop_t} outside [1, {T}]")
        if self.n < 1 or self.chunk_size < 1 or self.threads < 1:
            raise InvalidParameterError("n, chunk_size and threads must be >= 1")


@dataclass
class ReverseResult:
    samples: np.ndarray
    stop_t: int
    trajectory: np.ndarray | None = None  # (steps, n, d), row i is t = T - i

    @property
    def trajectory_steps(self) -> np.ndarray:
        if self.trajectory is None:
            return np.empty(0, dtype=int)
        T = self.stop_t + self.trajectory.shape[0] - 1
        return np.arange(T, self.stop_t - 1, -1)


def _run_chunk(cfg: ReverseRunConfig, chunk: int, size: int):
    s, des, oracle = cfg.schedule, cfg.design, cfg.oracle
    g = rng(mix(cfg.seed, chunk))
    d = oracle.d
    y = g.standard_normal((size, d))
    traj = [y.copy()] if cfg.record_trajectory else None
    sigma = des.sigma
    for t in range(s.T, cfg.stop_t, -1):
        i = t - 1
        z = g.standard_normal((size, d))
        y = (y + des.eta[i] * oracle(t, y) + sigma[i] * z) / math.sqrt(s.alpha[i])
        if not np.all(np.abs(y) <= OVERFLOW_LIMIT):
            raise NumericOverflowError(f"reverse iterate exceeded {OVERFLOW_LIMIT:g} at step t={t - 1}")
        if traj is not None:
            traj.append(y.copy())
    return y, (np.stack(traj) if traj is not None else None)


def run_reverse(cfg: ReverseRunConfig) -> ReverseResult:
    """Y_T ~ N(0, I); Y_{t-1} = (Y_t + eta_t s_t(Y_t) + sigma_t Z_t) / sqrt(alpha_t)."""
    cfg.validate()
    sizes = [min(cfg.chunk_size, cfg.n - lo) for lo in range(0, cfg.n, cfg.chunk_size)]
    if cfg.threads == 1 or len(sizes) == 1:
        parts = [_run_chunk(cfg, j, m) for j, m in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(lambda jm: _run_chunk(cfg, *jm), enumerate(sizes)))
    samples = np.concatenate([p[0] for p in parts])
    traj = np.concatenate([p[1] for p in parts], axis=1) if cfg.record_trajectory else None
    return ReverseResult(samples, cfg.stop_t, traj)


class BlockMoments(NamedTuple):
    on_var: float
    off_var: float
    cross_max: float


def _centered(ensemble):
    y = np.asarray(ensemble, dtype=np.float64)
    return y - y.mean(axis=0)


def empirical_block_moments(ensemble, k: int) -> BlockMoments:
    """Mean per-coordinate variance of each block and the largest |cross-block covariance|.

    An empty block reports NaN variance.
    """
    y = _centered(ensemble)
    n, d = y.shape
    if not 0 <= k <= d:
        raise InvalidParameterError(f"k={k} outside [0, {d}]")
    on = float(np.mean(y[:, :k] ** 2)) if k else math.nan
    off = float(np.mean(y[:, k:] ** 2)) if k < d else math.nan
    cross = float(np.max(np.abs(y[:, :k].T @ y[:, k:]) / n)) if 0 < k < d else 0.0
    return BlockMoments(on, off, cross)


def block_moment_stderr(ensemble, k: int) -> BlockMoments:
    """Monte Carlo standard errors matching :func:`empirical_block_moments`.

    The variance errors come from the per-sample block averages of squared
    deviations; the cross-covariance error uses sqrt(on_var * off_var / n),
    which is exact for independent blocks.
    """
    y = _centered(ensemble)
    n, d = y.shape
    sq = y**2
    on = sq[:, :k].mean(axis=1) if k else None
    off = sq[:, k:].mean(axis=1) if k < d else None
    on_se = float(on.std() / math.sqrt(n)) if on is not None else math.nan
    off_se = float(off.std() / math.sqrt(n)) if off is not None else math.nan
    cross_se = math.sqrt(float(on.mean()) * float(off.mean()) / n) if on is not None and off is not None else 0.0
    return BlockMoments(on_se, off_se, cross_se)
