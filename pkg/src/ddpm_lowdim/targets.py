"""Analytic targets with exact forward marginals, posterior means and scores.

Two families are supported:

``DegenerateGaussian(k, d)``
    N(0, I_k) embedded in R^d: the last ``d - k`` coordinates are zero.
``PointMixture(atoms, weights)``
    A finite mixture of point masses, so every noised marginal is a
    Gaussian mixture with equal isotropic component variances.

All functions that take a step index ``t`` require ``1 <= t <= T``; the
degenerate Gaussian has no density at t = 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import InvalidParameterError
from .schedules import Schedule
from .seeding import mix, rng

LOG_2PI = math.log(2.0 * math.pi)


def _as_rows(x, d):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != d:
        raise InvalidParameterError(f"expected points in R^{d}, got shape {x.shape}")
    return x, single


@dataclass(frozen=True)
class DegenerateGaussian:
    k: int
    d: int

    def __post_init__(self):
        if not 1 <= self.k <= self.d:
            raise InvalidParameterError(f"need 1 <= k <= d, got k={self.k}, d={self.d}")

    @property
    def variant(self) -> str:
        return "DegenerateGaussian"

    def sample_x0(self, n: int, seed: int) -> np.ndarray:
        x = np.zeros((n, self.d))
        x[:, : self.k] = rng(seed).standard_normal((n, self.k))
        return x

    def block_variances(self, s: Schedule, t: int) -> tuple[float, float]:
        """(on-support, off-support) marginal variance of X_t."""
        s.check_step(t)
        return 1.0, s.omab(t)

    def log_density(self, s: Schedule, t: int, x):
        x, single = _as_rows(x, self.d)
        on, off = self.block_variances(s, t)
        k = self.k
        quad = np.sum(x[:, :k] ** 2, axis=1) / on + np.sum(x[:, k:] ** 2, axis=1) / off
        norm = k * math.log(on) + (self.d - k) * math.log(off) + self.d * LOG_2PI
        out = -0.5 * (quad + norm)
        return float(out[0]) if single else out

    def posterior_mean(self, s: Schedule, t: int, x):
        x, single = _as_rows(x, self.d)
        s.check_step(t)
        out = np.zeros_like(x)
        out[:, : self.k] = math.sqrt(s.ab(t)) * x[:, : self.k]
        return out[0] if single else out

    def exact_score(self, s: Schedule, t: int, x):
        x, single = _as_rows(x, self.d)
        s.check_step(t)
        out = np.empty_like(x)
        out[:, : self.k] = -x[:, : self.k]
        out[:, self.k :] = -x[:, self.k :] / s.omab(t)
        return out[0] if single else out


@dataclass(frozen=True, eq=False)
class PointMixture:
    atoms: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=np.float64)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        w = np.array(self.weights, dtype=np.float64)
        if atoms.ndim != 2 or w.shape != (atoms.shape[0],):
            raise InvalidParameterError("atoms must be (m, d) with one weight per atom")
        if not np.all(np.isfinite(atoms)):
            raise InvalidParameterError("atoms must be finite")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidParameterError("weights must be positive and sum to 1")
        atoms.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "log_weights", np.log(w))

    @property
    def variant(self) -> str:
        return "PointMixture"

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    @property
    def k(self) -> int:
        return self.atoms.shape[0]

    @property
    def R(self) -> float:
        return float(np.max(np.linalg.norm(self.atoms, axis=1)))

    def sample_x0(self, n: int, seed: int) -> np.ndarray:
        idx = rng(seed).choice(self.k, size=n, p=self.weights)
        return self.atoms[idx].copy()

    def _component_logits(self, s: Schedule, t: int, x):
        # log w_i - |x - sqrt(ab) x_i|^2 / (2 (1 - ab)), plus the residuals
        sab, omab = math.sqrt(s.ab(t)), s.omab(t)
        resid = x[:, None, :] - sab * self.atoms[None, :, :]
        logits = self.log_weights[None, :] - 0.5 * np.einsum("nmd,nmd->nm", resid, resid) / omab
        return logits, resid

    def log_density(self, s: Schedule, t: int, x):
        x, single = _as_rows(x, self.d)
        s.check_step(t)
        logits, _ = self._component_logits(s, t, x)
        out = logsumexp(logits, axis=1) - 0.5 * self.d * (LOG_2PI + math.log(s.omab(t)))
        return float(out[0]) if single else out

    def posterior_mean(self, s: Schedule, t: int, x):
        x, single = _as_rows(x, self.d)
        s.check_step(t)
        logits, _ = self._component_logits(s, t, x)
        out = softmax(logits, axis=1) @ self.atoms
        return out[0] if single else out

    def exact_score(self, s: Schedule, t: int, x):
        """Posterior-weighted average of the component scores."""
        x, single = _as_rows(x, self.d)
        s.check_step(t)
        logits, resid = self._component_logits(s, t, x)
        post = softmax(logits, axis=1)
        out = -np.einsum("nm,nmd->nd", post, resid) / s.omab(t)
        return out[0] if single else out


TargetDistribution = DegenerateGaussian | PointMixture


def load_point_mixture_csv(path, normalize: bool = False) -> PointMixture:
    """Read atoms from CSV: one atom per row, ``weight, x_1, ..., x_d``.

    Rows starting with ``#`` and a non-numeric header row are skipped.
    """
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if rows:
                    raise
    if not rows:
        raise InvalidParameterError(f"no atoms in {path}")
    data = np.array(rows)
    w = data[:, 0]
    if normalize:
        w = w / w.sum()
    return PointMixture(data[:, 1:], w)


# module-level forms of the target operations


def sample_x0(target, n: int, seed: int) -> np.ndarray:
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    return target.sample_x0(n, seed)


def forward_marginal_sample(target, s: Schedule, t: int, n: int, seed: int) -> np.ndarray:
    """Rows of sqrt(ab_t) X_0 + sqrt(1 - ab_t) W."""
    t = s.check_step(t)
    x0 = sample_x0(target, n, mix(seed, 0))
    w = rng(mix(seed, 1)).standard_normal((n, target.d))
    return math.sqrt(s.ab(t)) * x0 + math.sqrt(s.omab(t)) * w


def log_density(target, s: Schedule, t: int, x):
    return target.log_density(s, t, x)


def posterior_mean(target, s: Schedule, t: int, x):
    return target.posterior_mean(s, t, x)


def exact_score(target, s: Schedule, t: int, x):
    return target.exact_score(s, t, x)


class ScoreOracle:
    """Deterministic map (t, x) -> s_t(x) for batched x of shape (n, d)."""

    def __init__(self, fn: Callable, d: int, label: str = "exact", eps: float = 0.0, seed: int | None = None):
        self._fn = fn
        self.d = d
        self.label = label
        self.eps = eps
        self.seed = seed

    def __call__(self, t: int, x):
        return self._fn(t, x)

    def __repr__(self):
        return f"ScoreOracle(label={self.label!r}, eps={self.eps}, seed={self.seed})"


def exact_oracle(target, s: Schedule) -> ScoreOracle:
    return ScoreOracle(lambda t, x: target.exact_score(s, t, x), target.d, label="exact")


PERTURBATION_MODELS = ("constant-bias", "random-field")


def make_perturbed_oracle(target, s: Schedule, eps: float, model: str = "constant-bias", seed: int = 0) -> ScoreOracle:
    """Exact score plus an error field with ``|e_t(x)| = eps`` everywhere.

    Since the error norm is ``eps`` pointwise, the averaged score error
    equals ``eps`` under any law for X_t.
    """
    if not eps >= 0:
        raise InvalidParameterError("eps must be nonnegative")
    if model not in PERTURBATION_MODELS:
        raise InvalidParameterError(f"unknown perturbation model {model!r}")
    if eps == 0:
        oracle = exact_oracle(target, s)
        oracle.seed = seed
        return oracle
    g = rng(seed)
    u = g.standard_normal((s.T, target.d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = None
    if model == "random-field":
        v = g.standard_normal((s.T, target.d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)

    def fn(t, x):
        exact = target.exact_score(s, t, x)
        if v is None:
            return exact + eps * u[t - 1]
        sign = np.where(np.asarray(x) @ v[t - 1] >= 0.0, 1.0, -1.0)
        return exact + eps * np.multiply.outer(sign, u[t - 1])

    return ScoreOracle(fn, target.d, label="perturbed", eps=eps, seed=seed)

