"""Closed-form laws and KL divergences for the degenerate-Gaussian target.

With the exact score of N(0, I_k) the reverse sampler is linear, so every
X_t and Y_t is a zero-mean Gaussian whose covariance is diagonal with two
blocks: the k on-support coordinates and the d - k off-support ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import (
    OVERFLOW_LIMIT,
    DimensionMismatchError,
    InvalidParameterError,
    NumericOverflowError,
    StepIndexError,
)
from .schedules import CoefficientDesign, Schedule, star_coefficients

_SERIES_CUTOFF = 1e-4


def g_minus_one(u):
    """g(1 + u) = (u - log1p(u)) / 2, accurate down to |u| ~ 1e-300."""
    u = np.asarray(u, dtype=np.float64)
    small = np.abs(u) < _SERIES_CUTOFF
    us = np.where(small, u, 0.0)
    series = us * us * (0.5 - us * (1.0 / 3.0 - us * (0.25 - us * 0.2)))
    ul = np.where(small, 0.0, u)
    direct = ul - np.log1p(ul)
    out = 0.5 * np.where(small, series, direct)
    return float(out) if out.ndim == 0 else out


def g(r):
    """Per-coordinate variance-mismatch KL: (r - log r - 1) / 2."""
    return g_minus_one(np.asarray(r, dtype=np.float64) - 1.0)


def _ratio_excess(num, den):
    """num/den - 1 without first rounding the ratio."""
    return (np.asarray(num, dtype=np.float64) - den) / den


@dataclass(frozen=True, eq=False)
class DiagGaussianLaw:
    """Gaussian on R^d with variance ``on_var`` on the first k coordinates and
    ``off_var`` on the rest. ``mean`` is None for the zero-mean case."""

    k: int
    d: int
    on_var: float
    off_var: float
    mean: np.ndarray | None = None

    def __post_init__(self):
        if not 0 <= self.k <= self.d:
            raise InvalidParameterError(f"need 0 <= k <= d, got k={self.k}, d={self.d}")
        if not (self.on_var > 0 and self.off_var > 0):
            raise InvalidParameterError("block variances must be positive")
        if self.mean is not None:
            m = np.array(self.mean, dtype=np.float64)
            if m.shape != (self.d,):
                raise DimensionMismatchError(f"mean must have shape ({self.d},)")
            m.setflags(write=False)
            object.__setattr__(self, "mean", m)

    @property
    def variances(self) -> np.ndarray:
        v = np.full(self.d, self.off_var)
        v[: self.k] = self.on_var
        return v

    @property
    def mean_vector(self) -> np.ndarray:
        return np.zeros(self.d) if self.mean is None else self.mean

    def logpdf(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64)) - self.mean_vector
        v = self.variances
        return -0.5 * (np.sum(x * x / v, axis=1) + np.sum(np.log(v)) + self.d * math.log(2 * math.pi))

    def sample(self, n: int, g: np.random.Generator) -> np.ndarray:
        return self.mean_vector + g.standard_normal((n, self.d)) * np.sqrt(self.variances)

    def swapped(self) -> "DiagGaussianLaw":
        """Same law with the block order exchanged (k <-> d - k)."""
        mean = None
        if self.mean is not None:
            mean = np.concatenate((self.mean[self.k :], self.mean[: self.k]))
        return DiagGaussianLaw(self.d - self.k, self.d, self.off_var, self.on_var, mean)


def _check_dims(k, d):
    if not 1 <= k <= d:
        raise InvalidParameterError(f"need 1 <= k <= d, got k={k}, d={d}")


def forward_marginal_law(s: Schedule, t: int, k: int, d: int) -> DiagGaussianLaw:
    _check_dims(k, d)
    return DiagGaussianLaw(k, d, 1.0, s.omab(s.check_step(t)))


def propagate_reverse_law(
    s: Schedule,
    design: CoefficientDesign,
    k: int,
    d: int,
    stop_t: int = 1,
    init: DiagGaussianLaw | None = None,
) -> DiagGaussianLaw:
    """Exact law of Y_stop_t under the exact score, starting from N(0, I_d).

    ``init`` overrides the law of Y_T (e.g. with the forward law at T).
    """
    _check_dims(k, d)
    if design.T != s.T:
        raise InvalidParameterError("design and schedule lengths differ")
    s.check_step(stop_t)
    on0, off0 = (1.0, 1.0) if init is None else (init.on_var, init.off_var)
    on, off, failed = kernels.propagate_block_variances(
        s.alpha, s.one_minus_alpha_bar, design.eta, design.sigma2, int(stop_t), on0, off0, OVERFLOW_LIMIT**2
    )
    if failed:
        raise NumericOverflowError(f"reverse law diverged at step t={failed - 1}")
    return DiagGaussianLaw(k, d, on, off)


def diag_gaussian_kl(p: DiagGaussianLaw, q: DiagGaussianLaw) -> float:
    """KL(p || q) for two block-diagonal Gaussians."""
    if (p.k, p.d) != (q.k, q.d):
        raise DimensionMismatchError(f"laws have shapes (k={p.k}, d={p.d}) and (k={q.k}, d={q.d})")
    kl = p.k * g_minus_one(_ratio_excess(p.on_var, q.on_var))
    kl += (p.d - p.k) * g_minus_one(_ratio_excess(p.off_var, q.off_var))
    if p.mean is not None or q.mean is not None:
        diff = p.mean_vector - q.mean_vector
        kl += 0.5 * float(np.sum(diff * diff / q.variances))
    return float(kl)


def _linear_gaussian_kl(mx, vx, my, vy, ex2):
    """E_x KL(N(mx x, vx) || N(my x, vy)) for one coordinate with E[x^2] = ex2."""
    dm = mx - my
    return dm * dm * ex2 / (2.0 * vy) + g_minus_one(_ratio_excess(vx, vy))


class StepKL(NamedTuple):
    on: np.ndarray | float
    off: np.ndarray | float

    @property
    def total(self):
        return self.on + self.off


def step_kl_terms(s: Schedule, design: CoefficientDesign, k: int, d: int, t=None) -> StepKL:
    """Block contributions to the expected conditional KL at steps ``t``.

    ``t`` defaults to every step 2..T. Both conditionals are Gaussian with
    means linear in x_t:

      X side:  on  mean sqrt(a) x,      var 1 - a
               off mean sqrt(a) rho x,  var (1 - a) rho,   rho = (1 - ab_{t-1}) / (1 - ab_t)
      Y side:  on  mean (1 - eta) x / sqrt(a)
               off mean (1 - eta / (1 - ab_t)) x / sqrt(a),  var sigma^2 / a

    and x_t ~ q_t has E[x^2] = 1 on-support and 1 - ab_t off-support.
    """
    _check_dims(k, d)
    if design.T != s.T:
        raise InvalidParameterError("design and schedule lengths differ")
    ts = np.arange(2, s.T + 1) if t is None else np.atleast_1d(np.asarray(t, dtype=int))
    if np.any(ts < 2) or np.any(ts > s.T):
        raise StepIndexError(f"conditional step KL needs 2 <= t <= {s.T}")
    i = ts - 1
    a, beta = s.alpha[i], s.beta[i]
    omab, omab_prev = s.one_minus_alpha_bar[i], s.one_minus_alpha_bar[i - 1]
    eta, sigma2 = design.eta[i], design.sigma2[i]
    if np.any(sigma2 <= 0):
        raise InvalidParameterError("sigma_t = 0 gives an infinite conditional KL")
    sa = np.sqrt(a)
    rho = omab_prev / omab
    vy = sigma2 / a
    on = _linear_gaussian_kl(sa, beta, (1.0 - eta) / sa, vy, 1.0)
    off = _linear_gaussian_kl(sa * rho, beta * rho, (1.0 - eta / omab) / sa, vy, omab)
    on, off = k * on, (d - k) * off
    if t is not None and np.ndim(t) == 0:
        return StepKL(float(on[0]), float(off[0]))
    return StepKL(on, off)


def conditional_step_kl(s: Schedule, design: CoefficientDesign, t: int, k: int, d: int) -> float:
    """E_{x ~ q_t} KL(law of X_{t-1} | X_t = x || law of Y_{t-1} | Y_t = x)."""
    return step_kl_terms(s, design, k, d, int(t)).total


def theorem2_lower_bound(s: Schedule, design: CoefficientDesign, t: int, d: int) -> float:
    """d/4 (eta_t - eta_t*)^2 + d/40 (sigma_t*^2 / sigma_t^2 - 1)^2."""
    t = s.check_step(t)
    if t < 2:
        raise StepIndexError("lower bound is defined for 2 <= t <= T")
    sigma2 = float(design.sigma2[t - 1])
    if sigma2 <= 0:
        raise InvalidParameterError("sigma_t must be positive")
    eta_star, sigma2_star = star_coefficients(s, t)
    deta = float(design.eta[t - 1]) - eta_star
    dvar = (sigma2_star - sigma2) / sigma2
    return d / 4.0 * deta * deta + d / 40.0 * dvar * dvar


class ChainBound(NamedTuple):
    init_kl: float
    step_sum: float
    total: float


def initialization_kl(s: Schedule, k: int, d: int) -> float:
    """KL(q_T || N(0, I_d)); only the off-support block contributes."""
    _check_dims(k, d)
    return float((d - k) * g_minus_one(-s.ab(s.T)))


def chain_kl_upper_bound(s: Schedule, design: CoefficientDesign, k: int, d: int) -> ChainBound:
    init = initialization_kl(s, k, d)
    steps = float(np.sum(step_kl_terms(s, design, k, d).total))
    return ChainBound(init, steps, init + steps)


def terminal_kl(s: Schedule, design: CoefficientDesign, k: int, d: int, stop_t: int = 1) -> float:
    """Exact KL(q_stop || p_stop) between the forward and reverse laws."""
    q = forward_marginal_law(s, stop_t, k, d)
    p = propagate_reverse_law(s, design, k, d, stop_t)
    return diag_gaussian_kl(q, p)
