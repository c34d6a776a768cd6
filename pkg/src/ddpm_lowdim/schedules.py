"""Noise schedules and reverse-sampler coefficient designs.

Step indices are 1-based in every public signature (t = 1..T); the arrays
are stored 0-based, so step t lives at position ``t - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, StepIndexError


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Schedule:
    """beta/alpha/alpha_bar arrays of a T-step forward process.

    ``one_minus_alpha_bar`` is kept separately, computed as
    ``-expm1(cumsum(log1p(-beta)))``, because ``1 - alpha_bar`` is needed
    at steps where ``alpha_bar`` is within 1e-6 of one.
    """

    beta: np.ndarray
    name: str = "custom"
    alpha: np.ndarray = field(init=False)
    alpha_bar: np.ndarray = field(init=False)
    one_minus_alpha_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        beta = _frozen(self.beta)
        if beta.ndim != 1 or beta.size < 2:
            raise InvalidParameterError("schedule needs at least two steps")
        if not np.all((beta > 0.0) & (beta < 1.0)):
            raise InvalidParameterError("every beta_t must lie in (0, 1)")
        alpha = 1.0 - beta
        log_alpha = np.log1p(-beta)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", _frozen(alpha))
        object.__setattr__(self, "alpha_bar", _frozen(np.cumprod(alpha)))
        object.__setattr__(self, "one_minus_alpha_bar", _frozen(-np.expm1(np.cumsum(log_alpha))))

    @property
    def T(self) -> int:
        return int(self.beta.size)

    def alpha_bar_logspace(self) -> np.ndarray:
        # Kahan-compensated running sum; plain cumsum drifts ~1e-12 once log(ab) ~ -600
        logs = np.log1p(-self.beta).tolist()
        out = np.empty(len(logs))
        total = comp = 0.0
        for i, x in enumerate(logs):
            y = x - comp
            nxt = total + y
            comp = (nxt - total) - y
            total = nxt
            out[i] = total
        return np.exp(out)

    def check_step(self, t: int, first: int = 1) -> int:
        t = int(t)
        if not first <= t <= self.T:
            raise StepIndexError(f"step t={t} outside [{first}, {self.T}]")
        return t

    # scalar accessors, 1-based
    def a(self, t: int) -> float:
        return float(self.alpha[self.check_step(t) - 1])

    def ab(self, t: int) -> float:
        """alpha_bar at step t, with ab(0) = 1."""
        if t == 0:
            return 1.0
        return float(self.alpha_bar[self.check_step(t) - 1])

    def omab(self, t: int) -> float:
        """1 - alpha_bar at step t, with omab(0) = 0."""
        if t == 0:
            return 0.0
        return float(self.one_minus_alpha_bar[self.check_step(t) - 1])

    def __repr__(self):
        return f"Schedule(name={self.name!r}, T={self.T})"


def build_paper_schedule(T: int, c0: float = 2.0, c1: float = 4.0) -> Schedule:
    """Geometric warm-up from ``T**-c0`` that saturates at ``c1 log T / T``."""
    if int(T) != T or T < 2:
        raise InvalidParameterError(f"T must be an integer >= 2, got {T}")
    if not (c0 > 0 and c1 > 0):
        raise InvalidParameterError("c0 and c1 must be positive")
    T = int(T)
    h = c1 * math.log(T) / T
    beta = np.empty(T)
    beta[0] = float(T) ** (-c0)
    t = np.arange(1, T, dtype=np.float64)
    beta[1:] = h * np.minimum(beta[0] * np.power(1.0 + h, t), 1.0)
    return Schedule(beta, name="paper")


def build_linear_schedule(T: int, beta_min: float = 1e-4, beta_max: float = 0.02) -> Schedule:
    if int(T) != T or T < 2:
        raise InvalidParameterError(f"T must be an integer >= 2, got {T}")
    if not 0.0 < beta_min <= beta_max < 1.0:
        raise InvalidParameterError("need 0 < beta_min <= beta_max < 1")
    T = int(T)
    frac = np.arange(T, dtype=np.float64) / (T - 1)
    return Schedule(beta_min + frac * (beta_max - beta_min), name="linear")


SCHEDULES = {"paper": build_paper_schedule, "linear": build_linear_schedule}


@dataclass(frozen=True, eq=False)
class CoefficientDesign:
    """Per-step (eta_t, sigma_t^2) for the reverse sampler."""

    eta: np.ndarray
    sigma2: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        eta, sigma2 = _frozen(self.eta), _frozen(self.sigma2)
        if eta.shape != sigma2.shape or eta.ndim != 1:
            raise InvalidParameterError("eta and sigma2 must be 1-d arrays of equal length")
        if np.any(sigma2 < 0):
            raise InvalidParameterError("sigma2 must be nonnegative")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def T(self) -> int:
        return int(self.eta.size)

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(self.sigma2)

    def __repr__(self):
        return f"CoefficientDesign(name={self.name!r}, T={self.T})"


def _star_sigma2(s: Schedule) -> np.ndarray:
    # (1 - a_t)(a_t - ab_t)/(1 - ab_t), with a_t - ab_t = a_t (1 - ab_{t-1})
    omab_prev = np.concatenate(([0.0], s.one_minus_alpha_bar[:-1]))
    return s.beta * s.alpha * omab_prev / s.one_minus_alpha_bar


def star_design(s: Schedule) -> CoefficientDesign:
    """eta_t = 1 - alpha_t and the matched variance; sigma_1^2 is exactly 0."""
    return CoefficientDesign(s.beta.copy(), _star_sigma2(s), name="star")


def simple_design(s: Schedule) -> CoefficientDesign:
    return CoefficientDesign(s.beta.copy(), s.beta.copy(), name="simple")


DESIGNS = {"star": star_design, "simple": simple_design}


def perturbed_design(base: CoefficientDesign, eta_shift: float, sigma_scale: float) -> CoefficientDesign:
    """Shift every eta_t and scale every sigma_t by ``sigma_scale``."""
    if not sigma_scale > 0:
        raise InvalidParameterError("sigma_scale must be positive")
    if eta_shift == 0 and sigma_scale == 1:
        return CoefficientDesign(base.eta, base.sigma2, name=base.name)
    return CoefficientDesign(
        base.eta + eta_shift,
        sigma_scale**2 * base.sigma2,
        name=f"{base.name}+shift{eta_shift:g}*scale{sigma_scale:g}",
    )


def star_coefficients(s: Schedule, t: int) -> tuple[float, float]:
    """(eta_t*, sigma_t*^2) at a single step."""
    t = s.check_step(t)
    return float(s.beta[t - 1]), float(_star_sigma2(s)[t - 1])
