"""Reference mechanisms the truncated Laplacian is measured against.

* :class:`Laplace` — the classical unbounded mechanism (pure epsilon privacy).
* :class:`Gaussian` with two calibrations: the textbook
  ``sigma = sens * sqrt(2 ln(1.25/delta)) / eps`` and the exact calibration
  that inverts the true Gaussian privacy profile by bisection.
* :class:`BoundedUniform` — the epsilon -> 0 limiting shape (a flat density
  of height delta/sensitivity), useful as an analytic cross-check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from .core import (
    ConvergenceError,
    DomainError,
    NoiseMechanism,
    PrivacyParams,
    Sensitivity,
    _as_checked_array,
    _scalar_or_array,
    as_sensitivity,
)

__all__ = [
    "RangeWarning",
    "Laplace",
    "Gaussian",
    "BoundedUniform",
    "laplace_mechanism",
    "classic_gaussian_sigma",
    "analytic_gaussian_sigma",
    "gaussian_privacy_profile",
    "gaussian_moments",
    "uniform_limit_mechanism",
]


class RangeWarning(UserWarning):
    """A formula was evaluated outside the range where its guarantee is proven."""


# ---------------------------------------------------------------------------
# Laplace


class Laplace(NoiseMechanism):
    """Two-sided exponential noise with unbounded support."""

    def __init__(self, scale: float):
        if not math.isfinite(scale) or scale <= 0.0:
            raise DomainError(f"scale must be finite and > 0, got {scale!r}")
        self.scale = float(scale)

    @property
    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def pdf(self, x):
        arr, scalar = _as_checked_array(x)
        values = np.exp(-np.abs(arr) / self.scale) / (2.0 * self.scale)
        return _scalar_or_array(values, scalar)

    def cdf(self, x):
        arr, scalar = _as_checked_array(x)
        pos = 1.0 - 0.5 * np.exp(-np.clip(arr, 0.0, None) / self.scale)
        neg = 0.5 * np.exp(np.clip(arr, None, 0.0) / self.scale)
        values = np.where(arr >= 0.0, pos, neg)
        return _scalar_or_array(values, scalar)

    def quantile(self, u):
        arr, scalar = _as_checked_array(u, "u")
        if np.any(arr <= 0.0) or np.any(arr >= 1.0):
            raise DomainError("quantile argument must lie in (0, 1)")
        values = -self.scale * np.sign(arr - 0.5) * np.log1p(-2.0 * np.abs(arr - 0.5))
        return _scalar_or_array(values, scalar)

    def interval_mass(self, lo, hi):
        # Assembled from one-sided tail pieces so deep-tail cells keep full
        # relative precision (a cdf difference would cancel against the 1).
        lo_arr, lo_scalar = _as_checked_array(lo, "lo")
        hi_arr, hi_scalar = _as_checked_array(hi, "hi")
        lo_b, hi_b = np.broadcast_arrays(lo_arr, hi_arr)
        if np.any(hi_b < lo_b):
            raise DomainError("interval_mass requires lo <= hi")
        right_lo = np.maximum(lo_b, 0.0) / self.scale
        right_span = np.minimum(right_lo - hi_b / self.scale, 0.0)
        right = np.where(
            hi_b > 0.0,
            -0.5 * np.exp(-right_lo) * np.expm1(right_span),
            0.0,
        )
        left_hi = np.minimum(hi_b, 0.0) / self.scale
        left_span = np.minimum(lo_b / self.scale - left_hi, 0.0)
        left = np.where(
            lo_b < 0.0,
            -0.5 * np.exp(left_hi) * np.expm1(left_span),
            0.0,
        )
        return _scalar_or_array(right + left, lo_scalar and hi_scalar)

    @property
    def expected_amplitude(self) -> float:
        return self.scale

    @property
    def expected_power(self) -> float:
        return 2.0 * self.scale**2


def laplace_mechanism(epsilon: float, sens: "Sensitivity | float") -> Laplace:
    """Laplace noise scaled for pure epsilon-privacy (no delta needed)."""
    if not math.isfinite(epsilon) or epsilon <= 0.0:
        raise DomainError(f"epsilon must be finite and > 0, got {epsilon!r}")
    return Laplace(as_sensitivity(sens).value / epsilon)


# ---------------------------------------------------------------------------
# Gaussian

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class Gaussian(NoiseMechanism):
    """Zero-mean Gaussian noise."""

    def __init__(self, sigma: float):
        if not math.isfinite(sigma) or sigma <= 0.0:
            raise DomainError(f"sigma must be finite and > 0, got {sigma!r}")
        self.sigma = float(sigma)

    @property
    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def pdf(self, x):
        arr, scalar = _as_checked_array(x)
        z = arr / self.sigma
        values = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))
        return _scalar_or_array(values, scalar)

    def cdf(self, x):
        arr, scalar = _as_checked_array(x)
        values = ndtr(arr / self.sigma)
        return _scalar_or_array(np.asarray(values), scalar)

    def quantile(self, u):
        arr, scalar = _as_checked_array(u, "u")
        if np.any(arr <= 0.0) or np.any(arr >= 1.0):
            raise DomainError("quantile argument must lie in (0, 1)")
        values = self.sigma * ndtri(arr)
        return _scalar_or_array(np.asarray(values), scalar)

    def interval_mass(self, lo, hi):
        # Complementary-tail form: ndtr is only ever evaluated at arguments
        # <= 0, where it is small and fully accurate, so deep-tail cells do
        # not cancel against 1 the way a plain cdf difference would.
        lo_arr, lo_scalar = _as_checked_array(lo, "lo")
        hi_arr, hi_scalar = _as_checked_array(hi, "hi")
        lo_b, hi_b = np.broadcast_arrays(lo_arr, hi_arr)
        if np.any(hi_b < lo_b):
            raise DomainError("interval_mass requires lo <= hi")
        lo_z = lo_b / self.sigma
        hi_z = hi_b / self.sigma
        right = np.where(
            hi_z > 0.0,
            ndtr(-np.maximum(lo_z, 0.0)) - ndtr(-hi_z),
            0.0,
        )
        left = np.where(
            lo_z < 0.0,
            ndtr(np.minimum(hi_z, 0.0)) - ndtr(lo_z),
            0.0,
        )
        return _scalar_or_array(right + left, lo_scalar and hi_scalar)

    @property
    def expected_amplitude(self) -> float:
        return self.sigma * _SQRT_2_OVER_PI

    @property
    def expected_power(self) -> float:
        return self.sigma**2


def gaussian_moments(sigma: float) -> tuple[float, float]:
    """(E|X|, E[X^2]) = (sigma * sqrt(2/pi), sigma^2)."""
    if not math.isfinite(sigma) or sigma <= 0.0:
        raise DomainError(f"sigma must be finite and > 0, got {sigma!r}")
    return sigma * _SQRT_2_OVER_PI, sigma * sigma


def classic_gaussian_sigma(params: PrivacyParams, sens: "Sensitivity | float") -> float:
    """The textbook calibration sigma = sens * sqrt(2 ln(1.25/delta)) / eps.

    Its privacy proof covers epsilon in (0, 1); outside that range the value
    is still returned but a :class:`RangeWarning` is emitted, because the
    closed form no longer carries a guarantee there.
    """
    sens = as_sensitivity(sens)
    if not 0.0 < params.epsilon < 1.0:
        warnings.warn(
            "the closed-form Gaussian calibration is only proven for "
            f"epsilon in (0, 1); got epsilon={params.epsilon}",
            RangeWarning,
            stacklevel=2,
        )
    return sens.value * math.sqrt(2.0 * math.log(1.25 / params.delta)) / params.epsilon


def gaussian_privacy_profile(
    sigma: float, params: PrivacyParams, sens: "Sensitivity | float"
) -> float:
    """The smallest delta for which Gaussian noise of this sigma is
    (epsilon, delta)-private on queries of the given sensitivity:

        Phi(sens/(2 sigma) - eps sigma/sens)
            - e^eps * Phi(-sens/(2 sigma) - eps sigma/sens)

    Evaluated in log space so the e^eps factor cannot overflow and the
    difference keeps relative accuracy deep into the tails.
    """
    if not math.isfinite(sigma) or sigma <= 0.0:
        raise DomainError(f"sigma must be finite and > 0, got {sigma!r}")
    sens_value = as_sensitivity(sens).value
    a = sens_value / (2.0 * sigma) - params.epsilon * sigma / sens_value
    b = -sens_value / (2.0 * sigma) - params.epsilon * sigma / sens_value
    log_hi = float(log_ndtr(a))
    log_lo = params.epsilon + float(log_ndtr(b))
    if log_lo >= log_hi:
        return 0.0
    return -math.exp(log_hi) * math.expm1(log_lo - log_hi)


def analytic_gaussian_sigma(
    params: PrivacyParams, sens: "Sensitivity | float"
) -> float:
    """Minimal sigma whose privacy profile meets the target, by bisection.

    Bracketing starts at [sens * 1e-6 / eps, sens / eps]; the upper end is
    doubled until it satisfies the target (at most 200 doublings, then
    :class:`ConvergenceError`).  Bisection runs to 1e-12 relative width and
    returns the feasible endpoint, so the result always satisfies the target.
    """
    sens_value = as_sensitivity(sens).value

    def excess(sigma: float) -> float:
        return gaussian_privacy_profile(sigma, params, sens_value) - params.delta

    lo = sens_value * 1e-6 / params.epsilon
    hi = sens_value / params.epsilon
    doublings = 0
    while excess(hi) > 0.0:
        hi *= 2.0
        doublings += 1
        if doublings > 200:
            raise ConvergenceError(
                "could not bracket the Gaussian calibration from above"
            )
    # The profile tends to 1 as sigma -> 0, so a violating lower end always
    # exists; shrink towards it in the (unusual) case the default is feasible.
    shrinks = 0
    while excess(lo) <= 0.0:
        hi = lo
        lo *= 0.5
        shrinks += 1
        if shrinks > 200:
            raise ConvergenceError(
                "could not bracket the Gaussian calibration from below"
            )
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # interval narrower than float spacing
            break
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------------------
# Uniform limit


class BoundedUniform(NoiseMechanism):
    """Flat density on [-half_width, half_width].

    With ``half_width = sens/(2 delta)`` this is the shape the calibrated
    truncated Laplacian converges to as epsilon -> 0: density delta/sens on
    its support, satisfying the (0, delta) privacy constraint exactly.
    """

    def __init__(self, half_width: float):
        if not math.isfinite(half_width) or half_width <= 0.0:
            raise DomainError(
                f"half_width must be finite and > 0, got {half_width!r}"
            )
        self.half_width = float(half_width)

    @property
    def support(self) -> tuple[float, float]:
        return (-self.half_width, self.half_width)

    def pdf(self, x):
        arr, scalar = _as_checked_array(x)
        inside = np.abs(arr) <= self.half_width
        values = np.where(inside, 0.5 / self.half_width, 0.0)
        return _scalar_or_array(values, scalar)

    def cdf(self, x):
        arr, scalar = _as_checked_array(x)
        values = np.clip((arr + self.half_width) / (2.0 * self.half_width), 0.0, 1.0)
        return _scalar_or_array(values, scalar)

    def quantile(self, u):
        arr, scalar = _as_checked_array(u, "u")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise DomainError("quantile argument must lie in [0, 1]")
        values = (2.0 * arr - 1.0) * self.half_width
        return _scalar_or_array(values, scalar)

    @property
    def expected_amplitude(self) -> float:
        return 0.5 * self.half_width

    @property
    def expected_power(self) -> float:
        return self.half_width**2 / 3.0


def uniform_limit_mechanism(delta: float, sens: "Sensitivity | float") -> BoundedUniform:
    """The epsilon -> 0 limit mechanism: uniform with half-width sens/(2 delta)."""
    if not math.isfinite(delta) or not 0.0 < delta < 0.5:
        raise DomainError(f"delta must lie strictly inside (0, 0.5), got {delta!r}")
    return BoundedUniform(as_sensitivity(sens).value / (2.0 * delta))
