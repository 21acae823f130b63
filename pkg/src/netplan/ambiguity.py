"""Worst-case expected shortfall over all demand laws with a given mean and variance.

For a committed amount ``d`` the adversary picks a distribution with mean
``mu`` and variance ``var`` maximizing E[(demand - d)+]. The optimum is
attained by a two-point law and has a closed form with two regimes split at
``(mu**2 + var) / (2 * mu)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class MomentError(ValueError):
    pass


@dataclass(frozen=True)
class MomentInfo:
    mean: float
    variance: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and self.mean > 0):
            raise MomentError(f"mean must be positive, got {self.mean}")
        if not (math.isfinite(self.variance) and self.variance >= 0):
            raise MomentError(f"variance must be nonnegative, got {self.variance}")


@dataclass(frozen=True)
class TwoPointDistribution:
    lower_point: float
    upper_point: float
    lower_mass: float
    upper_mass: float

    @property
    def mean(self) -> float:
        return self.lower_mass * self.lower_point + self.upper_mass * self.upper_point

    @property
    def variance(self) -> float:
        m = self.mean
        return (self.lower_mass * (self.lower_point - m) ** 2
                + self.upper_mass * (self.upper_point - m) ** 2)

    def expected_shortfall(self, d_tilde: float) -> float:
        return (self.upper_mass * max(self.upper_point - d_tilde, 0.0)
                + self.lower_mass * max(self.lower_point - d_tilde, 0.0))


def _check(d_tilde: float, m: MomentInfo):
    if not isinstance(m, MomentInfo):
        raise MomentError("expected MomentInfo")
    if not (math.isfinite(d_tilde) and d_tilde >= 0):
        raise MomentError(f"d_tilde must be finite and nonnegative, got {d_tilde}")


def threshold(m: MomentInfo) -> float:
    """Commitment level where the worst case switches regime."""
    if not m.mean > 0:
        raise MomentError("mean must be positive")
    return (m.mean ** 2 + m.variance) / (2.0 * m.mean)


def worst_case_shortfall(d_tilde: float, m: MomentInfo) -> float:
    _check(d_tilde, m)
    mu, var = m.mean, m.variance
    if var == 0.0:
        return max(0.0, mu - d_tilde)
    if d_tilde > threshold(m):
        return 0.5 * (mu - d_tilde + math.sqrt((d_tilde - mu) ** 2 + var))
    return mu - d_tilde * mu * mu / (mu * mu + var)


def shortfall_derivative(d_tilde: float, m: MomentInfo) -> float:
    _check(d_tilde, m)
    mu, var = m.mean, m.variance
    if var == 0.0:
        return -1.0 if d_tilde < mu else 0.0
    if d_tilde > threshold(m):
        return 0.5 * ((d_tilde - mu) / math.sqrt((d_tilde - mu) ** 2 + var) - 1.0)
    return -mu * mu / (mu * mu + var)


def worst_case_distribution(d_tilde: float, m: MomentInfo) -> TwoPointDistribution:
    """A two-point law attaining :func:`worst_case_shortfall`.

    Below the threshold: mass at 0 and at (var + mu**2) / mu. Above it the
    upper point is d + sqrt((d - mu)**2 + var) and the lower point and mass
    follow from the two moment conditions.
    """
    _check(d_tilde, m)
    mu, var = m.mean, m.variance
    if var == 0.0:
        raise MomentError("zero variance: the only admissible law is a point mass at the mean")
    if d_tilde <= threshold(m):
        second = var + mu * mu
        return TwoPointDistribution(0.0, second / mu, var / second, mu * mu / second)
    upper = d_tilde + math.sqrt((d_tilde - mu) ** 2 + var)
    gap = (upper - mu) ** 2
    q = gap / (var + gap)
    # equivalent to (mu - (1 - q) * upper) / q, without the cancellation
    lower = mu - var / (upper - mu)
    return TwoPointDistribution(lower, upper, q, var / (var + gap))


def multi_commodity_shortfall(d_tilde: Sequence[float], moments: Sequence[MomentInfo]) -> float:
    d_tilde = list(d_tilde)
    if len(d_tilde) != len(moments):
        raise MomentError(f"{len(d_tilde)} commitments for {len(moments)} commodities")
    return float(math.fsum(worst_case_shortfall(float(d), m) for d, m in zip(d_tilde, moments)))


def multi_commodity_derivative(d_tilde: Sequence[float], moments: Sequence[MomentInfo]) -> np.ndarray:
    return np.array([shortfall_derivative(float(d), m) for d, m in zip(d_tilde, moments)])


def shortfall_curve(m: MomentInfo, lo: float, hi: float, step: float):
    """(d, N(d)) pairs on a regular grid, endpoints included."""
    if step <= 0 or hi < lo:
        raise ValueError("need step > 0 and hi >= lo")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    grid = lo + step * np.arange(n)
    return [(float(d), worst_case_shortfall(float(d), m)) for d in grid]
