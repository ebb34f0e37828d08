"""Point estimates, confidence intervals, and the derived trading bounds.

From a sample of prices this module produces the classical t interval for
the mean and chi-squared interval for the standard deviation, turns them
into three-sigma price bounds (upper/lower), and sets the purchase
threshold at the geometric mean of those bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import chi2_quantile, t_quantile

CLAMP_EPS = 1e-3

RECORD_FIELDS = (
    "n", "alpha", "mean", "s", "mu_lo", "mu_hi", "sigma_lo", "sigma_hi",
    "m_hat", "M_hat", "theta_hat", "conservative",
)


class EstimationError(ValueError):
    """Base class for estimation failures."""


class DegenerateSpreadError(EstimationError):
    """The sample has zero spread, so the sigma interval is undefined."""


class NonpositiveLowerBoundError(EstimationError):
    """The lower price bound is <= 0; the threshold is undefined without a clamp."""


@dataclass(frozen=True)
class SampleStats:
    """Sample size, mean, and standard deviation (n-1 denominator)."""

    n: int
    mean: float
    sample_std: float


def sample_stats(data) -> SampleStats:
    """Two-pass mean and sample standard deviation."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 1:
        raise ValueError("sample must be one-dimensional")
    n = arr.size
    if n < 2:
        raise EstimationError(f"need at least 2 observations, got {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample contains non-finite values")
    mean = float(arr.mean())
    s = math.sqrt(float(np.sum((arr - mean) ** 2)) / (n - 1))
    return SampleStats(n=n, mean=mean, sample_std=s)


def mu_interval(stats: SampleStats, alpha: float) -> tuple[float, float]:
    """Two-sided (1-alpha) interval for the mean: mean +- s/sqrt(n) t_{1-alpha/2}."""
    _check_alpha(alpha)
    half = stats.sample_std / math.sqrt(stats.n) * t_quantile(1.0 - alpha / 2.0, stats.n - 1)
    return stats.mean - half, stats.mean + half


def sigma_interval(stats: SampleStats, alpha: float) -> tuple[float, float]:
    """Two-sided (1-alpha) interval for sigma from (n-1)s^2/sigma^2 ~ chi2(n-1).

    The lower endpoint uses the upper chi-squared critical point and vice
    versa, which keeps the interval ordered.
    """
    _check_alpha(alpha)
    if stats.sample_std <= 0.0:
        raise DegenerateSpreadError("sigma interval undefined at zero sample spread")
    df = stats.n - 1
    lo = stats.sample_std * math.sqrt(df / chi2_quantile(1.0 - alpha / 2.0, df))
    hi = stats.sample_std * math.sqrt(df / chi2_quantile(alpha / 2.0, df))
    return lo, hi


def three_sigma_bounds(
    stats: SampleStats, alpha: float = 0.05, conservative: bool = False
) -> tuple[float, float]:
    """Estimated (upper, lower) price bounds mean +- 3 sigma.

    Point mode plugs in the sample statistics directly.  Conservative mode
    widens both bounds using the (1-alpha) interval endpoints: the upper
    bound takes the high ends of both intervals, the lower bound the low
    end of the mean interval minus three times the high sigma end.
    """
    if not conservative or stats.sample_std <= 0.0:
        return stats.mean + 3.0 * stats.sample_std, stats.mean - 3.0 * stats.sample_std
    mu_lo, mu_hi = mu_interval(stats, alpha)
    _, sig_hi = sigma_interval(stats, alpha)
    return mu_hi + 3.0 * sig_hi, mu_lo - 3.0 * sig_hi


def threshold_price(upper: float, lower: float) -> float:
    """Purchase threshold at the geometric mean sqrt(upper * lower)."""
    if upper < lower:
        raise ValueError(f"bounds out of order: upper={upper} < lower={lower}")
    if lower <= 0.0:
        raise NonpositiveLowerBoundError(
            f"threshold undefined for lower bound {lower} <= 0; clamp it first"
        )
    return math.sqrt(upper * lower)


def clamp_lower_bound(upper: float, lower: float, eps: float = CLAMP_EPS) -> float:
    """Floor the lower bound at eps times the upper bound."""
    return max(lower, eps * upper)


@dataclass(frozen=True)
class EstimateReport:
    """Everything derived from one sample at one confidence level."""

    alpha: float
    stats: SampleStats
    mu_interval: tuple[float, float]
    sigma_interval: tuple[float, float]
    upper_bound: float
    lower_bound: float
    threshold: float
    conservative: bool
    lower_clamped: bool = False

    @property
    def ratio_bound(self) -> float:
        """Guaranteed competitive-ratio ceiling sqrt(upper / lower)."""
        return math.sqrt(self.upper_bound / self.lower_bound)

    def to_record(self) -> dict:
        """Flat record with the documented serialization keys."""
        return {
            "n": self.stats.n,
            "alpha": self.alpha,
            "mean": self.stats.mean,
            "s": self.stats.sample_std,
            "mu_lo": self.mu_interval[0],
            "mu_hi": self.mu_interval[1],
            "sigma_lo": self.sigma_interval[0],
            "sigma_hi": self.sigma_interval[1],
            "m_hat": self.lower_bound,
            "M_hat": self.upper_bound,
            "theta_hat": self.threshold,
            "conservative": int(self.conservative),
        }


def estimate(
    data,
    alpha: float = 0.05,
    *,
    conservative: bool = False,
    clamp_nonpositive_lower: bool = False,
    clamp_eps: float = CLAMP_EPS,
) -> EstimateReport:
    """Full estimation pipeline from raw sample to threshold.

    A zero-spread sample degenerates gracefully: both intervals collapse,
    the bounds coincide with the mean, and the threshold equals it.  A
    nonpositive lower bound raises unless the clamp is requested.
    """
    stats = sample_stats(data)
    mu_iv = mu_interval(stats, alpha)
    if stats.sample_std <= 0.0:
        sig_iv = (0.0, 0.0)
    else:
        sig_iv = sigma_interval(stats, alpha)
    upper, lower = three_sigma_bounds(stats, alpha, conservative)
    clamped = False
    if clamp_nonpositive_lower and upper > 0.0:
        floored = clamp_lower_bound(upper, lower, clamp_eps)
        clamped = floored > lower
        lower = floored
    theta = threshold_price(upper, lower)
    return EstimateReport(
        alpha=alpha,
        stats=stats,
        mu_interval=mu_iv,
        sigma_interval=sig_iv,
        upper_bound=upper,
        lower_bound=lower,
        threshold=theta,
        conservative=conservative,
        lower_clamped=clamped,
    )


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
