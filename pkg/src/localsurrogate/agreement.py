"""Berry-Mielke universal R with squared-error distance, and its lower bound.

R = 1 - delta / mu, where delta is the mean squared error of the predictions
and mu the mean squared difference over all (prediction, target) pairs. The
lower confidence bound replaces delta by delta plus the t-based margin of
error of that mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import betainc

from ._kernels import agreement_moments

# mu below this fraction of the targets' second moment counts as zero
_DEGENERATE_RTOL = 1e-20


@dataclass(frozen=True)
class AgreementScore:
    delta: float
    mu: float
    r: float
    moe_delta: float
    r_lower: float
    n: int
    sigma: float
    t_critical: float
    degenerate: bool = False


def _pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.ascontiguousarray(y, dtype=np.float64)
    yhat = np.ascontiguousarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise ValueError(f"length mismatch: {y.shape} vs {yhat.shape}")
    if len(y) == 0:
        raise ValueError("need at least one sample")
    return y, yhat


def delta_mu(y, yhat) -> tuple[float, float]:
    """Return (delta, mu).

    mu is the double sum (1/n^2) sum_i sum_j (yhat_j - y_i)^2, evaluated in
    O(n) through var(yhat) + var(y) + (mean(yhat) - mean(y))^2.
    """
    y, yhat = _pair(y, yhat)
    delta, mu, _, _ = agreement_moments(y, yhat)
    return float(delta), float(mu)


def _is_degenerate(mu: float, scale: float) -> bool:
    return mu <= _DEGENERATE_RTOL * scale


def universal_r(y, yhat) -> float:
    """1 - delta/mu; 0 for a degenerate sample where every value coincides."""
    y, yhat = _pair(y, yhat)
    delta, mu, _, scale = agreement_moments(y, yhat)
    if _is_degenerate(mu, scale):
        return 0.0
    return float(1.0 - delta / mu)


def t_cdf_two_sided(t: float, df: float) -> float:
    """P(|T_df| <= t) for t >= 0 via the regularized incomplete beta."""
    if t <= 0:
        return 0.0
    return float(1.0 - betainc(df / 2.0, 0.5, df / (df + t * t)))


@lru_cache(maxsize=4096)
def t_quantile(df: int, confidence: float) -> float:
    """Two-sided critical value t with P(|T_df| <= t) = confidence."""
    if int(df) != df or df < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {df!r}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence!r}")
    hi = 2.0
    while t_cdf_two_sided(hi, df) < confidence:
        hi *= 2.0
    return float(brentq(lambda t: t_cdf_two_sided(t, df) - confidence, 0.0, hi,
                        xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=500))


def score_from_moments(n: int, delta: float, mu: float, sigma: float, scale: float,
                       confidence: float) -> AgreementScore:
    """Assemble an :class:`AgreementScore` from precomputed sample moments."""
    if n < 2:
        raise ValueError("the margin of error needs at least two samples")
    delta, mu, sigma = float(delta), float(mu), float(sigma)
    t = t_quantile(n - 1, confidence)
    moe = t * sigma / math.sqrt(n)
    if _is_degenerate(mu, float(scale)):
        return AgreementScore(delta, mu, 0.0, moe, 0.0, n, sigma, t, degenerate=True)
    return AgreementScore(delta, mu, 1.0 - delta / mu, moe, 1.0 - (delta + moe) / mu, n, sigma, t)


def r_lower_bound(y, yhat, confidence: float = 0.95) -> AgreementScore:
    y, yhat = _pair(y, yhat)
    return score_from_moments(len(y), *agreement_moments(y, yhat), confidence)
