"""Shared statistical primitives (re-exported by the smoothing module)."""

from __future__ import annotations

from scipy.special import ndtri
from scipy.stats import beta as _beta

from .errors import DomainError


def clopper_pearson_lower(k: int, n: int, alpha: float) -> float:
    """Exact one-sided lower confidence bound for a binomial proportion.

    The bound is the alpha-quantile of Beta(k, n - k + 1); with probability
    at least 1 - alpha the true success rate is above it.
    """
    if not 0 < alpha < 1:
        raise DomainError("alpha must be in (0, 1)")
    if n < 1 or not 0 <= k <= n:
        raise DomainError("need 0 <= k <= n with n >= 1")
    if k == 0:
        return 0.0
    if k == n:
        return float(alpha ** (1.0 / n))
    return float(_beta.ppf(alpha, k, n - k + 1))


def norm_ppf(p: float) -> float:
    """Standard normal quantile; full double precision."""
    return float(ndtri(p))
