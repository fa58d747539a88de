"""Rejection regions for ``R_T = r`` and ``R_T <= r`` at level alpha."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import ndtri

__all__ = ["TestDecision", "normal_quantile", "test_equal", "test_leq", "decide_all"]


@dataclass(frozen=True)
class TestDecision:
    """Outcome of one test; ``hypothesis`` is ``("equal", r)`` or ``("leq", r)``."""

    __test__ = False  # keep pytest from collecting this class

    hypothesis: tuple[str, int]
    alpha: float
    reject: bool
    statistic: float
    critical: float


def normal_quantile(p: float) -> float:
    """Standard normal quantile function."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return float(ndtri(p))


def _scale(V: float, u_n: float, alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not V > 0:
        raise ValueError(f"variance estimate must be positive, got {V}")
    return math.sqrt(u_n * V)


def test_equal(r_hat: float, r: int, V: float, u_n: float, alpha: float = 0.05) -> TestDecision:
    """Two-sided test of ``R_T = r``; ties accept."""
    crit = normal_quantile(1.0 - alpha / 2.0) * _scale(V, u_n, alpha)
    stat = abs(r_hat - r)
    return TestDecision(("equal", r), alpha, stat > crit, stat, crit)


def test_leq(r_hat: float, r: int, V: float, u_n: float, alpha: float = 0.05) -> TestDecision:
    """One-sided test of ``R_T <= r``; ties accept."""
    crit = normal_quantile(1.0 - alpha) * _scale(V, u_n, alpha)
    stat = r_hat - r
    return TestDecision(("leq", r), alpha, stat > crit, stat, crit)


test_equal.__test__ = False
test_leq.__test__ = False


def decide_all(r_hat: float, d: int, V: float, u_n: float, alpha: float = 0.05) -> dict[str, bool]:
    """Rejections of every ``equal_r`` and ``leq_r`` null, r = 0..d."""
    out = {}
    for r in range(d + 1):
        out[f"reject_eq_{r}"] = test_equal(r_hat, r, V, u_n, alpha).reject
        out[f"reject_leq_{r}"] = test_leq(r_hat, r, V, u_n, alpha).reject
    return out
