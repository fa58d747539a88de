"""Determinant block statistics, rank estimator and variance estimators."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .hypotest import decide_all
from .models import PathDataset, grid_steps, perturbed_series
from .preavg import (
    PreAvgPlan,
    block_matrices,
    make_plan,
    n_big_blocks,
    n_blocks_for,
    paired_block_matrices,
)
from .weights import WeightFunction, validate_pair

__all__ = [
    "DegenerateStatisticError",
    "RankTestReport",
    "f_values",
    "s_statistic",
    "v_second_moments",
    "v_prime",
    "r_hat",
    "r_hat_int",
    "v_combined",
    "v_prime_variance",
    "standardized",
    "compute_report",
]

LOG2 = math.log(2.0)


class DegenerateStatisticError(ArithmeticError):
    """A statistic needed in a ratio or a square root is not positive."""


def f_values(series, plan: PreAvgPlan, w: WeightFunction, kappa: int, n_blocks: int) -> np.ndarray:
    """Squared determinants of the block matrices, one per big block."""
    return np.linalg.det(block_matrices(series, plan, kappa, n_blocks, w)) ** 2


def _blocks(series, plan: PreAvgPlan, T: Optional[float]) -> int:
    d, n = np.atleast_2d(series).shape
    if T is None:
        return n_big_blocks(n, d, plan.k_n)
    return n_blocks_for(plan.delta_n, T, d, plan.k_n)


def s_statistic(series_Z, plan: PreAvgPlan, w: WeightFunction, kappa: int, T: Optional[float] = None) -> float:
    """``3 d u_n`` times the sum of squared block determinants."""
    d = np.atleast_2d(series_Z).shape[0]
    nb = _blocks(series_Z, plan, T)
    f = f_values(series_Z, plan, w, kappa, nb)
    return 3 * d * plan.u_n * math.fsum(f)


def v_second_moments(
    series_Z1, series_Z2, plan: PreAvgPlan, g: WeightFunction, h: WeightFunction, T: Optional[float] = None
) -> tuple[float, float, float]:
    """``(V11, V22, V12)``: sums of ``f1**2``, ``f2**2`` and ``f1 f2`` times ``9 d**2 u_n``."""
    d = np.atleast_2d(series_Z1).shape[0]
    nb = _blocks(series_Z1, plan, T)
    f1 = f_values(series_Z1, plan, g, 1, nb)
    f2 = f_values(series_Z2, plan, h, 2, nb)
    return _second_moments(f1, f2, d, plan.u_n)


def _second_moments(f1, f2, d, u_n):
    c = 9 * d * d * u_n
    return c * math.fsum(f1 * f1), c * math.fsum(f2 * f2), c * math.fsum(f1 * f2)


def v_prime(series_Z1, plan: PreAvgPlan, g: WeightFunction, T: Optional[float] = None) -> float:
    """Squared differences of f over adjacent frequency-1 blocks, times ``3 d**2 u_n``."""
    series_Z1 = np.atleast_2d(series_Z1)
    d, n = series_Z1.shape
    steps = n - 1 if T is None else grid_steps(plan.delta_n, T)
    n_pairs = steps // (2 * d * plan.k_n)
    left, right = paired_block_matrices(series_Z1, plan, n_pairs, g)
    diff = np.linalg.det(left) ** 2 - np.linalg.det(right) ** 2
    return 3 * d * d * plan.u_n * math.fsum(diff * diff)


def r_hat(S1: float, S2: float, d: int) -> float:
    """``d - log2(S2 / S1)``."""
    if not (S1 > 0 and S2 > 0):
        raise DegenerateStatisticError(f"statistics must be positive, got S1={S1}, S2={S2}")
    return d - math.log(S2 / S1) / LOG2


def r_hat_int(r_hat: float, d: int) -> int:
    """Clamp to ``[0, d]`` and round half to even."""
    return int(round(max(0.0, min(float(d), r_hat))))


def v_combined(V11: float, V22: float, V12: float, r_hat: float, S1: float, d: int) -> float:
    if S1 == 0:
        raise DegenerateStatisticError("S1 vanishes")
    e = r_hat - d
    return (V11 + 4.0**e * V22 - 2.0 ** (1.0 + e) * V12) / (S1 * LOG2) ** 2


def v_prime_variance(Vp: float, S1: float) -> float:
    if S1 == 0:
        raise DegenerateStatisticError("S1 vanishes")
    return 2.0 * Vp / (S1 * LOG2) ** 2


def standardized(r: int, r_hat: float, V: float, u_n: float) -> float:
    """``(r_hat - r) / sqrt(u_n V)``."""
    if not V > 0:
        raise DegenerateStatisticError(f"variance estimate {V} is not positive")
    return (r_hat - r) / math.sqrt(u_n * V)


@dataclass
class RankTestReport:
    d: int
    k_n: int
    u_n: float
    n_blocks: int
    S1: float
    S2: float
    r_hat: float
    r_hat_int: int
    V11: float
    V22: float
    V12: float
    V_combined: float
    V_prime: Optional[float]
    variance: float
    used_fallback_variance: bool
    standardized: dict[int, float] = field(default_factory=dict)
    decisions: dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["standardized"] = {str(k): v for k, v in self.standardized.items()}
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "RankTestReport":
        data = dict(data)
        data["standardized"] = {int(k): v for k, v in data.get("standardized", {}).items()}
        return cls(**data)

    def csv_header(self) -> list[str]:
        head = [
            "d", "k_n", "u_n", "n_blocks", "S1", "S2", "r_hat", "r_hat_int",
            "V11", "V22", "V12", "V_combined", "V_prime", "variance", "used_fallback_variance",
        ]
        head += [f"z_{r}" for r in range(self.d + 1)]
        head += sorted(self.decisions)
        return head

    def csv_row(self) -> list:
        d = self.to_dict()
        row = [d[k] for k in self.csv_header()[:15]]
        row += [self.standardized.get(r, float("nan")) for r in range(self.d + 1)]
        row += [int(self.decisions[k]) for k in sorted(self.decisions)]
        return row


def compute_report(
    path: PathDataset,
    g: WeightFunction,
    h: WeightFunction,
    theta: float = 1.0 / 3.0,
    override_k: Optional[int] = None,
    variance_mode: str = "combined",
    alpha: float = 0.05,
    check_pair: bool = True,
) -> RankTestReport:
    """Run the full rank test on one observed path.

    ``variance_mode="combined"`` uses the three second-moment estimators and
    falls back to the paired-difference estimator when the combined value is
    not positive; ``"prime"`` always uses the paired-difference estimator.
    """
    if variance_mode not in ("combined", "prime"):
        raise ValueError(f"unknown variance mode {variance_mode!r}")
    if check_pair and not validate_pair(g, h, 1e-9):
        raise ValueError("weight functions do not form a matched pair")
    plan = make_plan(path.delta_n, theta, override_k)
    d = path.d
    nb = n_big_blocks(path.n_obs, d, plan.k_n)
    if nb < 1:
        raise DegenerateStatisticError("path too short for a single block")
    Z1 = perturbed_series(path, 1, plan.u_n)
    Z2 = perturbed_series(path, 2, plan.u_n)
    f1 = f_values(Z1, plan, g, 1, nb)
    f2 = f_values(Z2, plan, h, 2, nb)
    S1 = 3 * d * plan.u_n * math.fsum(f1)
    S2 = 3 * d * plan.u_n * math.fsum(f2)
    rh = r_hat(S1, S2, d)
    V11, V22, V12 = _second_moments(f1, f2, d, plan.u_n)
    Vc = v_combined(V11, V22, V12, rh, S1, d)
    Vp = None
    fallback = False
    if variance_mode == "prime" or not Vc > 0:
        Vp = v_prime(Z1, plan, g)
        V = v_prime_variance(Vp, S1)
        fallback = variance_mode == "combined"
    else:
        V = Vc
    z = {r: standardized(r, rh, V, plan.u_n) for r in range(d + 1)}
    return RankTestReport(
        d=d,
        k_n=plan.k_n,
        u_n=plan.u_n,
        n_blocks=nb,
        S1=S1,
        S2=S2,
        r_hat=rh,
        r_hat_int=r_hat_int(rh, d),
        V11=V11,
        V22=V22,
        V12=V12,
        V_combined=Vc,
        V_prime=Vp,
        variance=V,
        used_fallback_variance=fallback,
        standardized=z,
        decisions=decide_all(rh, d, V, plan.u_n, alpha),
    )
