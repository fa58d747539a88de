"""Window rule and pre-averaged increments at frequencies kappa * delta_n.

Block layout used by the rank statistics, in units of ``k_n`` samples: big
block ``i`` spans ``[3 i d, 3 (i + 1) d)``. Its first ``d`` units carry the d
frequency-1 windows, the remaining ``2 d`` units carry d frequency-2 windows
of ``2 k_n`` samples each, read on even offsets only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .models import grid_steps
from .weights import WeightFunction, sample_grid

__all__ = [
    "PreAvgPlan",
    "window_size",
    "make_plan",
    "preavg_at",
    "block_matrix",
    "block_matrices",
    "paired_block_matrices",
    "block_starts",
    "n_big_blocks",
]


class WindowError(ValueError):
    pass


def window_size(delta_n: float, theta: float, override: Optional[int] = None) -> int:
    """``floor(theta * delta_n**(-2/3))`` unless ``override`` is given."""
    if delta_n <= 0 or theta <= 0:
        raise ValueError("delta_n and theta must be positive")
    k = int(override) if override is not None else math.floor(theta * delta_n ** (-2.0 / 3.0) + 1e-9)
    if k < 2:
        raise WindowError(f"window length {k} is below 2")
    return k


@dataclass(frozen=True)
class PreAvgPlan:
    """Window length ``k_n`` at step ``delta_n``; ``u_n = k_n * delta_n``.

    ``weight`` is the default weight used when none is passed explicitly.
    """

    k_n: int
    delta_n: float
    theta: float = float("nan")
    weight: Optional[WeightFunction] = None
    _coeffs: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.k_n < 2:
            raise WindowError("k_n must be >= 2")

    @property
    def u_n(self) -> float:
        return self.k_n * self.delta_n

    @property
    def g_samples(self) -> np.ndarray:
        if self.weight is None:
            raise ValueError("plan has no default weight")
        return sample_grid(self.weight, self.k_n)

    def coefficients(self, w: Optional[WeightFunction] = None) -> np.ndarray:
        """Summation-by-parts coefficients ``-(g((m+1)/k) - g(m/k))``, m < k."""
        w = w or self.weight
        if w is None:
            raise ValueError("no weight function given")
        key = id(w)
        hit = self._coeffs.get(key)
        if hit is None or hit[0] is not w:
            full = np.concatenate(([0.0], sample_grid(w, self.k_n), [0.0]))
            hit = (w, -np.diff(full))
            self._coeffs[key] = hit
        return hit[1]


def make_plan(
    delta_n: float,
    theta: float = 1.0 / 3.0,
    override: Optional[int] = None,
    weight: Optional[WeightFunction] = None,
) -> PreAvgPlan:
    return PreAvgPlan(window_size(delta_n, theta, override), float(delta_n), float(theta), weight)


def n_big_blocks(n_obs: int, d: int, k_n: int) -> int:
    """``floor((n_obs - 1) / (3 d k_n))``, i.e. ``[T / 3 d u_n]``."""
    return (n_obs - 1) // (3 * d * k_n)


def n_blocks_for(delta_n: float, T: float, d: int, k_n: int) -> int:
    return grid_steps(delta_n, T) // (3 * d * k_n)


def block_starts(kappa: int, n_blocks: int, d: int, k_n: int) -> np.ndarray:
    """Start samples ``((3 i + kappa - 1) d + kappa (j - 1)) k_n``, shape (n_blocks, d)."""
    i = np.arange(n_blocks)[:, None]
    j = np.arange(d)[None, :]
    return ((3 * i + kappa - 1) * d + kappa * j) * k_n


def _check_kappa(kappa: int) -> None:
    if kappa not in (1, 2):
        raise ValueError("kappa must be 1 or 2")


def preavg_at(
    series: np.ndarray,
    plan: PreAvgPlan,
    kappa: int,
    i: int,
    w: Optional[WeightFunction] = None,
) -> np.ndarray:
    """Pre-averaged increment at sample ``i`` and frequency ``kappa``."""
    _check_kappa(kappa)
    series = np.atleast_2d(series)
    k = plan.k_n
    last = i + kappa * (k - 1)
    if i < 0 or last > series.shape[1] - 1:
        raise IndexError(f"window [{i}, {last}] outside series of length {series.shape[1]}")
    idx = i + kappa * np.arange(k)
    return series[:, idx] @ plan.coefficients(w)


def _window_values(seg: np.ndarray, coeff: np.ndarray, kappa: int) -> np.ndarray:
    # seg: (..., kappa * k) contiguous samples of one window
    if kappa == 2:
        seg = seg[..., ::2]
    return seg @ coeff


def block_matrices(
    series: np.ndarray,
    plan: PreAvgPlan,
    kappa: int,
    n_blocks: int,
    w: Optional[WeightFunction] = None,
) -> np.ndarray:
    """All block matrices at once, shape ``(n_blocks, d, d)``, scaled by ``1/sqrt(kappa u_n)``."""
    _check_kappa(kappa)
    series = np.atleast_2d(series)
    d, n = series.shape
    k = plan.k_n
    span = 3 * d * k * n_blocks
    if n_blocks < 0 or span > n:
        raise IndexError(f"{n_blocks} blocks need {span} samples, series has {n}")
    seg = series[:, :span].reshape(d, n_blocks, 3 * d, k)
    if kappa == 1:
        win = seg[:, :, :d, :]
    else:
        win = seg[:, :, d:, :].reshape(d, n_blocks, d, 2 * k)
    vals = _window_values(win, plan.coefficients(w), kappa)  # (coord, block, column)
    return vals.transpose(1, 0, 2) / math.sqrt(kappa * plan.u_n)


def block_matrix(
    series: np.ndarray,
    plan: PreAvgPlan,
    kappa: int,
    block_i: int,
    w: Optional[WeightFunction] = None,
    n_blocks: Optional[int] = None,
) -> np.ndarray:
    """Single block matrix; column j is the window starting at ``block_starts``."""
    _check_kappa(kappa)
    series = np.atleast_2d(series)
    d, n = series.shape
    limit = n_big_blocks(n, d, plan.k_n) if n_blocks is None else n_blocks
    if not 0 <= block_i < limit:
        raise IndexError(f"block {block_i} outside [0, {limit - 1}]")
    starts = block_starts(kappa, block_i + 1, d, plan.k_n)[block_i]
    cols = [preavg_at(series, plan, kappa, int(s), w) for s in starts]
    return np.column_stack(cols) / math.sqrt(kappa * plan.u_n)


def paired_block_matrices(
    series: np.ndarray,
    plan: PreAvgPlan,
    n_pairs: int,
    w: Optional[WeightFunction] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Frequency-1 block matrices at ``(2 i d + j - 1) k_n`` and ``(2 i d + d + j - 1) k_n``."""
    series = np.atleast_2d(series)
    d, n = series.shape
    k = plan.k_n
    span = 2 * d * k * n_pairs
    if n_pairs < 0 or span > n:
        raise IndexError(f"{n_pairs} paired blocks need {span} samples, series has {n}")
    seg = series[:, :span].reshape(d, n_pairs, 2, d, k)
    vals = seg @ plan.coefficients(w)  # (coord, pair, half, column)
    mats = vals.transpose(1, 2, 0, 3) / math.sqrt(plan.u_n)
    return mats[:, 0], mats[:, 1]
