"""Determinant expansion coefficients for rank detection by perturbation.

For square ``A`` and ``B`` of order d, ``det(A + lam B)`` is a polynomial in
``lam`` whose coefficient of ``lam**(d - r)`` is the sum of determinants of
all matrices mixing r columns of ``A`` with d - r columns of ``B`` (columns
kept in place). If ``rank(A) <= r`` all lower coefficients vanish, which is
what makes the ratio ``det(A + 2 lam B) / det(A + lam B)`` reveal the rank.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .rng import stream

__all__ = [
    "gamma_r",
    "gamma_prime_r",
    "gamma_r_batch",
    "det_poly_coefficients",
    "rank_ratio_probe",
    "DegenerateDrawError",
]


class DegenerateDrawError(ArithmeticError):
    """The random perturbation produced a vanishing denominator."""


def _as_square(*mats) -> list[np.ndarray]:
    out = [np.asarray(m, dtype=float) for m in mats]
    shape = out[0].shape
    if len(shape) != 2 or shape[0] != shape[1]:
        raise ValueError(f"expected a square matrix, got shape {shape}")
    for m in out[1:]:
        if m.shape != shape:
            raise ValueError(f"dimension mismatch: {shape} vs {m.shape}")
    if not all(np.all(np.isfinite(m)) for m in out):
        raise ValueError("matrix entries must be finite")
    return out


def gamma_r(A, B, r: int) -> float:
    """Sum of ``det(G)`` over matrices taking r columns from A, the rest from B."""
    A, B = _as_square(A, B)
    d = A.shape[0]
    if r == -1:
        return 0.0
    if not 0 <= r <= d:
        raise ValueError(f"r must lie in [-1, {d}], got {r}")
    total = 0.0
    for cols in combinations(range(d), r):
        G = B.copy()
        G[:, cols] = A[:, cols]
        total += np.linalg.det(G)
    return float(total)


def gamma_r_batch(A: np.ndarray, B: np.ndarray, r: int) -> np.ndarray:
    """:func:`gamma_r` over stacks of matrices with shape ``(..., d, d)``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    d = A.shape[-1]
    if r == -1:
        return np.zeros(A.shape[:-2])
    if not 0 <= r <= d:
        raise ValueError(f"r must lie in [-1, {d}], got {r}")
    total = np.zeros(A.shape[:-2])
    for cols in combinations(range(d), r):
        G = B.copy()
        G[..., :, cols] = A[..., :, cols]
        total += np.linalg.det(G)
    return total


def gamma_prime_r(A, B, C, r: int) -> float:
    """Like :func:`gamma_r` with exactly one remaining column taken from C.

    Sums over all placements of r columns of A, one column of C and d - r - 1
    columns of B. Zero when ``r = d`` (no column left for C).
    """
    A, B, C = _as_square(A, B, C)
    d = A.shape[0]
    if not 0 <= r <= d:
        raise ValueError(f"r must lie in [0, {d}], got {r}")
    if r == d:
        return 0.0
    total = 0.0
    for cols in combinations(range(d), r):
        rest = [i for i in range(d) if i not in cols]
        for c in rest:
            G = B.copy()
            G[:, cols] = A[:, cols]
            G[:, c] = C[:, c]
            total += np.linalg.det(G)
    return float(total)


def det_poly_coefficients(A, B, check: bool = True) -> np.ndarray:
    """Coefficients ``c_r`` with ``det(A + lam B) = sum_r lam**(d - r) c_r``.

    With ``check`` the expansion is compared against direct determinants at
    d + 1 distinct ``lam`` values and an ``ArithmeticError`` is raised on a
    mismatch beyond round-off.
    """
    A, B = _as_square(A, B)
    d = A.shape[0]
    coef = np.array([gamma_r(A, B, r) for r in range(d + 1)])
    if check:
        scale = (1.0 + np.linalg.norm(A) + np.linalg.norm(B)) ** d
        for lam in np.linspace(0.5, 1.5, d + 1):
            direct = np.linalg.det(A + lam * B)
            poly = sum(lam ** (d - r) * coef[r] for r in range(d + 1))
            if abs(direct - poly) > 1e-9 * scale * max(1.0, lam) ** d:
                raise ArithmeticError(
                    f"determinant expansion mismatch at lam={lam}: {direct} vs {poly}"
                )
    return coef


def rank_ratio_probe(A, r: int, lam: float, seed) -> float:
    """``det(A + 2 lam B) / det(A + lam B)`` for a seeded Gaussian ``B``.

    Tends to ``2**(d - r)`` as ``lam -> 0`` when ``rank(A) <= r``; the rank
    condition is the caller's responsibility.
    """
    (A,) = _as_square(A)
    d = A.shape[0]
    if not 0.0 < lam <= 1.0:
        raise ValueError("lam must lie in (0, 1]")
    if not 0 <= r <= d:
        raise ValueError(f"r must lie in [0, {d}]")
    B = stream(seed, "probe").standard_normal((d, d))
    den = np.linalg.det(A + lam * B)
    if den == 0.0:
        raise DegenerateDrawError("perturbed determinant vanished")
    return float(np.linalg.det(A + 2.0 * lam * B) / den)
