"""Piecewise-linear pre-averaging weight functions and their moments.

A weight function lives on [0, 1], vanishes at both ends and is stored as a
list of breakpoints. All moment integrals are evaluated segment by segment in
closed form, so there is no quadrature error to tune.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "WeightFunction",
    "PsiMoments",
    "PairCheck",
    "psi_moments",
    "psi1_discrete",
    "sample_grid",
    "triangular",
    "canonical_pair",
    "validate_pair",
    "sample_curves",
    "from_breakpoints",
    "PAIR_C",
]

SQRT3 = math.sqrt(3.0)
# slopes of the asymmetric tent; a + b = 8 and a * b = 4
TENT_A = 2.0 / (2.0 - SQRT3)
TENT_B = 2.0 / (2.0 + SQRT3)
# dilation that equalises the tilted second moments of the pair
PAIR_C = (8.0 + SQRT3) / 8.0


class WeightError(ValueError):
    """Raised for malformed breakpoint lists."""


@dataclass(frozen=True)
class PsiMoments:
    """Derivative, square, mean and tilted-square moments of a weight."""

    psi1: float
    psi2: float
    psi3: float
    psi4: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.psi1, self.psi2, self.psi3, self.psi4)


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """Continuous piecewise-linear function on [0, 1] with g(0) = g(1) = 0.

    Parameters
    ----------
    breakpoints:
        Sequence of ``(x, y)`` pairs with strictly increasing ``x`` starting
        at 0 and ending at 1.
    name:
        Free-form label used in reports and file names.
    """

    breakpoints: tuple[tuple[float, float], ...]
    name: str = "g"
    _xs: np.ndarray = field(init=False, repr=False)
    _ys: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        pts = tuple((float(x), float(y)) for x, y in self.breakpoints)
        object.__setattr__(self, "breakpoints", pts)
        if len(pts) < 2:
            raise WeightError("need at least two breakpoints")
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise WeightError("breakpoints must be finite")
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise WeightError("breakpoints must start at x=0 and end at x=1")
        if np.any(np.diff(xs) <= 0):
            raise WeightError("breakpoint x values must be strictly increasing")
        if ys[0] != 0.0 or ys[-1] != 0.0:
            raise WeightError("weight must vanish at x=0 and x=1")
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ys", ys)
        if not self.moments.psi2 > 0.0:
            raise WeightError("weight function has zero L2 norm")

    def __call__(self, x):
        """Evaluate the weight; zero outside [0, 1]."""
        return np.interp(x, self._xs, self._ys, left=0.0, right=0.0)

    @cached_property
    def moments(self) -> PsiMoments:
        return _segment_moments(self._xs, self._ys)

    def refine(self, x: float) -> "WeightFunction":
        """Return the same function with a collinear breakpoint inserted at ``x``."""
        if not 0.0 < x < 1.0 or x in self._xs:
            raise WeightError(f"cannot insert breakpoint at {x}")
        pts = sorted(self.breakpoints + ((x, float(self(x))),))
        return WeightFunction(tuple(pts), self.name)

    def to_text(self) -> str:
        """One ``x y`` pair per line, full binary64 precision."""
        return "".join(f"{x!r} {y!r}\n" for x, y in self.breakpoints)

    @classmethod
    def from_text(cls, text: str, name: str = "g") -> "WeightFunction":
        pts = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise WeightError(f"expected 'x y', got {line!r}")
            pts.append((float(parts[0]), float(parts[1])))
        return cls(tuple(pts), name)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path, name: str | None = None) -> "WeightFunction":
        path = Path(path)
        return cls.from_text(path.read_text(), name or path.stem)


def _segment_moments(xs: np.ndarray, ys: np.ndarray) -> PsiMoments:
    # exact integrals of linear pieces: g = y0 (1 - t) + y1 t on [x0, x0 + L]
    x0, L = xs[:-1], np.diff(xs)
    y0, y1 = ys[:-1], ys[1:]
    sq = (y0 * y0 + y0 * y1 + y1 * y1) / 3.0
    psi1 = math.fsum((y1 - y0) ** 2 / L)
    psi2 = math.fsum(L * sq)
    psi3 = math.fsum(L * (y0 + y1) / 2.0)
    psi4 = math.fsum(L * x0 * sq + L * L * (y0 * y0 + 2.0 * y0 * y1 + 3.0 * y1 * y1) / 12.0)
    return PsiMoments(psi1, psi2, psi3, psi4)


def psi_moments(w: WeightFunction) -> PsiMoments:
    """Closed-form (psi1, psi2, psi3, psi4) of a piecewise-linear weight."""
    return w.moments


def _check_kn(k_n: int) -> int:
    if int(k_n) != k_n or k_n < 2:
        raise ValueError(f"window length must be an integer >= 2, got {k_n}")
    return int(k_n)


def sample_grid(w: WeightFunction, k_n: int) -> np.ndarray:
    """Values ``w(j / k_n)`` for ``j = 1, ..., k_n - 1``."""
    k_n = _check_kn(k_n)
    return w(np.arange(1, k_n) / k_n)


def psi1_discrete(w: WeightFunction, k_n: int) -> float:
    """Finite-difference analogue of psi1 on the grid ``j / k_n``."""
    k_n = _check_kn(k_n)
    vals = w(np.arange(k_n + 1) / k_n)
    return math.fsum((k_n * np.diff(vals)) ** 2) / k_n


def triangular() -> WeightFunction:
    """The tent ``min(x, 1 - x)``."""
    return WeightFunction(((0.0, 0.0), (0.5, 0.5), (1.0, 0.0)), "tent")


def canonical_pair(c: float = PAIR_C) -> tuple[WeightFunction, WeightFunction]:
    """Matched pair ``(g, h)`` built from two dilated tents.

    ``g(x) = tent(c x)`` has its peak at ``1/(2c)`` and support ``[0, 1/c]``.
    ``h(x) = skew(c x - c + 1)`` where ``skew(y) = max(0, min(a y, b (1 - y)))``
    with ``a = 2/(2 - sqrt 3)``, ``b = 2/(2 + sqrt 3)``; its support is
    ``[(c - 1)/c, 1]`` and its kink sits at ``y* = b/(a + b) = (2 - sqrt 3)/4``
    where it reaches ``1/2``.
    """
    if c < 1.0:
        raise ValueError("dilation c must be >= 1")
    g_pts = [(0.0, 0.0), (0.5 / c, 0.5), (1.0 / c, 0.0)]
    if c > 1.0:
        g_pts.append((1.0, 0.0))
    y_kink = TENT_B / (TENT_A + TENT_B)
    h_pts = [(0.0, 0.0)]
    if c > 1.0:
        h_pts.append(((c - 1.0) / c, 0.0))
    h_pts += [((y_kink + c - 1.0) / c, TENT_A * y_kink), (1.0, 0.0)]
    return WeightFunction(tuple(g_pts), "g_c"), WeightFunction(tuple(h_pts), "h_c")


@dataclass(frozen=True)
class PairCheck:
    """Outcome of checking the matched-pair moment conditions."""

    ok: bool
    residuals: dict[str, float]
    tol: float

    def __bool__(self) -> bool:
        return self.ok


def validate_pair(g: WeightFunction, h: WeightFunction, tol: float = 1e-12) -> PairCheck:
    """Check ``psi1(h) = 4 psi1(g)`` and ``psi_l(h) = psi_l(g)`` for l = 2, 3, 4."""
    mg, mh = g.moments, h.moments
    res = {
        "psi1": mh.psi1 - 4.0 * mg.psi1,
        "psi2": mh.psi2 - mg.psi2,
        "psi3": mh.psi3 - mg.psi3,
        "psi4": mh.psi4 - mg.psi4,
    }
    ok = all(abs(v) <= tol for v in res.values())
    return PairCheck(ok, res, tol)


def sample_curves(
    weights: Iterable[WeightFunction], n_points: int
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Evaluate each weight on a uniform grid of ``n_points`` over [0, 1]."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    x = np.linspace(0.0, 1.0, n_points)
    return x, [w(x) for w in weights]


def from_breakpoints(points: Sequence[Sequence[float]], name: str = "g") -> WeightFunction:
    return WeightFunction(tuple((float(x), float(y)) for x, y in points), name)
