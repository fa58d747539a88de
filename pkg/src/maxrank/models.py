"""Noisy diffusion models and path simulation on an equidistant grid."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .rng import Seed, stream

__all__ = [
    "ModelSpec",
    "PathDataset",
    "PerturbationConfig",
    "model_zoo",
    "parse_model_label",
    "simulate_path",
    "perturbation_path",
    "attach_perturbation",
    "perturbed_series",
    "grid_steps",
    "NOISE_VARIANCE",
]

NOISE_VARIANCE = 0.0005
RANK_SCAN_POINTS = 10_000
_CHUNK = 1 << 18

Coefficient = Callable[[np.ndarray], np.ndarray]


def _psd_root(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def scan_max_rank(vol: Coefficient, T: float = 1.0, n: int = RANK_SCAN_POINTS) -> int:
    """Maximal rank of ``vol(t) vol(t)^T`` over a uniform grid on [0, T)."""
    t = np.arange(n) * (T / n)
    s = np.linalg.svd(np.asarray(vol(t)), compute_uv=False)
    tol = 1e-10 * max(1.0, float(np.max(s, initial=0.0)))
    return int(np.max(np.sum(s > tol, axis=-1), initial=0))


@dataclass(frozen=True)
class ModelSpec:
    """State-independent drift/volatility model plus Gaussian noise.

    ``drift`` maps an array of times of shape ``(n,)`` to ``(n, d)`` and
    ``vol`` maps it to ``(n, d, q)``.
    """

    d: int
    q: int
    drift: Coefficient
    vol: Coefficient
    noise_cov: np.ndarray
    true_max_rank: Optional[int] = None
    label: str = "custom"

    def __post_init__(self) -> None:
        cov = np.atleast_2d(np.asarray(self.noise_cov, dtype=float))
        if cov.shape != (self.d, self.d):
            raise ValueError(f"noise_cov must be {self.d}x{self.d}")
        if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() < -1e-14:
            raise ValueError("noise_cov must be symmetric positive semi-definite")
        object.__setattr__(self, "noise_cov", cov)
        t = np.array([0.0, 0.5])
        if np.shape(self.drift(t)) != (2, self.d):
            raise ValueError("drift(t) must return shape (len(t), d)")
        if np.shape(self.vol(t)) != (2, self.d, self.q):
            raise ValueError("vol(t) must return shape (len(t), d, q)")
        scanned = scan_max_rank(self.vol)
        if self.true_max_rank is None:
            object.__setattr__(self, "true_max_rank", scanned)
        elif scanned != self.true_max_rank:
            raise ValueError(
                f"{self.label}: declared maximal rank {self.true_max_rank}, scan finds {scanned}"
            )


@dataclass(frozen=True)
class PerturbationConfig:
    """Volatility of the artificial Brownian perturbation (positive definite)."""

    sigma_tilde: np.ndarray

    def __post_init__(self) -> None:
        s = np.atleast_2d(np.asarray(self.sigma_tilde, dtype=float))
        if s.shape[0] != s.shape[1]:
            raise ValueError("sigma_tilde must be square")
        if np.linalg.eigvals(s + s.T).real.min() <= 0.0:
            raise ValueError("sigma_tilde must be positive definite")
        object.__setattr__(self, "sigma_tilde", s)

    @classmethod
    def scaled_identity(cls, d: int, scale: float = 2.0) -> "PerturbationConfig":
        return cls(scale * np.eye(d))


@dataclass
class PathDataset:
    """Observations ``Y`` (d x n_obs) on the grid ``i * delta_n``."""

    delta_n: float
    T: float
    Y: np.ndarray
    Xprime: np.ndarray
    seed: tuple[int, ...] = ()
    model_label: str = "custom"
    X_latent: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.Y.shape[0]

    @property
    def n_obs(self) -> int:
        return self.Y.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_obs) * self.delta_n

    def to_csv(self, path: str | Path, with_perturbation: bool = False) -> None:
        """Columns ``t, Y1..Yd`` (and ``Xp1..Xpd`` on request)."""
        d = self.d
        header = ["t"] + [f"Y{j + 1}" for j in range(d)]
        cols = [self.times, *self.Y]
        if with_perturbation:
            header += [f"Xp{j + 1}" for j in range(d)]
            cols += list(self.Xprime)
        with open(path, "w", newline="") as fh:
            fh.write(f"# delta_n={self.delta_n!r} T={self.T!r} model={self.model_label}\n")
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(zip(*(map(repr, c.tolist()) for c in cols)))

    @classmethod
    def from_csv(cls, path: str | Path) -> "PathDataset":
        with open(path) as fh:
            first = fh.readline()
            meta = dict(re.findall(r"(\w+)=(\S+)", first)) if first.startswith("#") else {}
            if not first.startswith("#"):
                fh.seek(0)
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        t = body[:, 0]
        ycols = [i for i, h in enumerate(header) if h.startswith("Y")]
        xcols = [i for i, h in enumerate(header) if h.startswith("Xp")]
        delta = float(meta.get("delta_n", t[1] - t[0]))
        Y = body[:, ycols].T.copy()
        Xp = body[:, xcols].T.copy() if xcols else np.full_like(Y, np.nan)
        return cls(
            delta_n=delta,
            T=float(meta.get("T", t[-1])),
            Y=Y,
            Xprime=Xp,
            model_label=meta.get("model", "csv"),
        )

    def save_npz(self, path: str | Path) -> None:
        extra = {} if self.X_latent is None else {"X_latent": self.X_latent}
        np.savez_compressed(
            path,
            delta_n=self.delta_n,
            T=self.T,
            Y=self.Y,
            Xprime=self.Xprime,
            seed=np.array(self.seed, dtype=np.int64),
            model_label=self.model_label,
            **extra,
        )

    @classmethod
    def load_npz(cls, path: str | Path) -> "PathDataset":
        with np.load(path) as z:
            return cls(
                delta_n=float(z["delta_n"]),
                T=float(z["T"]),
                Y=z["Y"],
                Xprime=z["Xprime"],
                seed=tuple(int(s) for s in z["seed"]),
                model_label=str(z["model_label"]),
                X_latent=z["X_latent"] if "X_latent" in z.files else None,
            )


def grid_steps(delta_n: float, T: float) -> int:
    """``floor(T / delta_n)``, robust to representation error in ``1/delta_n``."""
    if delta_n <= 0 or T <= 0:
        raise ValueError("delta_n and T must be positive")
    x = T / delta_n
    n = round(x)
    return int(n) if abs(x - n) <= 1e-9 * max(1.0, x) else int(math.floor(x))


# ---------------------------------------------------------------------------
# model zoo

def _const(value) -> Coefficient:
    value = np.asarray(value, dtype=float)

    def f(t):
        t = np.atleast_1d(t)
        return np.broadcast_to(value, t.shape + value.shape)

    return f


def _d1(model_id: int):
    if model_id == 1:
        return _const([0.0]), _const([[1.0]]), 1
    if model_id == 2:
        return _const([0.0]), _const([[0.0]]), 0
    if model_id == 3:
        return (
            _const([1.0]),
            lambda t: (np.atleast_1d(t) <= 0.5).astype(float)[:, None, None],
            1,
        )
    if model_id == 4:
        def drift(t):
            return (1.0 + np.sin(2 * np.pi * np.atleast_1d(t)))[:, None]

        def vol(t):
            return np.cos(2 * np.pi * np.atleast_1d(t))[:, None, None]

        return drift, vol, 1
    raise KeyError(model_id)


def _d2(model_id: int):
    if model_id == 1:
        return _const(np.zeros(2)), _const(np.eye(2)), 2
    if model_id == 2:
        return _const(np.zeros(2)), _const(np.zeros((2, 2))), 0
    if model_id == 3:
        def vol(t):
            early = (np.atleast_1d(t) <= 0.5).astype(float)
            out = np.zeros(early.shape + (2, 2))
            out[:, 0, 0] = early
            out[:, 1, 1] = 1.0 - early
            return out

        return _const([1.0, -1.0]), vol, 1
    if model_id == 4:
        def drift(t):
            a = 2 * np.pi * np.atleast_1d(t)
            return np.stack([1.0 + np.sin(a), 1.0 + np.cos(a)], axis=-1)

        def vol(t):
            a = 2 * np.pi * np.atleast_1d(t)
            c, s = np.cos(a), np.sin(a)
            return np.stack([np.stack([c, c], -1), np.stack([s, s], -1)], axis=-2)

        return drift, vol, 1
    raise KeyError(model_id)


def _d3(model_id: int):
    if model_id == 1:
        return _const(np.zeros(3)), _const(np.eye(3)), 3
    if model_id == 2:
        return _const(np.zeros(3)), _const(np.zeros((3, 3))), 0
    if model_id == 3:
        def vol(t):
            early = (np.atleast_1d(t) <= 0.5).astype(float)
            out = np.zeros(early.shape + (3, 3))
            out[:, 0, 0] = early
            out[:, 1, 1] = 1.0 - early
            return out

        return _const([1.0, -1.0, 5.0]), vol, 1
    if model_id == 4:
        def drift(t):
            a = 2 * np.pi * np.atleast_1d(t)
            return np.stack([1.0 + np.sin(a), 1.0 + np.cos(a), np.zeros_like(a)], axis=-1)

        def vol(t):
            a = 2 * np.pi * np.atleast_1d(t)
            out = np.zeros(a.shape + (3, 3))
            out[:, 0, 0] = out[:, 0, 1] = np.cos(a)
            out[:, 1, 0] = out[:, 1, 1] = np.sin(a)
            out[:, 2, 2] = 1.0
            return out

        return drift, vol, 2
    raise KeyError(model_id)


_ZOO = {1: _d1, 2: _d2, 3: _d3}


def model_zoo(d: int, model_id: int, noise_variance: float = NOISE_VARIANCE) -> ModelSpec:
    """One of the twelve simulation-study models, labelled ``d{d}m{id}``."""
    if d not in _ZOO:
        raise KeyError(f"no models for d={d}")
    try:
        drift, vol, rank = _ZOO[d](model_id)
    except KeyError:
        raise KeyError(f"unknown model id {model_id} for d={d}") from None
    return ModelSpec(
        d=d,
        q=d,
        drift=drift,
        vol=vol,
        noise_cov=noise_variance * np.eye(d),
        true_max_rank=rank,
        label=f"d{d}m{model_id}",
    )


def parse_model_label(label: str) -> ModelSpec:
    m = re.fullmatch(r"d(\d)m(\d)", label.strip())
    if not m:
        raise ValueError(f"model label must look like 'd2m3', got {label!r}")
    return model_zoo(int(m.group(1)), int(m.group(2)))


# ---------------------------------------------------------------------------
# simulation

def _seed_tuple(seed: Seed) -> tuple[int, ...]:
    return (int(seed),) if isinstance(seed, (int, np.integer)) else tuple(int(s) for s in seed)


def _brownian(gen: np.random.Generator, d: int, n_steps: int, dt: float, mix=None) -> np.ndarray:
    """Path ``mix @ W`` of a d-dim Brownian motion on ``n_steps + 1`` points."""
    out = np.empty((d, n_steps + 1))
    out[:, 0] = 0.0
    sd = math.sqrt(dt)
    pos = 0
    level = np.zeros(d)
    while pos < n_steps:
        m = min(_CHUNK, n_steps - pos)
        inc = gen.standard_normal((d, m)) * sd
        if mix is not None:
            inc = mix @ inc
        np.cumsum(inc, axis=1, out=out[:, pos + 1 : pos + 1 + m])
        out[:, pos + 1 : pos + 1 + m] += level[:, None]
        level = out[:, pos + m].copy()
        pos += m
    return out


def _euler(model: ModelSpec, gen: np.random.Generator, n_steps: int, dt: float) -> np.ndarray:
    d, q = model.d, model.q
    X = np.empty((d, n_steps + 1))
    X[:, 0] = 0.0
    sd = math.sqrt(dt)
    pos = 0
    level = np.zeros(d)
    while pos < n_steps:
        m = min(_CHUNK, n_steps - pos)
        t = (pos + np.arange(m)) * dt
        xi = gen.standard_normal((m, q))
        inc = np.asarray(model.drift(t)) * dt + np.einsum("tdq,tq->td", model.vol(t), xi) * sd
        np.cumsum(inc.T, axis=1, out=X[:, pos + 1 : pos + 1 + m])
        X[:, pos + 1 : pos + 1 + m] += level[:, None]
        level = X[:, pos + m].copy()
        pos += m
    return X


def perturbation_path(
    d: int, n_steps: int, delta_n: float, pert: PerturbationConfig, seed: Seed
) -> np.ndarray:
    """``sigma_tilde W'`` on the observation grid, drawn from the perturbation stream."""
    return _brownian(stream(seed, "perturbation"), d, n_steps, delta_n, pert.sigma_tilde)


def attach_perturbation(path: PathDataset, pert: Optional[PerturbationConfig] = None, seed: Seed = 0) -> PathDataset:
    """Copy of ``path`` with a freshly drawn ``X'`` (for observed data without one)."""
    pert = pert or PerturbationConfig.scaled_identity(path.d)
    Xp = perturbation_path(path.d, path.n_obs - 1, path.delta_n, pert, seed)
    return replace(path, Xprime=Xp, seed=_seed_tuple(seed))


def simulate_path(
    model: ModelSpec,
    delta_n: float,
    T: float = 1.0,
    pert: Optional[PerturbationConfig] = None,
    seed: Seed = 0,
    keep_latent: bool = True,
) -> PathDataset:
    """Simulate ``Y = X + eps`` and the perturbation path ``X' = sigma_tilde W'``.

    ``X`` is a left-point Euler scheme at the observation step started at 0,
    ``eps`` is i.i.d. ``N(0, noise_cov)``. The Brownian driver, the noise and
    ``W'`` come from three disjoint streams of ``seed``.
    """
    n_steps = grid_steps(delta_n, T)
    pert = pert or PerturbationConfig.scaled_identity(model.d)
    if pert.sigma_tilde.shape != (model.d, model.d):
        raise ValueError("sigma_tilde dimension does not match the model")
    X = _euler(model, stream(seed, "brownian"), n_steps, delta_n)
    noise_root = _psd_root(model.noise_cov)
    gen = stream(seed, "noise")
    Y = X.copy() if keep_latent else X
    for pos in range(0, n_steps + 1, _CHUNK):
        m = min(_CHUNK, n_steps + 1 - pos)
        Y[:, pos : pos + m] += noise_root @ gen.standard_normal((model.d, m))
    Xp = perturbation_path(model.d, n_steps, delta_n, pert, seed)
    return PathDataset(
        delta_n=float(delta_n),
        T=float(T),
        Y=Y,
        Xprime=Xp,
        seed=_seed_tuple(seed),
        model_label=model.label,
        X_latent=X if keep_latent else None,
    )


def perturbed_series(path: PathDataset, kappa: int, u_n: float) -> np.ndarray:
    """``Y + sqrt(kappa * u_n) * X'`` on the whole grid."""
    if kappa not in (1, 2):
        raise ValueError("kappa must be 1 or 2")
    if u_n <= 0:
        raise ValueError("u_n must be positive")
    if np.isnan(path.Xprime).any():
        raise ValueError("path has no perturbation process")
    return path.Y + math.sqrt(kappa * u_n) * path.Xprime
