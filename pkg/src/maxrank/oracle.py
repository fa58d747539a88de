"""Monte Carlo evaluation of the limiting block functionals.

For a parameter point ``u = (alpha, beta, gamma, a, phi)`` and a weight ``g``
each draw produces d vectors in R^{2d}. Column ``j`` lives on the time
interval ``[kappa (j - 1), kappa j]`` and is built from

* x part: ``kappa**-0.5 * alpha @ int g dW``
* y part: ``kappa**-1 * a * int g ds``
  ``+ kappa**-1 * sum_{k,m} gamma[:, k, m] int g W^k dW^m``
  ``+ kappa**-0.5 * beta @ int g dW'``
  ``+ kappa**-1 * sqrt(psi1(g) / theta**3) * phi**0.5 @ Theta_{kappa j}``

with the weight time-rescaled to ``g(s / kappa - (j - 1))``. Integrals are
left-point sums on ``substeps`` points per unit time. The linear Gaussian sums
are sampled exactly in law from their variance ``sum g_i**2 ds``; a Brownian
path is simulated only when ``gamma`` is non-zero, since the iterated sum
needs the running level of ``W`` (which is not reset between columns).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .matperturb import gamma_r_batch
from .rng import Seed, seed_entropy, stream
from .weights import WeightFunction

__all__ = [
    "LimitParams",
    "PsiBlock",
    "GammaEstimate",
    "PairConsistency",
    "simulate_psi_block",
    "simulate_psi",
    "estimate_gamma",
    "check_pair_consistency",
]

CHUNK_DRAWS = 1000
_PATH_BUDGET = 4_000_000  # doubles per chunk of simulated increments


def _psd_root(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


@dataclass(frozen=True)
class LimitParams:
    """Point of the limiting parameter space plus the window constant theta."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    a: np.ndarray
    phi: np.ndarray
    theta: float = 1.0 / 3.0

    def __post_init__(self) -> None:
        alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        d, q = alpha.shape
        beta = np.asarray(self.beta, dtype=float).reshape(d, d)
        gamma = np.asarray(self.gamma, dtype=float).reshape(d, q, q)
        a = np.asarray(self.a, dtype=float).reshape(d)
        phi = np.asarray(self.phi, dtype=float).reshape(d, d)
        if not np.allclose(phi, phi.T) or np.linalg.eigvalsh(phi).min() < -1e-12:
            raise ValueError("phi must be symmetric positive semi-definite")
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        for name, val in zip(("alpha", "beta", "gamma", "a", "phi"), (alpha, beta, gamma, a, phi)):
            object.__setattr__(self, name, val)

    @property
    def d(self) -> int:
        return self.alpha.shape[0]

    @property
    def q(self) -> int:
        return self.alpha.shape[1]

    @classmethod
    def zeros(cls, d: int, q: int, theta: float = 1.0 / 3.0) -> "LimitParams":
        return cls(np.zeros((d, q)), np.zeros((d, d)), np.zeros((d, q, q)), np.zeros(d), np.zeros((d, d)), theta)

    @classmethod
    def random(
        cls,
        d: int,
        q: int,
        seed: Seed,
        rank: Optional[int] = None,
        noise_scale: float = 0.05,
        gamma_scale: float = 0.5,
        theta: float = 1.0 / 3.0,
    ) -> "LimitParams":
        """Random point with ``rank(alpha) = rank`` and a well-conditioned beta."""
        gen = stream(seed, "oracle", 2**31 - 1)
        rank = min(d, q) if rank is None else rank
        alpha = gen.standard_normal((d, rank)) @ gen.standard_normal((rank, q))
        beta = gen.standard_normal((d, d)) + 2.0 * np.eye(d)
        gamma = gamma_scale * gen.standard_normal((d, q, q))
        a = gen.standard_normal(d)
        L = noise_scale * gen.standard_normal((d, d))
        return cls(alpha, beta, gamma, a, L @ L.T, theta)

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() if isinstance(v, np.ndarray) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "LimitParams":
        return cls(**{k: data[k] for k in ("alpha", "beta", "gamma", "a", "phi")}, theta=data.get("theta", 1.0 / 3.0))


@dataclass(frozen=True)
class PsiBlock:
    """d columns in R^{2d}: ``vectors[j] = (x_j, y_j)``."""

    vectors: np.ndarray
    kappa: int

    @property
    def x(self) -> np.ndarray:
        """``mat(x_1, ..., x_d)`` with the x parts as columns."""
        d = self.vectors.shape[0]
        return self.vectors[:, :d].T

    @property
    def y(self) -> np.ndarray:
        d = self.vectors.shape[0]
        return self.vectors[:, d:].T


def _grid_weights(w: WeightFunction, kappa: int, substeps: int) -> np.ndarray:
    n = kappa * substeps
    return w(np.arange(n) / n)


def simulate_psi(
    u: LimitParams,
    w: WeightFunction,
    kappa: int,
    n: int,
    substeps: int = 5000,
    seed: Seed = 0,
    chunk: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """``n`` independent draws; returns ``(X, Y)`` stacks of shape ``(n, d, d)``.

    ``X[b]`` and ``Y[b]`` hold the x and y parts of the d vectors as columns.
    The stream is keyed by ``(seed, chunk)``.
    """
    if kappa not in (1, 2):
        raise ValueError("kappa must be 1 or 2")
    if substeps < 100:
        raise ValueError("substeps must be >= 100")
    d, q = u.d, u.q
    gen = stream(seed, "oracle", chunk)
    ds = 1.0 / substeps
    gw = _grid_weights(w, kappa, substeps)
    lin_sd = math.sqrt(ds * math.fsum(gw * gw))
    drift_int = ds * math.fsum(gw)
    rk = 1.0 / math.sqrt(kappa)

    if np.any(u.gamma != 0.0):
        I_W, I_iter = _path_integrals(gen, gw, n, d, q, ds)
        y = np.einsum("lkm,bjkm->bjl", u.gamma, I_iter) / kappa
    else:
        I_W = lin_sd * gen.standard_normal((n, d, q))
        y = np.zeros((n, d, d))
    x = rk * np.einsum("lm,bjm->bjl", u.alpha, I_W)
    I_Wp = lin_sd * gen.standard_normal((n, d, d))
    y += rk * np.einsum("lm,bjm->bjl", u.beta, I_Wp)
    y += (drift_int / kappa) * u.a
    theta_draws = gen.standard_normal((n, kappa * d, d))[:, kappa - 1 :: kappa, :]
    noise_sd = math.sqrt(w.moments.psi1 / u.theta**3) / kappa
    y += noise_sd * np.einsum("lm,bjm->bjl", _psd_root(u.phi), theta_draws)
    # (draw, column, coordinate) -> matrices with columns j
    return x.transpose(0, 2, 1), y.transpose(0, 2, 1)


def _path_integrals(gen, gw, n, d, q, ds):
    N = gw.size
    I_W = np.empty((n, d, q))
    I_iter = np.empty((n, d, q, q))
    step = max(1, _PATH_BUDGET // (d * N * q))
    sd = math.sqrt(ds)
    for lo in range(0, n, step):
        m = min(step, n - lo)
        dW = sd * gen.standard_normal((m, d * N, q))
        W = np.cumsum(dW, axis=1)
        W -= dW  # left-point level, continuous across columns
        dW = dW.reshape(m, d, N, q)
        W = W.reshape(m, d, N, q)
        I_W[lo : lo + m] = np.einsum("bjiq,i->bjq", dW, gw)
        I_iter[lo : lo + m] = np.matmul((W * gw[:, None]).swapaxes(-1, -2), dW)
    return I_W, I_iter


def simulate_psi_block(
    u: LimitParams, w: WeightFunction, kappa: int, substeps: int = 5000, seed: Seed = 0
) -> PsiBlock:
    """A single draw of the d block vectors."""
    X, Y = simulate_psi(u, w, kappa, 1, substeps, seed)
    return PsiBlock(np.concatenate([X[0].T, Y[0].T], axis=1), kappa)


@dataclass(frozen=True)
class GammaEstimate:
    gamma: float
    gamma_prime: float
    se_gamma: float
    se_gamma_prime: float
    n_draws: int

    def to_dict(self) -> dict:
        return asdict(self)


def _f_chunk(args) -> np.ndarray:
    u, w, kappa, r, n, substeps, seed, chunk = args
    X, Y = simulate_psi(u, w, kappa, n, substeps, seed, chunk)
    return gamma_r_batch(X, Y, r) ** 2


def sample_f(
    u: LimitParams,
    w: WeightFunction,
    kappa: int,
    r: int,
    n_draws: int,
    substeps: int = 5000,
    seed: Seed = 0,
    workers: Optional[int] = None,
) -> np.ndarray:
    """Draws of ``gamma_r(x, y)**2``; chunking is fixed so results ignore ``workers``."""
    if not 0 <= r <= u.d:
        raise ValueError(f"r must lie in [0, {u.d}]")
    jobs = [
        (u, w, kappa, r, min(CHUNK_DRAWS, n_draws - lo), substeps, seed, c)
        for c, lo in enumerate(range(0, n_draws, CHUNK_DRAWS))
    ]
    workers = workers or int(os.environ.get("MAXRANK_WORKERS", "1"))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_f_chunk, jobs))
    else:
        parts = [_f_chunk(j) for j in jobs]
    return np.concatenate(parts)


def _summarise(F: np.ndarray) -> GammaEstimate:
    n = F.size
    mean = F.mean()
    var = F.var(ddof=1)
    m4 = np.mean((F - mean) ** 4)
    se_var = math.sqrt(max(m4 - var * var, 0.0) / n)
    return GammaEstimate(float(mean), float(var), math.sqrt(var / n), se_var, n)


def estimate_gamma(
    u: LimitParams,
    w: WeightFunction,
    kappa: int,
    r: int,
    n_draws: int = 10_000,
    substeps: int = 5000,
    seed: Seed = 0,
    workers: Optional[int] = None,
) -> GammaEstimate:
    """Sample mean and variance of ``gamma_r(x, y)**2`` with standard errors."""
    if n_draws < 100:
        raise ValueError("n_draws must be >= 100")
    return _summarise(sample_f(u, w, kappa, r, n_draws, substeps, seed, workers))


@dataclass(frozen=True)
class PairConsistency:
    g_kappa1: GammaEstimate
    h_kappa2: GammaEstimate
    z_gamma: float
    z_gamma_prime: float

    def to_dict(self) -> dict:
        return {
            "g_kappa1": self.g_kappa1.to_dict(),
            "h_kappa2": self.h_kappa2.to_dict(),
            "z_gamma": self.z_gamma,
            "z_gamma_prime": self.z_gamma_prime,
        }


def check_pair_consistency(
    u: LimitParams,
    g: WeightFunction,
    h: WeightFunction,
    r: int,
    n_draws: int = 10_000,
    substeps: int = 5000,
    seed: Seed = 0,
    workers: Optional[int] = None,
) -> PairConsistency:
    """Compare the frequency-1 functional of ``g`` with the frequency-2 one of ``h``.

    The two sides use independent streams; z-scores are the differences over
    the combined standard errors.
    """
    ent = seed_entropy(seed)
    eg = estimate_gamma(u, g, 1, r, n_draws, substeps, ent + [0], workers)
    eh = estimate_gamma(u, h, 2, r, n_draws, substeps, ent + [1], workers)
    z = (eg.gamma - eh.gamma) / math.hypot(eg.se_gamma, eh.se_gamma)
    zp = (eg.gamma_prime - eh.gamma_prime) / math.hypot(eg.se_gamma_prime, eh.se_gamma_prime)
    return PairConsistency(eg, eh, float(z), float(zp))
