"""Monte Carlo driver reproducing the simulation-study tables."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .models import PerturbationConfig, parse_model_label, simulate_path
from .preavg import n_blocks_for, window_size
from .rankstats import DegenerateStatisticError, compute_report
from .rng import rep_seed
from .weights import WeightFunction, canonical_pair, sample_curves

__all__ = [
    "ExperimentConfig",
    "MCReport",
    "run_experiment",
    "emit_table",
    "load_table",
    "emit_rows",
    "emit_weight_plot",
    "default_workers",
]

WORKERS_ENV = "MAXRANK_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _parse_value(raw: str, kind):
    raw = raw.strip()
    if kind is bool:
        return raw.lower() in ("1", "true", "yes", "on")
    if raw.lower() in ("none", ""):
        return None
    if kind in (int, Optional[int]):
        return int(float(raw)) if "e" in raw.lower() else int(raw)
    if kind in (float,):
        if "/" in raw:
            num, den = raw.split("/", 1)
            return float(num) / float(den)
        return float(raw)
    return raw


@dataclass
class ExperimentConfig:
    """One row of a simulation table.

    ``model`` is a zoo label such as ``"d2m3"``. ``weights_g``/``weights_h``
    optionally point at breakpoint files replacing the canonical pair.
    """

    model: str = "d1m1"
    delta_n: float = 1e-5
    T: float = 1.0
    theta: float = 1.0 / 3.0
    sigma_tilde_scale: float = 2.0
    alpha: float = 0.05
    n_reps: int = 500
    master_seed: int = 0
    k_n_override: Optional[int] = None
    variance_mode: str = "combined"
    workers: int = field(default_factory=default_workers)
    weights_g: Optional[str] = None
    weights_h: Optional[str] = None

    _types = {
        "model": str, "delta_n": float, "T": float, "theta": float,
        "sigma_tilde_scale": float, "alpha": float, "n_reps": int, "master_seed": int,
        "k_n_override": Optional[int], "variance_mode": str, "workers": int,
        "weights_g": str, "weights_h": str,
    }

    def __post_init__(self) -> None:
        if self.n_reps < 1:
            raise ValueError("n_reps must be >= 1")
        if not self.delta_n > 0:
            raise ValueError("delta_n must be positive")
        if self.variance_mode not in ("combined", "prime"):
            raise ValueError("variance_mode must be 'combined' or 'prime'")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        parse_model_label(self.model)

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        vals = {}
        for k, v in data.items():
            vals[k] = _parse_value(v, cls._types[k]) if isinstance(v, str) else v
        return cls(**vals)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "ExperimentConfig":
        """Flat ``key = value`` file; ``#`` starts a comment."""
        data = {}
        for n, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected 'key = value'")
            k, v = line.split("=", 1)
            data[k.strip()] = v.strip()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(data)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items() if v is not None)

    def weights(self) -> tuple[WeightFunction, WeightFunction]:
        g, h = canonical_pair()
        if self.weights_g:
            g = WeightFunction.load(self.weights_g)
        if self.weights_h:
            h = WeightFunction.load(self.weights_h)
        return g, h


@dataclass
class MCReport:
    config: dict
    rows: list[dict]
    d: int
    true_rank: int
    k_n: int
    n_blocks: int
    n_used: int
    n_excluded: int
    moments: list[float]
    variance: float
    rejection: list[float]
    rejection_leq: list[float]
    hit_rate: float
    fallback_rate: float
    wall_time: float

    def table_row(self) -> dict:
        row = {"delta_n": self.config["delta_n"], "n_blocks": self.n_blocks}
        for i, m in enumerate(self.moments, 1):
            row[f"moment_{i}"] = m
        for r, p in enumerate(self.rejection):
            row[f"reject_{r}"] = p
        row["hit_rate"] = self.hit_rate
        return row

    def to_dict(self, with_rows: bool = False) -> dict:
        out = asdict(self)
        if not with_rows:
            out.pop("rows")
        return out


def _run_rep(args) -> dict:
    cfg, rep = args
    model = parse_model_label(cfg.model)
    g, h = cfg.weights()
    seed = rep_seed(cfg.master_seed, rep)
    path = simulate_path(
        model,
        cfg.delta_n,
        cfg.T,
        PerturbationConfig.scaled_identity(model.d, cfg.sigma_tilde_scale),
        seed,
        keep_latent=False,
    )
    row = {"rep": rep, "seed": list(seed)}
    try:
        rep_ = compute_report(path, g, h, cfg.theta, cfg.k_n_override, cfg.variance_mode, cfg.alpha)
    except DegenerateStatisticError as exc:
        row["error"] = str(exc)
        return row
    row.update(
        S1=rep_.S1,
        S2=rep_.S2,
        r_hat=rep_.r_hat,
        r_hat_int=rep_.r_hat_int,
        variance=rep_.variance,
        fallback=rep_.used_fallback_variance,
        z_true=rep_.standardized[model.true_max_rank],
    )
    for r in range(model.d + 1):
        row[f"reject_eq_{r}"] = rep_.decisions[f"reject_eq_{r}"]
        row[f"reject_leq_{r}"] = rep_.decisions[f"reject_leq_{r}"]
    return row


def run_experiment(cfg: ExperimentConfig, progress=None) -> MCReport:
    """Simulate ``n_reps`` paths, test each one and aggregate in rep order.

    Repetition ``i`` uses seed ``(master_seed, i)``, so the report does not
    depend on ``workers``. Degenerate repetitions are counted, not resampled.
    """
    start = time.perf_counter()
    model = parse_model_label(cfg.model)
    k_n = window_size(cfg.delta_n, cfg.theta, cfg.k_n_override)
    jobs = [(cfg, i) for i in range(cfg.n_reps)]
    if cfg.workers > 1 and cfg.n_reps > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            rows = list(ex.map(_run_rep, jobs, chunksize=max(1, cfg.n_reps // (4 * cfg.workers))))
    else:
        rows = []
        for job in jobs:
            rows.append(_run_rep(job))
            if progress:
                progress(len(rows), cfg.n_reps)
    good = [r for r in rows if "error" not in r]
    d, R = model.d, model.true_max_rank
    z = np.array([r["z_true"] for r in good])
    nan = float("nan")
    moments = [float(np.mean(z**p)) if z.size else nan for p in range(1, 5)]
    variance = float(np.var(z)) if z.size else nan

    def prop(key):
        return float(np.mean([r[key] for r in good])) if good else nan

    return MCReport(
        config=asdict(cfg),
        rows=rows,
        d=d,
        true_rank=R,
        k_n=k_n,
        n_blocks=n_blocks_for(cfg.delta_n, cfg.T, d, k_n),
        n_used=len(good),
        n_excluded=len(rows) - len(good),
        moments=moments,
        variance=variance,
        rejection=[prop(f"reject_eq_{r}") for r in range(d + 1)],
        rejection_leq=[prop(f"reject_leq_{r}") for r in range(d + 1)],
        hit_rate=float(np.mean([r["r_hat_int"] == R for r in good])) if good else nan,
        fallback_rate=prop("fallback"),
        wall_time=time.perf_counter() - start,
    )


_META = ["model", "true_rank", "k_n", "n_used", "n_excluded", "variance", "fallback_rate", "wall_time"]


def emit_table(report: MCReport, path: str | Path, fmt: Optional[str] = None) -> Path:
    """Write the aggregate table row as CSV or JSON.

    CSV columns: ``delta_n, n_blocks, moment_1..4, reject_0..d, hit_rate``
    followed by bookkeeping columns. Floats are written with ``repr``.
    """
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    row = report.table_row()
    meta = {
        "model": report.config["model"],
        "true_rank": report.true_rank,
        "k_n": report.k_n,
        "n_used": report.n_used,
        "n_excluded": report.n_excluded,
        "variance": report.variance,
        "fallback_rate": report.fallback_rate,
        "wall_time": report.wall_time,
    }
    if fmt == "json":
        path.write_text(json.dumps({"table": row, "meta": meta, "config": report.config}, indent=2))
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(row) + _META)
            w.writerow([_fmt(v) for v in list(row.values()) + [meta[k] for k in _META]])
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def load_table(path: str | Path) -> dict:
    """Inverse of :func:`emit_table`: the aggregate row plus bookkeeping."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        return {**data["table"], **data["meta"]}
    with open(path, newline="") as fh:
        head, vals = list(csv.reader(fh))[:2]
    out = {}
    for k, v in zip(head, vals):
        if k == "model":
            out[k] = v
        elif k in ("n_blocks", "true_rank", "k_n", "n_used", "n_excluded"):
            out[k] = int(v)
        else:
            out[k] = float(v)
    return out


def emit_rows(report: MCReport, path: str | Path) -> Path:
    """Per-repetition rows as CSV."""
    path = Path(path)
    keys: list[str] = []
    for r in report.rows:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in report.rows:
            w.writerow({k: (_fmt(v) if not isinstance(v, list) else " ".join(map(str, v))) for k, v in r.items()})
    return path


def emit_weight_plot(g: WeightFunction, h: WeightFunction, n_points: int, path: str | Path) -> Path:
    """Uniform-grid samples ``x, g(x), h(x)`` for external plotting."""
    x, (gv, hv) = sample_curves((g, h), n_points)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", g.name, h.name])
        w.writerows(zip(*(map(repr, a.tolist()) for a in (x, gv, hv))))
    return path


def summarise(report: MCReport) -> str:
    """Human-readable one-block summary."""
    c = report.config
    lines = [
        f"model {c['model']}  delta_n={c['delta_n']:g}  k_n={report.k_n}  blocks={report.n_blocks}"
        f"  reps={report.n_used} (+{report.n_excluded} excluded)",
        "moments " + " ".join(f"{m:.3f}" for m in report.moments),
        "reject  " + " ".join(f"O{r}={p:.3f}" for r, p in enumerate(report.rejection)),
        f"hit rate {report.hit_rate:.3f}   wall {report.wall_time:.1f}s",
    ]
    if not math.isnan(report.fallback_rate) and report.fallback_rate > 0:
        lines.append(f"fallback variance used in {report.fallback_rate:.1%} of reps")
    return "\n".join(lines)
