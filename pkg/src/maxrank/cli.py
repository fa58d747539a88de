"""Command-line entry point: ``maxrank {simulate,test,mc,oracle,weights}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .harness import ExperimentConfig, emit_rows, emit_table, emit_weight_plot, run_experiment, summarise
from .models import PathDataset, PerturbationConfig, attach_perturbation, parse_model_label, simulate_path
from .oracle import LimitParams, check_pair_consistency, estimate_gamma
from .rankstats import compute_report
from .weights import WeightFunction, canonical_pair, validate_pair

log = logging.getLogger("maxrank")


def _seed(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.replace(",", " ").split())


def _weights(args) -> tuple[WeightFunction, WeightFunction]:
    g, h = canonical_pair()
    if getattr(args, "g", None):
        g = WeightFunction.load(args.g, "g")
    if getattr(args, "h", None):
        h = WeightFunction.load(args.h, "h")
    return g, h


def _load_path(p: str) -> PathDataset:
    return PathDataset.load_npz(p) if p.endswith(".npz") else PathDataset.from_csv(p)


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_simulate(args) -> int:
    model = parse_model_label(args.model)
    path = simulate_path(
        model,
        args.delta_n,
        args.T,
        PerturbationConfig.scaled_identity(model.d, args.sigma_tilde_scale),
        _seed(args.seed),
        keep_latent=args.latent,
    )
    if args.out.endswith(".npz"):
        path.save_npz(args.out)
    else:
        path.to_csv(args.out, with_perturbation=not args.no_perturbation)
    log.info("wrote %d observations of %s to %s", path.n_obs, model.label, args.out)
    return 0


def cmd_test(args) -> int:
    if args.path:
        path = _load_path(args.path)
        if np.isnan(path.Xprime).any():
            pert = PerturbationConfig.scaled_identity(path.d, args.sigma_tilde_scale)
            path = attach_perturbation(path, pert, _seed(args.seed))
            log.info("no perturbation columns; drew X' from seed %s", args.seed)
    else:
        if not (args.model and args.delta_n):
            raise SystemExit("test: give --path or both --model and --delta-n")
        model = parse_model_label(args.model)
        pert = PerturbationConfig.scaled_identity(model.d, args.sigma_tilde_scale)
        path = simulate_path(model, args.delta_n, args.T, pert, _seed(args.seed), keep_latent=False)
    g, h = _weights(args)
    rep = compute_report(path, g, h, args.theta, args.k_n, args.variance_mode, args.alpha)
    _write(rep.to_json(indent=2), args.out)
    return 0


_TYPES = {"int": int, "float": float, "str": str}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    for f in fields(ExperimentConfig):
        kind = ExperimentConfig._types[f.name]
        kind = kind if kind in (int, float, str) else int
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=kind, default=None)


def cmd_mc(args) -> int:
    overrides = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig)}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, **overrides)
    else:
        cfg = ExperimentConfig.from_mapping(overrides)

    def progress(i, n):
        if i % max(1, n // 10) == 0:
            log.info("rep %d/%d", i, n)

    report = run_experiment(cfg, progress)
    emit_table(report, args.out, args.format)
    if args.rows:
        emit_rows(report, args.rows)
    print(summarise(report))
    return 0


def cmd_oracle(args) -> int:
    if args.params:
        u = LimitParams.from_dict(json.loads(Path(args.params).read_text()))
    else:
        u = LimitParams.random(args.d, args.q or args.d, _seed(args.seed), args.rank, args.noise_scale)
    g, h = _weights(args)
    out = {"params": u.to_dict(), "r": args.r, "substeps": args.substeps}
    if args.pair:
        out["pair"] = check_pair_consistency(
            u, g, h, args.r, args.n_draws, args.substeps, _seed(args.seed), args.workers
        ).to_dict()
    else:
        w = g if args.kappa == 1 else h
        out["estimate"] = estimate_gamma(
            u, w, args.kappa, args.r, args.n_draws, args.substeps, _seed(args.seed), args.workers
        ).to_dict()
        out["kappa"] = args.kappa
    _write(json.dumps(out, indent=2), args.out)
    return 0


def cmd_weights(args) -> int:
    g, h = _weights(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g.save(out / "g.txt")
    h.save(out / "h.txt")
    emit_weight_plot(g, h, args.n_points, out / "weights.csv")
    check = validate_pair(g, h, args.tol)
    info = {
        "ok": check.ok,
        "tol": check.tol,
        "residuals": check.residuals,
        "g": g.moments.__dict__,
        "h": h.moments.__dict__,
    }
    print(json.dumps(info, indent=2))
    return 0 if check.ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="maxrank", description="Maximal-rank test for noisy high-frequency data.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def weight_flags(p):
        p.add_argument("--g", help="breakpoint file for the frequency-1 weight")
        p.add_argument("--h", help="breakpoint file for the frequency-2 weight")

    p = sub.add_parser("simulate", help="simulate one path from the model zoo")
    p.add_argument("--model", required=True, help="zoo label, e.g. d1m1")
    p.add_argument("--delta-n", type=float, required=True)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--seed", default="0", help="one or more non-negative ints")
    p.add_argument("--sigma-tilde-scale", type=float, default=2.0)
    p.add_argument("--latent", action="store_true", help="keep X in the .npz output")
    p.add_argument("--no-perturbation", action="store_true", help="omit X' columns from CSV")
    p.add_argument("--out", required=True, help=".csv or .npz")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("test", help="rank test on one path, JSON report")
    p.add_argument("--path", help="CSV or .npz produced by `simulate` (or observed data)")
    p.add_argument("--model")
    p.add_argument("--delta-n", type=float)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--seed", default="0")
    p.add_argument("--sigma-tilde-scale", type=float, default=2.0)
    p.add_argument("--theta", type=float, default=1.0 / 3.0)
    p.add_argument("--k-n", type=int, default=None, help="override the window size")
    p.add_argument("--variance-mode", choices=("combined", "prime"), default="combined")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out")
    weight_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("mc", help="Monte Carlo experiment, writes a table row")
    p.add_argument("--config", help="flat key = value file")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--rows", help="optional per-repetition CSV")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("oracle", help="Monte Carlo limit functionals")
    p.add_argument("--params", help="JSON with alpha, beta, gamma, a, phi")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--noise-scale", type=float, default=0.05)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--kappa", type=int, choices=(1, 2), default=1)
    p.add_argument("--pair", action="store_true", help="compare g at frequency 1 with h at frequency 2")
    p.add_argument("--n-draws", type=int, default=10_000)
    p.add_argument("--substeps", type=int, default=5000)
    p.add_argument("--seed", default="0")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out")
    weight_flags(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("weights", help="dump the weight pair and check the moment conditions")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--n-points", type=int, default=201)
    p.add_argument("--tol", type=float, default=1e-12)
    weight_flags(p)
    p.set_defaults(func=cmd_weights)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
