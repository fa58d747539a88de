"""Testing the maximal rank of a noisy diffusion's volatility from high-frequency data."""

from .weights import WeightFunction, canonical_pair, psi_moments, validate_pair
from .models import ModelSpec, PathDataset, PerturbationConfig, model_zoo, simulate_path
from .rankstats import RankTestReport, compute_report

__version__ = "0.1.0"

__all__ = [
    "WeightFunction",
    "canonical_pair",
    "psi_moments",
    "validate_pair",
    "ModelSpec",
    "PathDataset",
    "PerturbationConfig",
    "model_zoo",
    "simulate_path",
    "RankTestReport",
    "compute_report",
]
