"""Keyed counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, stream id, *counter)``,
so independent consumers never share state and results do not depend on the
order or process in which streams are opened.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

Seed = Union[int, Sequence[int]]

STREAMS = {
    "brownian": 0,
    "noise": 1,
    "perturbation": 2,
    "probe": 3,
    "oracle": 4,
    "theta": 5,
}


def seed_entropy(seed: Seed) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        seed = [int(seed)]
    ent = [int(s) for s in seed]
    if any(s < 0 for s in ent):
        raise ValueError("seeds must be non-negative integers")
    return ent


def stream(seed: Seed, name: str, *counter: int) -> np.random.Generator:
    """Generator for the named stream of ``seed``, optionally sub-keyed."""
    key = (STREAMS[name],) + tuple(int(c) for c in counter)
    ss = np.random.SeedSequence(seed_entropy(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def rep_seed(master_seed: int, rep: int) -> tuple[int, int]:
    """Seed of repetition ``rep`` in a Monte Carlo run."""
    return (int(master_seed), int(rep))
