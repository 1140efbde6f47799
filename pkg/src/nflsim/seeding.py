"""Deterministic seed derivation.

Every random consumer gets its own substream keyed by an integer tuple, so
adding draws to one consumer never shifts another.
"""

from __future__ import annotations

import numpy as np

# purpose tags for spawn keys
TOPOLOGY = 1
TRAFFIC = 2
TARGETS = 3
HOLDS = 4
MCMC = 5
CANDIDATE = 6
OBSERVED = 7
PLACEMENT = 8
ANOMALY = 9
SAMPLING = 10
HEALTHY = 11


def derive_seed(root: int, *key: int) -> int:
    """Return a 63-bit seed that depends only on ``root`` and ``key``."""
    ss = np.random.SeedSequence(entropy=int(root), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0]) >> 1


def make_rng(root: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(root), spawn_key=tuple(int(k) for k in key)))


def candidate_key(candidate) -> tuple[int, ...]:
    members = sorted(int(x) for x in candidate)
    return (len(members), *members)
