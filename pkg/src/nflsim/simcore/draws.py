"""Pre-drawn random inputs for a simulation run.

Each purpose has its own substream of the run seed:

* sends   - Bernoulli(s) per node per timestep
* targets - uniform index over the other ``n - 1`` nodes, per node per timestep
* holds   - Bernoulli(h) per anomalous node (ascending address) per timestep

Draws are produced in blocks; the concatenation of blocks is independent of
the block size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import seeding
from .types import SimConfig


@dataclass
class DrawBlock:
    start: int
    sends: np.ndarray  # (c, n) bool
    targets: np.ndarray  # (c, n) int32, already mapped to actual addresses
    holds: np.ndarray  # (c, n_anomalous) bool

    def __len__(self) -> int:
        return self.sends.shape[0]


class DrawStream:
    def __init__(self, cfg: SimConfig):
        self.n = cfg.graph.node_count
        self.s = cfg.s
        self.h = cfg.h
        self.anomalous = np.array(sorted(cfg.anomalous_set), dtype=np.int64)
        self._send_rng = seeding.make_rng(cfg.seed, seeding.TRAFFIC)
        self._target_rng = seeding.make_rng(cfg.seed, seeding.TARGETS)
        self._hold_rng = seeding.make_rng(cfg.seed, seeding.HOLDS)
        self._offsets = np.arange(self.n, dtype=np.int32)
        self.position = 0

    def block(self, count: int) -> DrawBlock:
        n = self.n
        sends = self._send_rng.random((count, n)) < self.s
        raw = self._target_rng.integers(0, n - 1, size=(count, n), dtype=np.int32)
        targets = raw + (raw >= self._offsets)
        holds = self._hold_rng.random((count, len(self.anomalous))) < self.h
        blk = DrawBlock(self.position, sends, targets.astype(np.int32), holds)
        self.position += count
        return blk
