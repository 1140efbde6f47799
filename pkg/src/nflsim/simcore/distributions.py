from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .types import ProbeLog, ProbeRecord

Histogram = dict[int, float]


@dataclass(frozen=True)
class PairHistograms:
    delay: Histogram = field(default_factory=dict)
    hops: Histogram = field(default_factory=dict)
    empty: bool = True
    count: int = 0


@dataclass
class DistributionSet:
    """Normalised delay and hop histograms per ordered monitor pair."""

    pairs: dict[tuple[int, int], PairHistograms]

    def __getitem__(self, pair: tuple[int, int]) -> PairHistograms:
        return self.pairs[pair]

    def keys(self):
        return self.pairs.keys()

    def to_json_obj(self) -> dict:
        out = {}
        for (a, b), ph in self.pairs.items():
            out[f"{a}->{b}"] = {
                "delay": {str(k): v for k, v in sorted(ph.delay.items())},
                "hops": {str(k): v for k, v in sorted(ph.hops.items())},
                "empty": ph.empty,
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=1)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DistributionSet":
        pairs = {}
        for key, v in obj.items():
            a, b = (int(x) for x in key.split("->"))
            pairs[(a, b)] = PairHistograms(
                delay={int(k): float(m) for k, m in v["delay"].items()},
                hops={int(k): float(m) for k, m in v["hops"].items()},
                empty=bool(v["empty"]),
            )
        return cls(pairs)


def _normalise(values: np.ndarray) -> Histogram:
    counts = np.bincount(values)
    nz = np.flatnonzero(counts)
    total = counts.sum()
    return {int(k): float(counts[k] / total) for k in nz}


def build_distribution_set(
    records: ProbeLog | Iterable[ProbeRecord], monitors: Sequence[int]
) -> DistributionSet:
    """Bin width 1 for both delay and hops; every ordered monitor pair gets an entry."""
    log = records if isinstance(records, ProbeLog) else ProbeLog.from_records(records)
    pairs: dict[tuple[int, int], PairHistograms] = {}
    if len(log):
        order = np.lexsort((log.pair_dst, log.pair_src))
        src, dst = log.pair_src[order], log.pair_dst[order]
        delay, hops = log.delay[order], log.hops[order]
        bounds = np.flatnonzero((np.diff(src) != 0) | (np.diff(dst) != 0)) + 1
        starts = np.concatenate(([0], bounds))
        ends = np.concatenate((bounds, [len(src)]))
        groups = {(int(src[s]), int(dst[s])): (s, e) for s, e in zip(starts, ends)}
    else:
        groups = {}
        delay = hops = None
    for a in monitors:
        for b in monitors:
            if a == b:
                continue
            if (a, b) in groups:
                s, e = groups[(a, b)]
                pairs[(a, b)] = PairHistograms(_normalise(delay[s:e]), _normalise(hops[s:e]), False, e - s)
            else:
                pairs[(a, b)] = PairHistograms()
    return DistributionSet(pairs)
