from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

import numpy as np

from ..topology import Graph

BACKGROUND = 0
PROBE = 1


class ConfigError(ValueError):
    pass


@dataclass
class Packet:
    sender: int
    recipient: int
    transit_time: int = 0
    hops: int = 0
    kind: int = BACKGROUND
    probe_pair: Optional[tuple[int, int]] = None
    created: int = 0

    def __post_init__(self):
        if self.sender == self.recipient:
            raise ValueError("sender and recipient must differ")
        if (self.kind == PROBE) != (self.probe_pair is not None):
            raise ValueError("probe_pair is required for probes and only for probes")


@dataclass
class NodeState:
    address: int
    neighbours: tuple[int, ...]
    capacity: int
    anomalous: bool = False
    queue: deque = field(default_factory=deque)
    routing_table: dict[int, int] = field(default_factory=dict)
    dropped: int = 0

    def enqueue(self, packet: Packet) -> bool:
        if len(self.queue) >= self.capacity:
            self.dropped += 1
            return False
        self.queue.append(packet)
        return True


@dataclass(frozen=True)
class SimConfig:
    graph: Graph
    monitors: tuple[int, ...]
    anomalous_set: frozenset[int] = frozenset()
    s: float = 0.2
    h: float = 0.2
    queue_capacity: int = 100
    probe_period: int = 10
    duration: int = 100_000
    warmup: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "monitors", tuple(int(m) for m in self.monitors))
        object.__setattr__(self, "anomalous_set", frozenset(int(a) for a in self.anomalous_set))
        self.validate()

    def validate(self) -> None:
        n = self.graph.node_count
        if len(self.monitors) < 2:
            raise ConfigError("need at least 2 monitors")
        if len(set(self.monitors)) != len(self.monitors):
            raise ConfigError("monitors must be distinct")
        for m in self.monitors:
            if not 0 <= m < n:
                raise ConfigError(f"monitor {m} not in graph")
        for a in self.anomalous_set:
            if not 0 <= a < n:
                raise ConfigError(f"anomalous node {a} not in graph")
        if not 0.0 <= self.s <= 1.0:
            raise ConfigError("s must lie in [0, 1]")
        if not 0.0 <= self.h <= 1.0:
            raise ConfigError("h must lie in [0, 1]")
        if self.queue_capacity < 1:
            raise ConfigError("queue_capacity must be >= 1")
        if self.probe_period < 1:
            raise ConfigError("probe_period must be >= 1")
        if self.duration < 0:
            raise ConfigError("duration must be >= 0")
        if not 0 <= self.warmup <= self.duration:
            raise ConfigError("warmup must lie in [0, duration]")

    def with_anomalous(self, anomalous, seed: Optional[int] = None) -> "SimConfig":
        return replace(self, anomalous_set=frozenset(anomalous), seed=self.seed if seed is None else seed)

    def to_dict(self) -> dict:
        return {
            "nodes": self.graph.node_count,
            "edges": [list(e) for e in self.graph.edges],
            "monitors": list(self.monitors),
            "anomalous": sorted(self.anomalous_set),
            "s": self.s,
            "h": self.h,
            "queue_capacity": self.queue_capacity,
            "probe_period": self.probe_period,
            "duration": self.duration,
            "warmup": self.warmup,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ProbeRecord:
    probe_pair: tuple[int, int]
    delay: int
    hops: int
    arrival_timestep: int


class ProbeLog:
    """Column store of probe records; iterates as ``ProbeRecord``."""

    columns = ("pair_src", "pair_dst", "delay", "hops", "arrival")

    def __init__(self, pair_src, pair_dst, delay, hops, arrival):
        self.pair_src = np.asarray(pair_src, dtype=np.int64)
        self.pair_dst = np.asarray(pair_dst, dtype=np.int64)
        self.delay = np.asarray(delay, dtype=np.int64)
        self.hops = np.asarray(hops, dtype=np.int64)
        self.arrival = np.asarray(arrival, dtype=np.int64)

    @classmethod
    def from_records(cls, records) -> "ProbeLog":
        records = list(records)
        return cls(
            [r.probe_pair[0] for r in records],
            [r.probe_pair[1] for r in records],
            [r.delay for r in records],
            [r.hops for r in records],
            [r.arrival_timestep for r in records],
        )

    def __len__(self) -> int:
        return len(self.delay)

    def __iter__(self) -> Iterator[ProbeRecord]:
        for a, b, d, h, t in zip(self.pair_src, self.pair_dst, self.delay, self.hops, self.arrival):
            yield ProbeRecord((int(a), int(b)), int(d), int(h), int(t))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProbeLog):
            return NotImplemented
        return all(np.array_equal(getattr(self, c), getattr(other, c)) for c in self.columns)

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in zip(self.pair_src, self.pair_dst, self.delay, self.hops, self.arrival):
            lines.append(",".join(str(int(x)) for x in row))
        return "\n".join(lines) + "\n"


@dataclass
class SimSummary:
    created: int
    delivered: int
    dropped: int
    in_flight: int
    probes: ProbeLog
    sent_per_node: np.ndarray
    hold_events: int = 0
    # per-step cumulative counters, only when requested
    history: Optional[dict[str, np.ndarray]] = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, SimSummary):
            return NotImplemented
        same = (
            (self.created, self.delivered, self.dropped, self.in_flight, self.hold_events)
            == (other.created, other.delivered, other.dropped, other.in_flight, other.hold_events)
            and self.probes == other.probes
            and np.array_equal(self.sent_per_node, other.sent_per_node)
        )
        if self.history is not None and other.history is not None:
            keys = self.history.keys() & other.history.keys()
            same = same and all(np.array_equal(self.history[k], other.history[k]) for k in keys)
        return same
