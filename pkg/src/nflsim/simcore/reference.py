"""Object-level simulator: one ``NodeState`` per node, stepped per timestep.

Slow but transparent. The compiled engine in :mod:`.engine` must agree with
it bit for bit on identical configurations.
"""

from __future__ import annotations

from typing import Mapping, Sequence, Union

import numpy as np

from ..topology import Graph, distances_to, next_hop
from .draws import DrawStream
from .types import PROBE, NodeState, Packet, ProbeLog, ProbeRecord, SimConfig, SimSummary


def compute_edge_weights(g: Graph, queue_lengths: Sequence[int]) -> dict[tuple[int, int], float]:
    """Load-balancing weight ``1 + (|Q_a| + |Q_b|) / 2`` for every edge."""
    return {(a, b): 1.0 + (queue_lengths[a] + queue_lengths[b]) / 2.0 for a, b in g.edges}


def recompute_routing_tables(g: Graph, w: Mapping[tuple[int, int], float]) -> list[dict[int, int]]:
    """``tables[src][dst]`` is the next hop on the deterministic shortest path."""
    tables: list[dict[int, int]] = [{} for _ in g.nodes]
    for dst in g.nodes:
        dist = distances_to(g, w, dst)
        for src in g.nodes:
            if src != dst:
                tables[src][dst] = next_hop(g, w, dist, src)
    return tables


Incoming = Union[Mapping[int, Packet], Sequence[Packet]]


def receive(node: NodeState, incoming: Incoming) -> int:
    """Append arrivals, ordered by forwarding neighbour when given as a mapping.

    Returns the number dropped for lack of queue space.
    """
    if isinstance(incoming, Mapping):
        packets = [incoming[k] for k in sorted(incoming)]
    else:
        packets = list(incoming)
    before = node.dropped
    for p in packets:
        node.enqueue(p)
    return node.dropped - before


def step_node(node: NodeState, incoming: Incoming = (), hold_draw: int = 0):
    """Advance one node by one timestep.

    Every queued packet ages by one step. Unless holding, the head packet is
    delivered here or forwarded along the routing table with one more hop.
    Incoming packets are appended afterwards.

    Returns ``(delivered, outgoing, node)`` where ``outgoing`` maps the chosen
    neighbour to the forwarded packet.
    """
    if hold_draw and not node.anomalous:
        raise ValueError(f"node {node.address} is not anomalous and cannot hold")
    delivered: list[Packet] = []
    outgoing: dict[int, Packet] = {}
    if node.queue:
        for p in node.queue:
            p.transit_time += 1
        if not hold_draw:
            p = node.queue.popleft()
            if p.recipient == node.address:
                delivered.append(p)
            else:
                nxt = node.routing_table[p.recipient]
                p.hops += 1
                outgoing[nxt] = p
    receive(node, incoming)
    return delivered, outgoing, node


class World:
    """Full simulator state for the reference engine."""

    def __init__(self, cfg: SimConfig, record_history: bool = False):
        self.cfg = cfg
        g = cfg.graph
        self.nodes = [
            NodeState(a, g.neighbours(a), cfg.queue_capacity, anomalous=a in cfg.anomalous_set)
            for a in g.nodes
        ]
        self.t = 0
        self.created = 0
        self.delivered = 0
        self.hold_events = 0
        self.sent = np.zeros(g.node_count, dtype=np.int64)
        self.records: list[ProbeRecord] = []
        self.last_delivered: list[Packet] = []
        self.anomalous = sorted(cfg.anomalous_set)
        self.history = (
            {k: [] for k in ("created", "delivered", "dropped", "in_flight", "sent")} if record_history else None
        )

    @property
    def dropped(self) -> int:
        return sum(nd.dropped for nd in self.nodes)

    @property
    def in_flight(self) -> int:
        return sum(len(nd.queue) for nd in self.nodes)

    def advance_timestep(self, sends, targets, holds) -> None:
        """One synchronous step; ``sends``/``targets``/``holds`` are this step's draws."""
        cfg, g, t = self.cfg, self.cfg.graph, self.t
        # 1. routing from the start-of-step queue snapshot
        w = compute_edge_weights(g, [len(nd.queue) for nd in self.nodes])
        tables = recompute_routing_tables(g, w)
        for nd, tab in zip(self.nodes, tables):
            nd.routing_table = tab
        # 2. hold draws
        hold = {a: int(holds[j]) for j, a in enumerate(self.anomalous)}
        self.hold_events += sum(hold.values())
        # 3. node steps, arrivals land at the end of the step
        inbox: list[dict[int, Packet]] = [{} for _ in g.nodes]
        arrived: list[Packet] = []
        for nd in self.nodes:
            dl, out, _ = step_node(nd, (), hold.get(nd.address, 0))
            arrived.extend(dl)
            for nb, p in out.items():
                inbox[nb][nd.address] = p
        for nd in self.nodes:
            receive(nd, inbox[nd.address])
        self.delivered += len(arrived)
        self.last_delivered = arrived
        # 4. background traffic
        for nd in self.nodes:
            a = nd.address
            if sends[a]:
                self.created += 1
                self.sent[a] += 1
                nd.enqueue(Packet(a, int(targets[a]), created=t))
        # 5. probes
        if t >= cfg.warmup and t % cfg.probe_period == 0:
            for a in cfg.monitors:
                for b in cfg.monitors:
                    if a != b:
                        self.created += 1
                        self.nodes[a].enqueue(Packet(a, b, kind=PROBE, probe_pair=(a, b), created=t))
        # 6. probe records
        if t >= cfg.warmup:
            for p in arrived:
                if p.kind == PROBE:
                    self.records.append(ProbeRecord(p.probe_pair, p.transit_time, p.hops, t))
        if self.history is not None:
            self.history["created"].append(self.created)
            self.history["delivered"].append(self.delivered)
            self.history["dropped"].append(self.dropped)
            self.history["in_flight"].append(self.in_flight)
            self.history["sent"].append(np.asarray(sends, dtype=np.uint8))
        self.t += 1

    def summary(self) -> SimSummary:
        hist = None
        if self.history is not None:
            hist = {k: np.asarray(v, dtype=np.int64) for k, v in self.history.items() if k != "sent"}
            hist["sent"] = np.asarray(self.history["sent"], dtype=np.uint8).reshape(-1, self.cfg.graph.node_count)
        return SimSummary(
            created=self.created,
            delivered=self.delivered,
            dropped=self.dropped,
            in_flight=self.in_flight,
            probes=ProbeLog.from_records(self.records),
            sent_per_node=self.sent.copy(),
            hold_events=self.hold_events,
            history=hist,
        )


def run_reference(cfg: SimConfig, record_history: bool = False, block: int = 4096) -> SimSummary:
    world = World(cfg, record_history=record_history)
    stream = DrawStream(cfg)
    remaining = cfg.duration
    while remaining > 0:
        c = min(block, remaining)
        blk = stream.block(c)
        for i in range(c):
            world.advance_timestep(blk.sends[i], blk.targets[i], blk.holds[i])
        remaining -= c
    return world.summary()
