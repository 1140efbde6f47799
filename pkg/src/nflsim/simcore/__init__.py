"""Discrete-time agent-based network simulator with load-balanced routing and
anomalous (holding) nodes."""

from __future__ import annotations

from .distributions import DistributionSet, PairHistograms, build_distribution_set
from .draws import DrawStream
from .engine import run_compiled
from .reference import (
    World,
    compute_edge_weights,
    receive,
    recompute_routing_tables,
    run_reference,
    step_node,
)
from .types import (
    BACKGROUND,
    PROBE,
    ConfigError,
    NodeState,
    Packet,
    ProbeLog,
    ProbeRecord,
    SimConfig,
    SimSummary,
)


def run_simulation(cfg: SimConfig, engine: str = "compiled", record_history: bool = False) -> SimSummary:
    """Run ``cfg.duration`` timesteps and return the counters and probe log."""
    cfg.validate()
    if engine == "compiled":
        return run_compiled(cfg, record_history=record_history)
    if engine == "reference":
        return run_reference(cfg, record_history=record_history)
    raise ConfigError(f"unknown engine {engine!r}")


def simulate_distributions(cfg: SimConfig, engine: str = "compiled") -> DistributionSet:
    return build_distribution_set(run_simulation(cfg, engine).probes, cfg.monitors)


__all__ = [
    "BACKGROUND",
    "PROBE",
    "ConfigError",
    "DistributionSet",
    "DrawStream",
    "NodeState",
    "Packet",
    "PairHistograms",
    "ProbeLog",
    "ProbeRecord",
    "SimConfig",
    "SimSummary",
    "World",
    "build_distribution_set",
    "compute_edge_weights",
    "receive",
    "recompute_routing_tables",
    "run_compiled",
    "run_reference",
    "run_simulation",
    "simulate_distributions",
    "step_node",
]
