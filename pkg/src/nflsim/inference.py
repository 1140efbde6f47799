"""Distribution distances and Metropolis-Hastings search over anomalous-node
candidate sets."""

from __future__ import annotations

import logging
import math
import threading
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Optional

import numpy as np

from . import seeding
from .simcore import ConfigError, DistributionSet, SimConfig, simulate_distributions

log = logging.getLogger(__name__)

Candidate = frozenset


class MetricStats:
    """Counts comparisons that had no evidence on either side."""

    def __init__(self):
        self.empty_comparisons = 0


metric_stats = MetricStats()


def canonical(candidate: Iterable[int]) -> frozenset[int]:
    return frozenset(int(x) for x in candidate)


def encode_candidate(candidate: Iterable[int]) -> str:
    members = sorted(candidate)
    return "+".join(str(x) for x in members) if members else "-"


def decode_candidate(text: str) -> frozenset[int]:
    text = text.strip()
    if text in ("-", ""):
        return frozenset()
    return frozenset(int(x) for x in text.split("+"))


def mse(a: Mapping[int, float], b: Mapping[int, float]) -> float:
    """Mean squared difference over the union of both supports."""
    bins = a.keys() | b.keys()
    if not bins:
        metric_stats.empty_comparisons += 1
        log.debug("mse of two empty histograms taken as 0")
        return 0.0
    total = 0.0
    for k in sorted(bins):
        d = a.get(k, 0.0) - b.get(k, 0.0)
        total += d * d
    return total / len(bins)


def pair_errors(d1: DistributionSet, d2: DistributionSet) -> dict[tuple[int, int], float]:
    """Per ordered pair, the larger of the delay and hop-count errors."""
    if set(d1.keys()) != set(d2.keys()):
        raise ConfigError("distribution sets cover different monitor pairs")
    return {
        pair: max(mse(d1[pair].delay, d2[pair].delay), mse(d1[pair].hops, d2[pair].hops))
        for pair in sorted(d1.keys())
    }


def nu(d1: DistributionSet, d2: DistributionSet) -> float:
    """Worst per-pair histogram error between two distribution sets."""
    errs = pair_errors(d1, d2)
    return max(errs.values()) if errs else 0.0


def propose_adjacent(
    candidate: Iterable[int], n: int, rng: np.random.Generator, k_max: Optional[int] = None
) -> frozenset[int]:
    """Toggle one uniformly chosen node; redraw while the result exceeds ``k_max``."""
    c = canonical(candidate)
    if k_max is not None and k_max < 1:
        raise ValueError("k_max must be >= 1")
    while True:
        node = int(rng.integers(n))
        prop = c - {node} if node in c else c | {node}
        if k_max is None or len(prop) <= k_max:
            return prop


def acceptance_probability(nu_current: float, nu_proposal: float) -> float:
    if nu_proposal <= 0.0:
        return 1.0
    return min(1.0, nu_current / nu_proposal)


def metropolis_accept(nu_current: float, nu_proposal: float, rng: np.random.Generator) -> bool:
    # one uniform per step regardless of outcome keeps chains aligned
    chi = rng.random()
    return chi < acceptance_probability(nu_current, nu_proposal)


class SimulatorBackend:
    """Maps a candidate to its simulated distribution set.

    Each candidate runs with a sub-seed derived from ``(root_seed, candidate)``
    so revisits and independent chains see identical distributions. With
    ``common_seed`` every candidate shares one seed (common random numbers),
    which suits paired comparisons against a baseline.
    """

    def __init__(
        self,
        template: SimConfig,
        root_seed: int,
        duration: Optional[int] = None,
        engine: str = "compiled",
        common_seed: bool = False,
    ):
        self.template = template
        self.root_seed = root_seed
        self.duration = duration
        self.engine = engine
        self.common_seed = common_seed
        self.runs = 0

    def seed_for(self, candidate: frozenset[int]) -> int:
        if self.common_seed:
            return seeding.derive_seed(self.root_seed, seeding.CANDIDATE)
        return seeding.derive_seed(self.root_seed, seeding.CANDIDATE, *seeding.candidate_key(candidate))

    def config_for(self, candidate: frozenset[int]) -> SimConfig:
        cfg = self.template.with_anomalous(candidate, seed=self.seed_for(candidate))
        if self.duration is not None and self.duration != cfg.duration:
            cfg = replace(cfg, duration=self.duration, warmup=min(cfg.warmup, self.duration))
        return cfg

    def __call__(self, candidate: frozenset[int]) -> DistributionSet:
        self.runs += 1
        return simulate_distributions(self.config_for(candidate), self.engine)


class CandidateEvaluator:
    """Get-or-compute cache of candidate distributions and their distance to
    the observed set."""

    def __init__(
        self,
        simulate: Callable[[frozenset[int]], DistributionSet],
        observed: DistributionSet,
        cache: bool = True,
    ):
        self.simulate = simulate
        self.observed = observed
        self.cache = cache
        self._dists: dict[frozenset[int], DistributionSet] = {}
        self._locks: dict[frozenset[int], threading.Lock] = {}
        self._guard = threading.Lock()

    def distributions(self, candidate: Iterable[int]) -> DistributionSet:
        c = canonical(candidate)
        if not self.cache:
            return self.simulate(c)
        with self._guard:
            if c in self._dists:
                return self._dists[c]
            lock = self._locks.setdefault(c, threading.Lock())
        with lock:
            if c not in self._dists:
                self._dists[c] = self.simulate(c)
        return self._dists[c]

    def nu(self, candidate: Iterable[int]) -> float:
        return nu(self.observed, self.distributions(candidate))

    def __len__(self) -> int:
        return len(self._dists)


@dataclass
class TraceStep:
    step: int
    candidate: frozenset[int]
    nu: float
    accepted: bool


@dataclass
class MCMCTrace:
    """Row 0 is the initial state; rows ``1..steps`` are proposals."""

    steps: list[TraceStep] = field(default_factory=list)
    chain: list[frozenset[int]] = field(default_factory=list)
    accepted: int = 0

    @property
    def visits(self) -> Counter:
        return Counter(self.chain)

    def occupancy(self, candidate: Iterable[int]) -> float:
        """Fraction of steps whose post-step state is ``candidate``."""
        if not self.chain:
            return 0.0
        c = canonical(candidate)
        return sum(1 for x in self.chain if x == c) / len(self.chain)

    def proposal_occupancy(self, candidate: Iterable[int]) -> float:
        props = self.steps[1:]
        if not props:
            return 0.0
        c = canonical(candidate)
        return sum(1 for s in props if s.candidate == c) / len(props)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / max(1, len(self.chain))

    def to_csv(self) -> str:
        lines = ["step,candidate,nu,accepted"]
        for s in self.steps:
            lines.append(f"{s.step},{encode_candidate(s.candidate)},{s.nu!r},{int(s.accepted)}")
        return "\n".join(lines) + "\n"


def run_mcmc(
    evaluator: CandidateEvaluator,
    n: int,
    initial: Iterable[int] = (),
    steps: int = 1000,
    rng: Optional[np.random.Generator] = None,
    k_max: Optional[int] = None,
) -> MCMCTrace:
    """Random walk over candidates, accepting with ``min(1, nu_old / nu_new)``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    current = canonical(initial)
    nu_cur = evaluator.nu(current)
    trace = MCMCTrace()
    trace.steps.append(TraceStep(0, current, nu_cur, True))
    for i in range(1, steps + 1):
        prop = propose_adjacent(current, n, rng, k_max)
        nu_new = evaluator.nu(prop)
        ok = metropolis_accept(nu_cur, nu_new, rng)
        trace.steps.append(TraceStep(i, prop, nu_new, ok))
        if ok:
            current, nu_cur = prop, nu_new
            trace.accepted += 1
        trace.chain.append(current)
    return trace


def read_trace_csv(text: str) -> MCMCTrace:
    trace = MCMCTrace()
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if rows[0] != "step,candidate,nu,accepted":
        raise ValueError("not a trace file")
    current = None
    for ln in rows[1:]:
        step, cand, nu_s, acc = ln.split(",")
        ts = TraceStep(int(step), decode_candidate(cand), float(nu_s), acc == "1")
        trace.steps.append(ts)
        if ts.step == 0:
            current = ts.candidate
            continue
        if ts.accepted:
            current = ts.candidate
            trace.accepted += 1
        trace.chain.append(current)
    return trace


def uniform_baseline(n: int, k_max: int) -> float:
    return 1.0 / sum(math.comb(n, k) for k in range(k_max + 1))
