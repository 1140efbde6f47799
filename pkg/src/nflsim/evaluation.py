"""Assessment of monitor placements: per-node heatmaps, the proxy suitability
score R, aggregated placement comparison and MCMC occupancy."""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import seeding
from .inference import CandidateEvaluator, SimulatorBackend, canonical, nu, pair_errors, run_mcmc
from .placement import place
from .simcore import DistributionSet, SimConfig, simulate_distributions
from .topology import Graph, generate_connected_graph

Simulate = Callable[[frozenset], DistributionSet]


class DegenerateReference(ValueError):
    pass


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def header_line(seed: int, config: dict) -> str:
    return f"# seed={seed} config_hash={config_hash(config)}"


@dataclass
class HeatmapResult:
    nodes: list[int]
    pairs: list[tuple[int, int]]
    delta: np.ndarray  # (len(nodes), len(pairs))
    average: np.ndarray  # (len(nodes),)

    def ranking(self) -> list[int]:
        """Nodes by decreasing average delta, address breaking ties."""
        return sorted(self.nodes, key=lambda v: (-self.average[self.nodes.index(v)], v))

    def to_csv(self) -> str:
        cols = ["node"] + [f"{a}->{b}" for a, b in self.pairs] + ["average"]
        lines = [",".join(cols)]
        for i, v in enumerate(self.nodes):
            vals = [repr(float(x)) for x in self.delta[i]] + [repr(float(self.average[i]))]
            lines.append(",".join([str(v)] + vals))
        return "\n".join(lines) + "\n"


def compute_heatmap(observed: DistributionSet, g: Graph, simulate: Simulate) -> HeatmapResult:
    """Per node and pair, how much making only that node anomalous moves the
    pair's histograms towards the observed ones, relative to a healthy network.
    Positive means a better match."""
    healthy = pair_errors(observed, simulate(frozenset()))
    pairs = sorted(healthy)
    nodes = list(g.nodes)
    delta = np.zeros((len(nodes), len(pairs)))
    for i, v in enumerate(nodes):
        errs = pair_errors(observed, simulate(frozenset({v})))
        delta[i] = [healthy[p] - errs[p] for p in pairs]
    average = delta.mean(axis=1) if pairs else np.zeros(len(nodes))
    return HeatmapResult(nodes, pairs, delta, average)


@dataclass
class ProxyResult:
    R: float
    ratios: list[float]
    N: int
    true_nu: float
    candidate_nus: list[float]
    form: str = "ratio"
    label: str = ""


def proxy_from_nus(true_nu: float, candidate_nus: Sequence[float], form: str = "ratio", label: str = "") -> ProxyResult:
    if not candidate_nus:
        raise ValueError("need at least one incorrect candidate")
    if form == "ratio":
        if true_nu <= 0.0:
            raise DegenerateReference("degenerate reference: nu(observed, true) is 0")
        terms = [c / true_nu for c in candidate_nus]
    elif form == "difference":
        terms = [c - true_nu for c in candidate_nus]
    else:
        raise ValueError(f"unknown proxy form {form!r}")
    return ProxyResult(sum(terms) / len(terms), terms, len(terms), true_nu, list(candidate_nus), form, label)


def proxy_suitability(
    evaluator: CandidateEvaluator,
    true_cand: Iterable[int],
    candidates: Sequence[Iterable[int]],
    form: str = "ratio",
    label: str = "",
) -> ProxyResult:
    """Mean separation of incorrect candidates from the true one, in ``nu``."""
    true_c = canonical(true_cand)
    cands = [canonical(c) for c in candidates]
    if true_c in cands:
        raise ValueError("candidate sample must exclude the true candidate")
    return proxy_from_nus(evaluator.nu(true_c), [evaluator.nu(c) for c in cands], form, label)


def all_candidates(n: int, max_size: int) -> list[frozenset[int]]:
    out = []
    for k in range(max_size + 1):
        out.extend(frozenset(c) for c in itertools.combinations(range(n), k))
    return out


def sample_candidates(n: int, true_cand: Iterable[int], count: int, rng: np.random.Generator, max_size: int = 3):
    """Uniform sample without replacement from subsets of size <= max_size,
    excluding the true set."""
    true_c = canonical(true_cand)
    pool = [c for c in all_candidates(n, max_size) if c != true_c]
    count = min(count, len(pool))
    idx = rng.choice(len(pool), size=count, replace=False)
    return [pool[i] for i in sorted(idx)]


def mcmc_performance(true_cand: Iterable[int], traces) -> float:
    """Median over traces of the fraction of steps spent at the true candidate."""
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    return float(statistics.median(t.occupancy(true_cand) for t in traces))


def normalise_to_max(values: dict) -> dict:
    top = max(values.values())
    if top <= 0:
        return {k: 0.0 for k in values}
    return {k: v / top for k, v in values.items()}


@dataclass
class ComparisonConfig:
    nodes: int = 20
    edge_prob: float = 0.2
    s: float = 0.2
    h: float = 0.2
    queue_capacity: int = 100
    probe_period: int = 10
    duration: int = 100_000
    warmup: int = 1000
    max_anomalous: int = 3
    candidate_max_size: int = 3
    root_seed: int = 0
    form: str = "ratio"
    engine: str = "compiled"


@dataclass
class NetworkScenario:
    index: int
    graph: Graph
    true_set: frozenset[int]
    candidates: list[frozenset[int]]


def make_scenario(cfg: ComparisonConfig, index: int, candidates_per_network: int) -> NetworkScenario:
    g = generate_connected_graph(cfg.nodes, cfg.edge_prob, seeding.derive_seed(cfg.root_seed, seeding.TOPOLOGY, index))
    rng = seeding.make_rng(cfg.root_seed, seeding.ANOMALY, index)
    size = int(rng.integers(1, cfg.max_anomalous + 1))
    true_set = frozenset(int(x) for x in rng.choice(cfg.nodes, size=size, replace=False))
    cands = sample_candidates(
        cfg.nodes, true_set, candidates_per_network,
        seeding.make_rng(cfg.root_seed, seeding.SAMPLING, index), cfg.candidate_max_size,
    )
    return NetworkScenario(index, g, true_set, cands)


def scenario_template(cfg: ComparisonConfig, g: Graph, monitors: Sequence[int]) -> SimConfig:
    return SimConfig(
        graph=g, monitors=tuple(sorted(monitors)), anomalous_set=frozenset(), s=cfg.s, h=cfg.h,
        queue_capacity=cfg.queue_capacity, probe_period=cfg.probe_period,
        duration=cfg.duration, warmup=cfg.warmup, seed=0,
    )


def evaluate_placement(cfg: ComparisonConfig, sc: NetworkScenario, algorithm: str, k: int) -> ProxyResult:
    """Proxy R for one (network, algorithm, k). Seeds depend on the network
    index only, so algorithms share random numbers."""
    monitors = place(algorithm, sc.graph, k, seeding.derive_seed(cfg.root_seed, seeding.PLACEMENT, sc.index, k))
    tmpl = scenario_template(cfg, sc.graph, monitors)
    obs_cfg = tmpl.with_anomalous(sc.true_set, seed=seeding.derive_seed(cfg.root_seed, seeding.OBSERVED, sc.index))
    observed = simulate_distributions(obs_cfg, cfg.engine)
    backend = SimulatorBackend(tmpl, seeding.derive_seed(cfg.root_seed, seeding.CANDIDATE, sc.index), engine=cfg.engine)
    ev = CandidateEvaluator(backend, observed)
    return proxy_suitability(ev, sc.true_set, sc.candidates, cfg.form, label=algorithm)


@dataclass
class ComparisonRow:
    algorithm: str
    k: int
    mean_R: float
    stderr_R: float
    networks: int


@dataclass
class ComparisonResult:
    rows: list[ComparisonRow]
    raw: dict[tuple[int, str, int], float] = field(default_factory=dict)

    def mean(self, algorithm: str, k: int) -> float:
        for r in self.rows:
            if r.algorithm == algorithm and r.k == k:
                return r.mean_R
        raise KeyError((algorithm, k))

    def to_csv(self) -> str:
        lines = ["algorithm,k,mean_R,stderr_R,networks"]
        for r in self.rows:
            lines.append(f"{r.algorithm},{r.k},{r.mean_R!r},{r.stderr_R!r},{r.networks}")
        return "\n".join(lines) + "\n"


def compare_placements(
    networks: int,
    k_values: Sequence[int],
    candidates_per_network: int,
    cfg: ComparisonConfig,
    algorithms: Sequence[str] = ("ma", "greedy", "random"),
    workers: int = 1,
    progress: Optional[Callable[[tuple, float], None]] = None,
) -> ComparisonResult:
    if networks < 1 or candidates_per_network < 1:
        raise ValueError("networks and candidates_per_network must be >= 1")
    scenarios = [make_scenario(cfg, i, candidates_per_network) for i in range(networks)]
    jobs = [(sc, a, k) for sc in scenarios for a in algorithms for k in k_values]

    def work(job):
        sc, a, k = job
        r = evaluate_placement(cfg, sc, a, k).R
        if progress is not None:
            progress((sc.index, a, k), r)
        return (sc.index, a, k), r

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            raw = dict(pool.map(work, jobs))
    else:
        raw = dict(map(work, jobs))
    rows = []
    for a in algorithms:
        for k in k_values:
            vals = [raw[(i, a, k)] for i in range(networks)]
            se = statistics.stdev(vals) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
            rows.append(ComparisonRow(a, k, float(np.mean(vals)), se, len(vals)))
    return ComparisonResult(rows, raw)


@dataclass
class ValidationCase:
    graph: Graph
    true_set: frozenset[int]
    k: int
    seed: int


@dataclass
class ValidationOutcome:
    proxy: dict[str, list[float]]
    occupancy: dict[str, list[float]]
    mean_proxy: dict[str, float]
    median_occupancy: dict[str, float]
    normalised_occupancy: dict[str, float]
    details: list[ProxyResult] = field(default_factory=list)

    @property
    def rankings_agree(self) -> bool:
        by_proxy = sorted(self.mean_proxy, key=self.mean_proxy.get)
        by_mcmc = sorted(self.normalised_occupancy, key=self.normalised_occupancy.get)
        return by_proxy == by_mcmc


def proxy_vs_mcmc(
    cases: Sequence[ValidationCase],
    algorithms: Sequence[str] = ("ma", "worst"),
    s: float = 0.2,
    h: float = 0.2,
    duration: int = 50_000,
    warmup: int = 1000,
    chains: int = 5,
    steps: int = 2000,
    k_max: int = 2,
    form: str = "ratio",
) -> ValidationOutcome:
    """Per case and algorithm: proxy R over every other candidate of size
    <= k_max, and MCMC occupancy of the true set; both read one shared
    candidate cache."""
    proxy: dict[str, list[float]] = {a: [] for a in algorithms}
    occ: dict[str, list[float]] = {a: [] for a in algorithms}
    details: list[ProxyResult] = []
    for case in cases:
        n = case.graph.node_count
        for a in algorithms:
            monitors = place(a, case.graph, case.k, case.seed)
            tmpl = SimConfig(case.graph, tuple(sorted(monitors)), frozenset(), s, h, duration=duration, warmup=warmup)
            observed = simulate_distributions(
                tmpl.with_anomalous(case.true_set, seed=seeding.derive_seed(case.seed, seeding.OBSERVED))
            )
            ev = CandidateEvaluator(SimulatorBackend(tmpl, seeding.derive_seed(case.seed, seeding.CANDIDATE)), observed)
            cands = [c for c in all_candidates(n, k_max) if c != case.true_set]
            result = proxy_suitability(ev, case.true_set, cands, form, label=a)
            details.append(result)
            proxy[a].append(result.R)
            traces = [
                run_mcmc(ev, n, (), steps, seeding.make_rng(case.seed, seeding.MCMC, j), k_max)
                for j in range(chains)
            ]
            occ[a].extend(t.occupancy(case.true_set) for t in traces)
    mean_proxy = {a: float(np.mean(v)) for a, v in proxy.items()}
    med = {a: float(statistics.median(v)) for a, v in occ.items()}
    return ValidationOutcome(proxy, occ, mean_proxy, med, normalise_to_max(med), details)


def comparison_config_dict(cfg: ComparisonConfig) -> dict:
    return asdict(cfg)
