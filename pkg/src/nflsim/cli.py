"""Command-line entry point.

Every subcommand takes its options as flags, from a JSON file given with
``--config``, or both (flags win). Every output file ``X`` gets a sibling
``X.config.json`` holding the resolved options, and evaluation CSVs start
with a ``# seed=... config_hash=...`` line. Nothing time- or machine-dependent
is written, so equal options give byte-identical files.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional

from . import seeding
from .evaluation import (
    ComparisonConfig,
    DegenerateReference,
    compare_placements,
    compute_heatmap,
    header_line,
    proxy_suitability,
    sample_candidates,
)
from .inference import CandidateEvaluator, SimulatorBackend, encode_candidate, run_mcmc
from .placement import ALGORITHMS, PlacementError, place
from .simcore import ConfigError, DistributionSet, SimConfig, build_distribution_set, run_simulation
from .topology import TopologyError, export_graph, generate_connected_graph, read_graph

log = logging.getLogger("nflsim")


class UsageError(Exception):
    """Bad options; maps to exit code 2."""


def int_list(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# name -> (type, default, help); a default of None means required
SIM_OPTIONS = {
    "net": (str, None, "edge-list file"),
    "s": (float, 0.2, "per-node send probability per step"),
    "h": (float, 0.2, "hold probability of an anomalous node"),
    "steps": (int, 100_000, "simulated timesteps"),
    "warmup": (int, 1000, "steps before probes are recorded"),
    "queue_capacity": (int, 100, "queue length per node"),
    "probe_period": (int, 10, "steps between probe rounds"),
    "engine": (str, "compiled", "compiled or reference"),
    "seed": (int, 0, "root seed"),
}

COMMANDS: dict[str, dict] = {
    "topology": {
        "nodes": (int, None, "number of nodes"),
        "edge_prob": (float, None, "edge probability"),
        "seed": (int, 0, "seed"),
        "out": (str, None, "output edge-list file"),
    },
    "simulate": {
        **SIM_OPTIONS,
        "monitors": (int_list, None, "comma-separated monitor addresses"),
        "anomalous": (int_list, [], "comma-separated anomalous addresses"),
        "out_dir": (str, ".", "directory for records.csv and distributions.json"),
    },
    "place": {
        "net": (str, None, "edge-list file"),
        "algo": (str, None, "one of " + ", ".join(sorted(ALGORITHMS))),
        "k": (int, None, "number of monitors"),
        "seed": (int, 0, "seed (random placement only)"),
        "out": (str, "", "output JSON file; stdout when empty"),
    },
    "infer": {
        **SIM_OPTIONS,
        "monitors": (int_list, None, "comma-separated monitor addresses"),
        "observed": (str, None, "distributions.json from a simulate run"),
        "mcmc_steps": (int, 2000, "MCMC steps per chain"),
        "chains": (int, 1, "independent chains"),
        "k_max": (int, 3, "largest candidate size"),
        "initial": (int_list, [], "starting candidate"),
        "out_dir": (str, ".", "directory for trace_<chain>.csv"),
    },
    "heatmap": {
        **SIM_OPTIONS,
        "monitors": (int_list, None, "comma-separated monitor addresses"),
        "observed": (str, None, "distributions.json from a simulate run"),
        "workers": (int, 1, "parallel simulations"),
        "out": (str, "heatmap.csv", "output CSV"),
    },
    "proxy": {
        **SIM_OPTIONS,
        "monitors": (int_list, None, "comma-separated monitor addresses"),
        "observed": (str, None, "distributions.json from a simulate run"),
        "true": (int_list, None, "true anomalous set"),
        "candidates": (int, 100, "incorrect candidates sampled"),
        "max_size": (int, 3, "largest sampled candidate"),
        "form": (str, "ratio", "ratio or difference"),
        "workers": (int, 1, "parallel simulations"),
        "out": (str, "proxy.csv", "output CSV"),
    },
    "compare": {
        "networks": (int, 8, "random networks"),
        "k_values": (int_list, [4, 6, 8], "monitor counts"),
        "candidates": (int, 100, "incorrect candidates per network"),
        "algorithms": (str, "ma,greedy,random", "comma-separated placement algorithms"),
        "nodes": (int, 20, "nodes per network"),
        "edge_prob": (float, 0.2, "edge probability"),
        "s": (float, 0.2, "send probability"),
        "h": (float, 0.2, "hold probability"),
        "steps": (int, 100_000, "simulated timesteps"),
        "warmup": (int, 1000, "steps before probes are recorded"),
        "queue_capacity": (int, 100, "queue length per node"),
        "probe_period": (int, 10, "steps between probe rounds"),
        "max_anomalous": (int, 3, "largest true anomalous set"),
        "max_size": (int, 3, "largest sampled candidate"),
        "form": (str, "ratio", "ratio or difference"),
        "engine": (str, "compiled", "compiled or reference"),
        "seed": (int, 0, "root seed"),
        "workers": (int, 1, "parallel simulations"),
        "out": (str, "compare.csv", "output CSV"),
    },
}


def add_options(p: argparse.ArgumentParser, schema: dict) -> None:
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of options; flags override it")
    for name, (typ, default, text) in schema.items():
        shown = "required" if default is None else f"default {default!r}"
        p.add_argument(
            "--" + name.replace("_", "-"), dest=name, type=typ,
            default=argparse.SUPPRESS, help=f"{text} ({shown})",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nflsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("topology", "simulate", "place", "infer"):
        add_options(sub.add_parser(name), COMMANDS[name])
    ev = sub.add_parser("evaluate").add_subparsers(dest="mode", required=True)
    for name in ("heatmap", "proxy", "compare"):
        add_options(ev.add_parser(name), COMMANDS[name])
    return parser


def resolve(schema: dict, given: dict) -> dict:
    """Defaults, then the config file, then flags."""
    opts = {k: v[1] for k, v in schema.items()}
    path = given.pop("config", None)
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}")
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(schema))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        for k, v in loaded.items():
            typ = schema[k][0]
            if typ is int_list:
                opts[k] = int_list(v) if isinstance(v, str) else [int(x) for x in v]
            else:
                opts[k] = typ(v)
    opts.update(given)
    missing = [k for k, v in opts.items() if v is None]
    if missing:
        raise UsageError("missing required options: " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return opts


def write_output(path: Path, text: str, opts: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    config = path.with_name(path.name + ".config.json")
    config.write_text(json.dumps(opts, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s", path)


def load_graph(path: str):
    try:
        return read_graph(path)
    except (OSError, TopologyError) as exc:
        raise UsageError(f"cannot read {path}: {exc}")


def sim_config(opts: dict, anomalous=()) -> SimConfig:
    cfg = SimConfig(
        graph=load_graph(opts["net"]),
        monitors=tuple(opts["monitors"]),
        anomalous_set=frozenset(anomalous),
        s=opts["s"], h=opts["h"],
        queue_capacity=opts["queue_capacity"],
        probe_period=opts["probe_period"],
        duration=opts["steps"],
        warmup=opts["warmup"],
        seed=opts["seed"],
    )
    cfg.validate()
    if opts["engine"] not in ("compiled", "reference"):
        raise UsageError(f"unknown engine {opts['engine']!r}")
    return cfg


def load_observed(path: str, monitors) -> DistributionSet:
    try:
        obs = DistributionSet.from_json_obj(json.loads(Path(path).read_text()))
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read observed distributions {path}: {exc}")
    expected = {(a, b) for a in monitors for b in monitors if a != b}
    if set(obs.keys()) != expected:
        raise UsageError("observed distributions do not match the monitor list")
    return obs


def candidate_backend(tmpl: SimConfig, opts: dict) -> SimulatorBackend:
    return SimulatorBackend(tmpl, seeding.derive_seed(opts["seed"], seeding.CANDIDATE), engine=opts["engine"])


def prefetch(ev: CandidateEvaluator, cands, workers: int) -> None:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(ev.distributions, cands))


def cmd_topology(opts: dict) -> None:
    if opts["nodes"] < 2:
        raise UsageError("--nodes must be at least 2")
    if not 0.0 < opts["edge_prob"] <= 1.0:
        raise UsageError("--edge-prob must lie in (0, 1]")
    g = generate_connected_graph(opts["nodes"], opts["edge_prob"], opts["seed"])
    write_output(Path(opts["out"]), export_graph(g), opts)


def cmd_simulate(opts: dict) -> None:
    cfg = sim_config(opts, opts["anomalous"])
    summary = run_simulation(cfg, opts["engine"])
    out = Path(opts["out_dir"])
    write_output(out / "records.csv", summary.probes.to_csv(), opts)
    dists = build_distribution_set(summary.probes, cfg.monitors)
    write_output(out / "distributions.json", dists.to_json() + "\n", opts)
    log.info("created %d delivered %d dropped %d", summary.created, summary.delivered, summary.dropped)


def cmd_place(opts: dict) -> None:
    g = load_graph(opts["net"])
    monitors = place(opts["algo"], g, opts["k"], opts["seed"])
    text = json.dumps(monitors) + "\n"
    if opts["out"]:
        write_output(Path(opts["out"]), text, opts)
    else:
        sys.stdout.write(text)


def cmd_infer(opts: dict) -> None:
    tmpl = sim_config(opts)
    if opts["k_max"] < 1 or opts["chains"] < 1 or opts["mcmc_steps"] < 0:
        raise UsageError("--k-max and --chains must be >= 1, --mcmc-steps >= 0")
    observed = load_observed(opts["observed"], tmpl.monitors)
    ev = CandidateEvaluator(candidate_backend(tmpl, opts), observed)
    out = Path(opts["out_dir"])
    n = tmpl.graph.node_count
    for j in range(opts["chains"]):
        tr = run_mcmc(
            ev, n, opts["initial"], opts["mcmc_steps"],
            seeding.make_rng(opts["seed"], seeding.MCMC, j), opts["k_max"],
        )
        write_output(out / f"trace_{j}.csv", tr.to_csv(), opts)
        log.info("chain %d acceptance %.3f", j, tr.acceptance_rate)


def cmd_heatmap(opts: dict) -> None:
    tmpl = sim_config(opts)
    observed = load_observed(opts["observed"], tmpl.monitors)
    ev = CandidateEvaluator(candidate_backend(tmpl, opts), observed)
    g = tmpl.graph
    prefetch(ev, [frozenset()] + [frozenset({v}) for v in g.nodes], opts["workers"])
    hm = compute_heatmap(observed, g, ev.distributions)
    write_output(Path(opts["out"]), header_line(opts["seed"], opts) + "\n" + hm.to_csv(), opts)


def cmd_proxy(opts: dict) -> None:
    tmpl = sim_config(opts)
    if opts["form"] not in ("ratio", "difference"):
        raise UsageError("--form must be ratio or difference")
    observed = load_observed(opts["observed"], tmpl.monitors)
    ev = CandidateEvaluator(candidate_backend(tmpl, opts), observed)
    true_c = frozenset(opts["true"])
    cands = sample_candidates(
        tmpl.graph.node_count, true_c, opts["candidates"],
        seeding.make_rng(opts["seed"], seeding.SAMPLING), opts["max_size"],
    )
    prefetch(ev, [true_c] + cands, opts["workers"])
    r = proxy_suitability(ev, true_c, cands, opts["form"])
    lines = [header_line(opts["seed"], opts), "candidate,nu,term"]
    lines.append(f"{encode_candidate(true_c)},{r.true_nu!r},")
    lines += [f"{encode_candidate(c)},{v!r},{t!r}" for c, v, t in zip(cands, r.candidate_nus, r.ratios)]
    lines.append(f"R,{r.R!r},{r.N}")
    write_output(Path(opts["out"]), "\n".join(lines) + "\n", opts)


def cmd_compare(opts: dict) -> None:
    algorithms = tuple(a for a in opts["algorithms"].split(",") if a)
    for a in algorithms:
        if a not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {a!r}")
    if opts["form"] not in ("ratio", "difference"):
        raise UsageError("--form must be ratio or difference")
    if not opts["k_values"] or any(not 2 <= k <= opts["nodes"] for k in opts["k_values"]):
        raise UsageError("--k-values must lie in [2, nodes]")
    cfg = ComparisonConfig(
        nodes=opts["nodes"], edge_prob=opts["edge_prob"], s=opts["s"], h=opts["h"],
        queue_capacity=opts["queue_capacity"], probe_period=opts["probe_period"],
        duration=opts["steps"], warmup=opts["warmup"], max_anomalous=opts["max_anomalous"],
        candidate_max_size=opts["max_size"], root_seed=opts["seed"], form=opts["form"],
        engine=opts["engine"],
    )
    scenario_template_check(cfg)

    def progress(key, r):
        log.info("network %d %s k=%d R=%.4f", *key, r)

    res = compare_placements(
        opts["networks"], opts["k_values"], opts["candidates"], cfg,
        algorithms, opts["workers"], progress,
    )
    write_output(Path(opts["out"]), header_line(opts["seed"], opts) + "\n" + res.to_csv(), opts)


def scenario_template_check(cfg: ComparisonConfig) -> None:
    # validate the simulation settings once, before hours of work
    SimConfig(
        generate_connected_graph(2, 1.0, 0), (0, 1), frozenset(), cfg.s, cfg.h,
        cfg.queue_capacity, cfg.probe_period, cfg.duration, cfg.warmup,
    ).validate()
    if cfg.engine not in ("compiled", "reference"):
        raise UsageError(f"unknown engine {cfg.engine!r}")


HANDLERS: dict[str, Callable[[dict], None]] = {
    "topology": cmd_topology,
    "simulate": cmd_simulate,
    "place": cmd_place,
    "infer": cmd_infer,
    "heatmap": cmd_heatmap,
    "proxy": cmd_proxy,
    "compare": cmd_compare,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    logging.basicConfig(level=logging.INFO if ns.pop("verbose") else logging.WARNING, format="%(message)s")
    name = ns.pop("mode", None) or ns["command"]
    ns.pop("command")
    try:
        opts = resolve(COMMANDS[name], ns)
        HANDLERS[name](opts)
    except (UsageError, ConfigError, PlacementError, DegenerateReference) as exc:
        print(f"nflsim {name}: error: {exc}", file=sys.stderr)
        return 1 if isinstance(exc, DegenerateReference) else 2
    except TopologyError as exc:
        # loading errors are usage errors already; what remains is failed generation
        print(f"nflsim {name}: error: {exc}", file=sys.stderr)
        return 1
    except (argparse.ArgumentTypeError, TypeError, ValueError) as exc:
        print(f"nflsim {name}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"nflsim {name}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
