"""Command-line front end for graph generation, scoring, and experiments.

Every command writes its primary output plus a JSON sidecar (the output
path with ``.json`` appended, except ``calibrate`` whose output already
is JSON) echoing the full configuration, so any result can be reproduced
from the sidecar alone.  CSV files carry a header row, UTF-8 text, ``.``
as the decimal separator, and floats with 12 significant digits.

Exit codes: 0 on success, 1 for usage errors, 2 for runtime failures.
The ``intervene`` command flushes partial results and a failure manifest
before reporting a nonzero exit when any cell fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .analysis import ncp_approx, ncp_bucket
from .centrality import (
    cf_betweenness,
    eg_edge_scores,
    hd_edge_scores,
    l2_flow_betweenness,
    lf_betweenness,
    sp_betweenness,
)
from .epidemic import (
    AgentSeirParams,
    InitialCondition,
    OdeSeirParams,
    calibrate_beta_final_size,
    curve_metrics,
    ensemble_agent_seir,
    simulate_agent_seir,
    simulate_ode_seir,
)
from .graphs import load_edge_list, save_edge_list
from .generators import gen_bridged_clusters, gen_planted_partition
from .intervention import run_intervention_experiment


class UsageError(Exception):
    """Bad command-line input detected after argparse."""


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage failures exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(x) for x in row])


def _jsonify(value):
    if isinstance(value, dict):
        return {str(k): _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonify(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sidecar(out: str, payload) -> None:
    write_json(out + ".json", payload)


def _load_graph(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return load_edge_list(fh)


def _float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"{flag} expects comma-separated numbers: {exc}") from None
    if not values:
        raise UsageError(f"{flag} is empty")
    return values


def _parse_init(spec: str, seed: int) -> InitialCondition:
    kind, sep, arg = spec.partition(":")
    if not sep:
        raise UsageError("--init must look like cluster:FILE or random:FRACTION")
    if kind == "random":
        try:
            fraction = float(arg)
        except ValueError:
            raise UsageError(f"bad --init fraction {arg!r}") from None
        return InitialCondition(mode="random-fraction", fraction=fraction, seed=seed)
    if kind == "cluster":
        nodes = []
        try:
            with open(arg, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.split("#", 1)[0].strip()
                    if line:
                        nodes.append(int(line))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read seed nodes from {arg!r}: {exc}") from None
        if not nodes:
            raise UsageError(f"seed node file {arg!r} lists no nodes")
        return InitialCondition(mode="cluster-seed", nodes=tuple(nodes))
    raise UsageError(f"unknown --init kind {kind!r}")


def cmd_gen(args) -> int:
    config = {"command": "gen", "kind": args.kind, "out": args.out, "seed": args.seed}
    if args.kind == "planted-partition":
        for flag in ("n", "k"):
            if getattr(args, flag) is None:
                raise UsageError(f"gen planted-partition requires --{flag}")
        graph, labels = gen_planted_partition(
            args.n, args.k, args.p_in, args.p_out, seed=args.seed
        )
        save_edge_list(graph, args.out)
        labels_path = args.out + ".labels"
        write_csv(labels_path, ["node", "community"], enumerate(labels.tolist()))
        config.update(
            n=args.n, k=args.k, p_in=args.p_in, p_out=args.p_out,
            labels=labels_path, nodes=graph.node_count, edges=graph.edge_count,
        )
    else:
        if args.clusters is None or args.bridges is None:
            raise UsageError("gen bridged-clusters requires --clusters and --bridges")
        try:
            clusters = [int(tok) for tok in args.clusters.split(",") if tok.strip()]
            bridges = [
                tuple(int(p) for p in group.split(":"))
                for group in args.bridges.split(",")
                if group.strip()
            ]
        except ValueError as exc:
            raise UsageError(f"bad cluster or bridge spec: {exc}") from None
        if any(len(b) != 5 for b in bridges):
            raise UsageError("each bridge is cluster:member:cluster:member:length")
        graph = gen_bridged_clusters(clusters, bridges)
        save_edge_list(graph, args.out)
        config.update(
            clusters=clusters, bridges=[list(b) for b in bridges],
            nodes=graph.node_count, edges=graph.edge_count,
        )
    _sidecar(args.out, config)
    return 0


def _score_edges(args, graph, method: str):
    if method == "lf":
        if args.lam is None:
            raise UsageError("method lf requires --lambda")
        sources = None
        if args.samples is not None:
            rng = np.random.default_rng(args.seed)
            count = min(args.samples, graph.node_count)
            sources = np.sort(rng.choice(graph.node_count, size=count, replace=False))
        return lf_betweenness(
            graph, args.lam, epsilon=args.epsilon, threads=args.threads, sources=sources
        )
    if method == "l2":
        return l2_flow_betweenness(graph)
    if method == "sp":
        return sp_betweenness(graph, threads=args.threads)
    if method == "cf":
        return cf_betweenness(graph)
    if method == "hd":
        return hd_edge_scores(graph)
    if method == "eg":
        return eg_edge_scores(graph)
    raise UsageError(f"unknown method {method!r}")


def cmd_betweenness(args) -> int:
    graph = _load_graph(args.graph)
    start = time.perf_counter()
    scores = _score_edges(args, graph, args.method)
    wall = time.perf_counter() - start
    name = graph.labels.__getitem__ if graph.labels is not None else str
    rows = (
        (e, name(int(u)), name(int(v)), s)
        for e, (u, v, s) in enumerate(zip(graph.edge_u, graph.edge_v, scores.scores))
    )
    write_csv(args.out, ["edge_id", "u", "v", "score"], rows)
    _sidecar(args.out, {
        "command": "betweenness", "graph": args.graph, "method": args.method,
        "lambda": args.lam, "epsilon": args.epsilon, "samples": args.samples,
        "seed": args.seed, "threads": args.threads, "out": args.out,
        "wall_time_s": wall, "score_params": scores.params,
    })
    print(f"{args.method} scores for {graph.edge_count} edges in {wall:.3f}s")
    return 0


def _curve_rows(curve):
    return zip(curve.times, curve.s, curve.e, curve.i, curve.r)


def _simulate_curve(graph, args, init, beta):
    if args.model == "ode":
        params = OdeSeirParams(
            beta=beta, sigma=args.sigma, gamma=args.gamma, dt=args.dt,
            horizon=args.horizon if args.horizon is not None else 365.0,
        )
        return simulate_ode_seir(graph, params, init)
    params = AgentSeirParams(
        beta=beta, sigma=args.sigma, gamma=args.gamma,
        horizon=int(args.horizon) if args.horizon is not None else 1000,
        seed=args.seed,
    )
    if args.trials > 1:
        curve, _ = ensemble_agent_seir(graph, params, init, args.trials, threads=args.threads)
        return curve
    return simulate_agent_seir(graph, params, init)


def cmd_simulate(args) -> int:
    graph = _load_graph(args.graph)
    init = _parse_init(args.init, args.seed)
    curve = _simulate_curve(graph, args, init, args.beta)
    write_csv(args.out, ["t", "S", "E", "I", "R"], _curve_rows(curve))
    _sidecar(args.out, {
        "command": "simulate", "graph": args.graph, "model": args.model,
        "beta": args.beta, "sigma": args.sigma, "gamma": args.gamma,
        "dt": args.dt, "horizon": args.horizon, "init": args.init,
        "seed": args.seed, "trials": args.trials, "threads": args.threads,
        "out": args.out, "metrics": curve_metrics(curve),
    })
    return 0


def _build_method(args, graph, token: str):
    name, sep, param = token.partition(":")
    if name == "ui":
        return "uniform"
    if name == "lf":
        if not sep:
            raise UsageError(f"lf method token needs a spread value, e.g. lf:0.1, got {token!r}")
        try:
            lam = float(param)
        except ValueError:
            raise UsageError(f"bad lf spread in {token!r}") from None
        return lf_betweenness(graph, lam, epsilon=args.epsilon, threads=args.threads)
    if sep:
        raise UsageError(f"method {name!r} takes no parameter")
    if name == "sp":
        return sp_betweenness(graph, threads=args.threads)
    if name == "cf":
        return cf_betweenness(graph)
    if name == "hd":
        return hd_edge_scores(graph)
    if name == "eg":
        return eg_edge_scores(graph)
    raise UsageError(f"unknown method {name!r}")


def cmd_intervene(args) -> int:
    graph = _load_graph(args.graph)
    init = _parse_init(args.init, args.seed)
    coverages = _float_list(args.coverage, "--coverage")
    tokens = [tok.strip() for tok in args.method.split(",") if tok.strip()]
    if not tokens:
        raise UsageError("--method lists no methods")
    methods = {}
    failures = {}
    for token in tokens:
        try:
            methods[token] = _build_method(args, graph, token)
        except (ValueError, RuntimeError) as exc:
            failures[token] = f"{type(exc).__name__}: {exc}"
    calibration = None
    if args.beta is not None and args.target is not None:
        raise UsageError("--beta and --target are mutually exclusive")
    if args.beta is not None:
        beta = args.beta
    elif args.target is not None:
        cal = calibrate_beta_final_size(
            graph, init, model=args.model, target=args.target, tol=args.tol,
            sigma=args.sigma, gamma=args.gamma, dt=args.dt, horizon=args.horizon,
            trials=args.trials, seed=args.seed, threads=args.threads,
        )
        beta = cal.beta
        calibration = {"beta": cal.beta, "achieved": cal.achieved,
                       "iterations": cal.iterations}
    else:
        raise UsageError("one of --beta or --target is required")
    report = run_intervention_experiment(
        graph, methods, coverages, init, beta=beta, model=args.model,
        retain=args.rho, sigma=args.sigma, gamma=args.gamma, trials=args.trials,
        seed=args.seed, horizon=args.horizon, dt=args.dt, threads=args.threads,
    )
    rows = [
        (r.method, r.coverage, r.final_size, r.peak_prevalence, r.peak_time, r.error)
        for r in report.rows
    ]
    write_csv(args.out, ["method", "coverage", "final_size", "peak_prevalence",
                         "peak_time", "error"], rows)
    for row in report.rows:
        if row.error is not None:
            failures[f"{row.method}@{row.coverage:g}"] = row.error
    _sidecar(args.out, {
        "command": "intervene", "graph": args.graph, "method": tokens,
        "coverage": coverages, "rho": args.rho, "model": args.model,
        "beta": beta, "target": args.target, "sigma": args.sigma,
        "gamma": args.gamma, "dt": args.dt, "horizon": args.horizon,
        "init": args.init, "seed": args.seed, "trials": args.trials,
        "threads": args.threads, "epsilon": args.epsilon, "out": args.out,
        "calibration": calibration, "experiment": report.config,
        "failures": failures,
    })
    if failures:
        print(f"{len(failures)} cell(s) failed; see {args.out}.json", file=sys.stderr)
        return 2
    return 0


def cmd_ncp(args) -> int:
    graph = _load_graph(args.graph)
    lambdas = _float_list(args.lam, "--lambda")
    seeds = None
    if args.samples is not None:
        rng = np.random.default_rng(args.seed)
        count = min(args.samples, graph.node_count)
        seeds = np.sort(rng.choice(graph.node_count, size=count, replace=False))
    points = ncp_approx(
        graph, lambdas, seeds=seeds, sample_seed=args.seed,
        epsilon=args.epsilon, threads=args.threads,
    )
    rows = [(ncp_bucket(p.size), p.conductance) for p in points]
    write_csv(args.out, ["size_bucket", "conductance"], rows)
    _sidecar(args.out, {
        "command": "ncp", "graph": args.graph, "lambda": lambdas,
        "samples": args.samples, "seed": args.seed, "epsilon": args.epsilon,
        "threads": args.threads, "out": args.out,
        "points": [
            {"size": p.size, "conductance": p.conductance,
             "seed_node": p.seed_node, "lambda": p.lam}
            for p in points
        ],
    })
    return 0


def cmd_calibrate(args) -> int:
    graph = _load_graph(args.graph)
    init = _parse_init(args.init, args.seed)
    bracket = None
    if args.bracket is not None:
        values = _float_list(args.bracket, "--bracket")
        if len(values) != 2:
            raise UsageError("--bracket expects exactly two numbers, e.g. 0,2")
        bracket = (values[0], values[1])
    result = calibrate_beta_final_size(
        graph, init, model=args.model, target=args.target, tol=args.tol,
        bracket=bracket, sigma=args.sigma, gamma=args.gamma, dt=args.dt,
        horizon=args.horizon, trials=args.trials, seed=args.seed,
        threads=args.threads,
    )
    write_json(args.out, {
        "beta": result.beta, "achieved": result.achieved,
        "iterations": result.iterations, "model": result.model,
        "trials": result.trials,
        "config": {
            "command": "calibrate", "graph": args.graph, "model": args.model,
            "target": args.target, "tol": args.tol, "bracket": args.bracket,
            "sigma": args.sigma, "gamma": args.gamma, "dt": args.dt,
            "horizon": args.horizon, "trials": args.trials, "seed": args.seed,
            "init": args.init, "threads": args.threads, "out": args.out,
        },
    })
    return 0


def _add_epidemic_flags(sub, with_beta: bool = True):
    if with_beta:
        sub.add_argument("--beta", type=float, default=None)
    sub.add_argument("--sigma", type=float, default=0.4)
    sub.add_argument("--gamma", type=float, default=0.2)
    sub.add_argument("--dt", type=float, default=0.05)
    sub.add_argument("--horizon", type=float, default=None)
    sub.add_argument("--init", required=True,
                     help="cluster:FILE (node ids, one per line) or random:FRACTION")
    sub.add_argument("--trials", type=int, default=20)


def build_parser() -> _Parser:
    parser = _Parser(prog="flowbet", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = subs.add_parser("gen", help="write a generated graph as an edge list")
    gen.add_argument("kind", choices=["planted-partition", "bridged-clusters"])
    gen.add_argument("--n", type=int, default=None)
    gen.add_argument("--k", type=int, default=None)
    gen.add_argument("--p-in", type=float, default=0.3, dest="p_in")
    gen.add_argument("--p-out", type=float, default=0.003, dest="p_out")
    gen.add_argument("--clusters", default=None, help="comma-separated clique sizes")
    gen.add_argument("--bridges", default=None,
                     help="comma-separated cluster:member:cluster:member:length")
    gen.set_defaults(func=cmd_gen)

    bet = subs.add_parser("betweenness", help="score edges and write a CSV")
    bet.add_argument("--graph", required=True)
    bet.add_argument("--method", required=True,
                     choices=["lf", "l2", "sp", "cf", "hd", "eg"])
    bet.add_argument("--lambda", type=float, default=None, dest="lam")
    bet.add_argument("--epsilon", type=float, default=1e-6)
    bet.add_argument("--samples", type=int, default=None)
    bet.set_defaults(func=cmd_betweenness)

    sim = subs.add_parser("simulate", help="run one epidemic and write its curve")
    sim.add_argument("--graph", required=True)
    sim.add_argument("--model", choices=["ode", "agent"], default="agent")
    _add_epidemic_flags(sim)
    sim.set_defaults(func=cmd_simulate)

    inter = subs.add_parser("intervene", help="evaluate a methods-by-coverages grid")
    inter.add_argument("--graph", required=True)
    inter.add_argument("--method", required=True,
                       help="comma-separated tokens: ui, hd, eg, sp, cf, lf:SPREAD")
    inter.add_argument("--coverage", required=True,
                       help="comma-separated coverage fractions")
    inter.add_argument("--rho", type=float, default=0.1,
                       help="retained weight fraction on targeted edges")
    inter.add_argument("--model", choices=["ode", "agent"], default="agent")
    inter.add_argument("--target", type=float, default=None,
                       help="calibrate beta to this baseline final size")
    inter.add_argument("--tol", type=float, default=0.01)
    inter.add_argument("--epsilon", type=float, default=1e-6)
    _add_epidemic_flags(inter)
    inter.set_defaults(func=cmd_intervene)

    ncp = subs.add_parser("ncp", help="approximate the community profile")
    ncp.add_argument("--graph", required=True)
    ncp.add_argument("--lambda", required=True, dest="lam",
                     help="comma-separated spread values")
    ncp.add_argument("--samples", type=int, default=None)
    ncp.add_argument("--epsilon", type=float, default=1e-6)
    ncp.set_defaults(func=cmd_ncp)

    cal = subs.add_parser("calibrate", help="find beta matching a target final size")
    cal.add_argument("--graph", required=True)
    cal.add_argument("--model", choices=["ode", "agent"], default="agent")
    cal.add_argument("--target", type=float, required=True)
    cal.add_argument("--tol", type=float, default=0.01)
    cal.add_argument("--bracket", default=None, help="lo,hi search bracket")
    _add_epidemic_flags(cal, with_beta=False)
    cal.set_defaults(func=cmd_calibrate)

    for sub in (gen, bet, sim, inter, ncp, cal):
        sub.add_argument("--seed", type=int, default=0)
        sub.add_argument("--threads", type=int, default=1)
        sub.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"{parser.prog}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
