"""Turn edge and node scores into intervention plans and evaluate them.

An intervention either multiplies the weights of a targeted edge set by
a retain factor (default 0.1, a 90 percent contact reduction), shrinks
every edge weight uniformly so the total removed weight matches an
edge-targeted plan of the same coverage, or disconnects a targeted node
set entirely.  Targets always come from scores computed on the original
pre-intervention graph; plans are pure functions of the scores and the
coverage, with ties broken by canonical edge order so identical inputs
give identical targeted sets.

``run_intervention_experiment`` evaluates a methods-by-coverages grid
under one fixed epidemic configuration (same model, initial condition,
and master seed in every cell, so differences between rows come from
the interventions alone) and reports final size, peak prevalence, and
peak time per cell next to a no-intervention baseline.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .centrality import EdgeScores, NodeScores
from .epidemic import (
    AgentSeirParams,
    EpidemicCurve,
    InitialCondition,
    OdeSeirParams,
    curve_metrics,
    ensemble_agent_seir,
    simulate_ode_seir,
)
from .graphs import Graph, disconnect_nodes, reweigh_edges

_PLAN_MODES = ("edge-targeted", "uniform", "node-immunize")


@dataclass(frozen=True)
class InterventionPlan:
    """A resolved intervention: what to touch and how hard.

    ``retain`` is the weight multiplier on targeted edges for the
    edge-targeted mode; the uniform mode spreads the same total
    reduction over all edges by multiplying every weight with
    ``1 - (1 - retain) * coverage``.
    """

    method: str
    coverage: float
    mode: str
    retain: float = 0.1
    edges: tuple[int, ...] | None = None
    nodes: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.mode not in _PLAN_MODES:
            raise ValueError(f"mode must be one of {_PLAN_MODES}")
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")
        if not 0.0 < self.retain <= 1.0:
            raise ValueError("retain factor must lie in (0, 1]")
        if self.mode == "edge-targeted":
            if self.edges is None or self.nodes is not None:
                raise ValueError("edge-targeted plans carry an edge set only")
            object.__setattr__(self, "edges", tuple(int(e) for e in self.edges))
        elif self.mode == "node-immunize":
            if self.nodes is None or self.edges is not None:
                raise ValueError("node-immunize plans carry a node set only")
            object.__setattr__(self, "nodes", tuple(int(v) for v in self.nodes))
        elif self.edges is not None or self.nodes is not None:
            raise ValueError("uniform plans carry no targeted sets")


def _score_array(scores) -> np.ndarray:
    arr = scores.scores if isinstance(scores, (EdgeScores, NodeScores)) else scores
    return np.asarray(arr, dtype=np.float64)


def _top_k_ids(values: np.ndarray, k: int) -> np.ndarray:
    order = np.lexsort((np.arange(values.size), -values))
    return np.sort(order[:k]).astype(np.int64)


def select_top_edges(scores, coverage: float) -> np.ndarray:
    """Edge ids of the floor(coverage * |E|) highest-scoring edges.

    Ties break toward the lower canonical edge id so the selection is
    deterministic.  Returns the ids sorted ascending.
    """
    if not 0.0 <= coverage <= 1.0:
        raise ValueError("coverage must lie in [0, 1]")
    values = _score_array(scores)
    k = math.floor(coverage * values.size)
    return _top_k_ids(values, k)


def _edge_id_set(selected, edge_count: int) -> np.ndarray:
    ids = np.unique(np.asarray(selected, dtype=np.int64).ravel()) if len(selected) else np.empty(0, np.int64)
    if ids.size and (ids[0] < 0 or ids[-1] >= edge_count):
        raise ValueError("edge ids must lie in [0, edge_count)")
    return ids


def apply_edge_intervention(graph: Graph, edges, retain: float = 0.1) -> Graph:
    """Multiply the targeted edge weights by ``retain``; others untouched."""
    if not 0.0 < retain <= 1.0:
        raise ValueError("retain factor must lie in (0, 1]")
    ids = _edge_id_set(edges, graph.edge_count)
    return reweigh_edges(graph, {int(e): retain for e in ids})


def apply_uniform_intervention(graph: Graph, coverage: float, strength: float = 0.9) -> Graph:
    """Multiply every edge weight by ``1 - strength * coverage``."""
    if not 0.0 <= coverage <= 1.0:
        raise ValueError("coverage must lie in [0, 1]")
    factor = 1.0 - strength * coverage
    if factor <= 0.0:
        raise ValueError(
            f"strength * coverage = {strength * coverage:g} would zero every weight"
        )
    return reweigh_edges(graph, {e: factor for e in range(graph.edge_count)})


def immunize_top_nodes(graph: Graph, node_scores, coverage: float) -> Graph:
    """Disconnect the floor(coverage * |V|) highest-scoring nodes."""
    if not 0.0 <= coverage <= 1.0:
        raise ValueError("coverage must lie in [0, 1]")
    values = _score_array(node_scores)
    if values.size != graph.node_count:
        raise ValueError("node scores must cover every node of this graph")
    k = math.floor(coverage * graph.node_count)
    return disconnect_nodes(graph, _top_k_ids(values, k))


def apply_plan(graph: Graph, plan: InterventionPlan) -> Graph:
    """Apply a resolved plan of any mode to a graph."""
    if plan.mode == "edge-targeted":
        return apply_edge_intervention(graph, plan.edges, plan.retain)
    if plan.mode == "uniform":
        return apply_uniform_intervention(graph, plan.coverage, 1.0 - plan.retain)
    return disconnect_nodes(graph, np.asarray(plan.nodes, dtype=np.int64))


def score_fingerprint(scores) -> str:
    """Short content hash identifying the exact score set a plan used."""
    digest = hashlib.sha256()
    digest.update(scores.method.encode())
    digest.update(np.ascontiguousarray(_score_array(scores)).tobytes())
    return digest.hexdigest()[:16]


def cut_edge_recall(assignment, selected, graph: Graph) -> float:
    """Fraction of between-community edges contained in the selection."""
    labels = np.asarray(assignment)
    if labels.shape != (graph.node_count,):
        raise ValueError("community labels must cover every node")
    cut = labels[graph.edge_u] != labels[graph.edge_v]
    total = int(cut.sum())
    if total == 0:
        raise ValueError("no cut edges between communities; recall is undefined")
    ids = _edge_id_set(selected, graph.edge_count)
    hit = np.zeros(graph.edge_count, dtype=bool)
    hit[ids] = True
    return float((hit & cut).sum() / total)


def out_link_coverage(initial_cluster, selected, graph: Graph) -> float:
    """Fraction of the cluster's boundary edges contained in the selection."""
    member = np.zeros(graph.node_count, dtype=bool)
    nodes = np.asarray(initial_cluster, dtype=np.int64)
    if nodes.size and (nodes.min() < 0 or nodes.max() >= graph.node_count):
        raise ValueError("cluster node ids must lie in [0, node_count)")
    member[nodes] = True
    boundary = member[graph.edge_u] ^ member[graph.edge_v]
    total = int(boundary.sum())
    if total == 0:
        raise ValueError("the cluster has no boundary edges")
    ids = _edge_id_set(selected, graph.edge_count)
    hit = np.zeros(graph.edge_count, dtype=bool)
    hit[ids] = True
    return float((hit & boundary).sum() / total)


@dataclass
class InterventionRow:
    """One grid cell: a method at a coverage, or the baseline."""

    method: str
    coverage: float
    final_size: float
    peak_prevalence: float
    peak_time: float
    curve: EpidemicCurve | None = None
    error: str | None = None


@dataclass
class InterventionReport:
    """All grid cells plus the shared epidemic configuration."""

    rows: list[InterventionRow]
    config: dict = field(default_factory=dict)

    @property
    def baseline(self) -> InterventionRow:
        for row in self.rows:
            if row.method == "baseline":
                return row
        raise ValueError("report has no baseline row")

    def cell(self, method: str, coverage: float) -> InterventionRow:
        for row in self.rows:
            if row.method == method and row.coverage == coverage:
                return row
        raise KeyError(f"no row for ({method}, {coverage})")


def run_intervention_experiment(
    graph: Graph,
    methods: Mapping[str, object],
    coverages: Sequence[float],
    init: InitialCondition,
    *,
    beta: float,
    model: str = "agent",
    retain: float = 0.1,
    sigma: float = 0.4,
    gamma: float = 0.2,
    trials: int = 20,
    seed: int = 0,
    horizon: float | None = None,
    dt: float = 0.05,
    threads: int = 1,
) -> InterventionReport:
    """Evaluate a methods-by-coverages grid under one epidemic setup.

    ``methods`` maps a tag to what drives its plans: an ``EdgeScores``
    for edge targeting, a ``NodeScores`` for node immunization, or the
    literal string ``"uniform"`` for the uniform reduction.  Scores must
    come from the original pre-intervention graph and are fingerprinted
    into the report config.  Every cell simulates with the identical
    initial condition and master seed; a failed cell is reported in its
    row rather than silently dropped.
    """
    if model not in ("ode", "agent"):
        raise ValueError("model must be 'ode' or 'agent'")
    if not 0.0 < retain <= 1.0:
        raise ValueError("retain factor must lie in (0, 1]")
    coverages = [float(c) for c in coverages]
    for c in coverages:
        if not 0.0 <= c <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")
    if horizon is None:
        horizon = 1000 if model == "agent" else 365.0
    fingerprints: dict[str, str | None] = {}
    for tag, source in methods.items():
        if isinstance(source, EdgeScores):
            if source.scores.size != graph.edge_count:
                raise ValueError(f"edge scores for {tag!r} do not match this graph")
            fingerprints[tag] = score_fingerprint(source)
        elif isinstance(source, NodeScores):
            if source.scores.size != graph.node_count:
                raise ValueError(f"node scores for {tag!r} do not match this graph")
            fingerprints[tag] = score_fingerprint(source)
        else:
            fingerprints[tag] = None

    def build_plan(tag: str, source, coverage: float) -> InterventionPlan:
        if isinstance(source, EdgeScores):
            edges = select_top_edges(source, coverage)
            return InterventionPlan(
                method=tag, coverage=coverage, mode="edge-targeted",
                retain=retain, edges=tuple(edges),
            )
        if isinstance(source, NodeScores):
            k = math.floor(coverage * graph.node_count)
            nodes = _top_k_ids(_score_array(source), k)
            return InterventionPlan(
                method=tag, coverage=coverage, mode="node-immunize",
                retain=retain, nodes=tuple(nodes),
            )
        if source == "uniform":
            return InterventionPlan(
                method=tag, coverage=coverage, mode="uniform", retain=retain
            )
        raise ValueError(f"method {tag!r} must map to edge scores, node scores, or 'uniform'")

    def simulate(intervened: Graph) -> tuple[dict[str, float], EpidemicCurve]:
        if model == "ode":
            params = OdeSeirParams(
                beta=beta, sigma=sigma, gamma=gamma, dt=dt, horizon=horizon
            )
            curve = simulate_ode_seir(intervened, params, init, settle_tol=1e-12)
        else:
            params = AgentSeirParams(
                beta=beta, sigma=sigma, gamma=gamma, horizon=int(horizon), seed=seed
            )
            curve, _ = ensemble_agent_seir(intervened, params, init, trials)
        return curve_metrics(curve), curve

    def run_cell(cell: tuple[str, object, float]) -> InterventionRow:
        tag, source, coverage = cell
        try:
            plan = build_plan(tag, source, coverage)
            metrics, curve = simulate(apply_plan(graph, plan))
        except (ValueError, RuntimeError) as exc:
            return InterventionRow(
                method=tag, coverage=coverage, final_size=math.nan,
                peak_prevalence=math.nan, peak_time=math.nan,
                error=f"{type(exc).__name__}: {exc}",
            )
        return InterventionRow(method=tag, coverage=coverage, curve=curve, **metrics)

    base_metrics, base_curve = simulate(graph)
    rows = [InterventionRow(method="baseline", coverage=0.0, curve=base_curve, **base_metrics)]
    cells = [(tag, source, c) for tag, source in methods.items() for c in coverages]
    if threads > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows.extend(pool.map(run_cell, cells))
    else:
        rows.extend(run_cell(cell) for cell in cells)
    config = {
        "model": model,
        "beta": beta,
        "sigma": sigma,
        "gamma": gamma,
        "retain": retain,
        "seed": seed,
        "horizon": horizon,
        "coverages": coverages,
        "score_fingerprints": fingerprints,
    }
    if model == "agent":
        config["trials"] = trials
    else:
        config["dt"] = dt
    return InterventionReport(rows=rows, config=config)
