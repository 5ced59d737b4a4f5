"""Edge centralities: local-flow betweenness and the classical baselines.

Local-flow (LF) betweenness runs one diffusion per source node and
accumulates flow magnitudes per edge. Per-source work is kept
proportional to how far the mass actually spreads: every piece of state
a solve dirties is recorded and reset through that record, never by a
full sweep, so small spread parameters really do cost less. Sources are
processed in fixed-size blocks whose partial sums are reduced in
ascending block order, making scores bit-identical for any worker count.

The baselines: shortest-path (SP) edge betweenness by dependency
accumulation over hop-count shortest paths, current-flow (CF) from
Laplacian potentials, plus the cheap degree (HD) and eigenvector (EG)
incident-maximum scores. The general flow betweenness over uniform
source/target pairs has an exact mode solved through per-pair Laplacian
least-squares, intentionally sharing no solve path with CF so the two
can certify each other.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from numba import njit

from .diffusion import (
    _push_loop,
    dense_laplacian,
    sink_capacities,
    solve_l2_diffusion,
)
from .graphs import Graph

__all__ = [
    "CentralityError",
    "EdgeScores",
    "NodeScores",
    "lf_betweenness",
    "l2_flow_betweenness",
    "cf_betweenness",
    "sp_betweenness",
    "hd_edge_scores",
    "eg_edge_scores",
    "node_scores_from_edges",
]

LF_BLOCK_SIZE = 256


class CentralityError(RuntimeError):
    """A centrality computation that cannot produce a trustworthy result."""


@dataclass
class EdgeScores:
    """Per-edge nonnegative scores aligned with the graph's edge order."""

    method: str
    scores: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64).ravel()
        if self.scores.size and self.scores.min() < 0:
            raise ValueError("edge scores must be nonnegative")


@dataclass
class NodeScores:
    """Per-node nonnegative scores."""

    method: str
    scores: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64).ravel()
        if self.scores.size and self.scores.min() < 0:
            raise ValueError("node scores must be nonnegative")


def _is_connected(graph: Graph) -> bool:
    n = graph.node_count
    if n <= 1:
        return True
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in graph.adj_nodes[graph.indptr[u] : graph.indptr[u + 1]]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(int(v))
    return count == n


@njit(cache=True, nogil=True)
def _lf_block(
    indptr,
    adj_nodes,
    adj_weights,
    adj_edges,
    wdeg,
    sink,
    sources,
    eps,
    max_pushes,
    scores,
    x,
    r,
    in_queue,
    touched_flag,
    touched_list,
    queue,
):
    """Accumulate |flow| per edge for a block of unit sources.

    Workspace arrays are clean on entry (x = 0, flags false) and are
    returned clean via the touched record, so consecutive sources pay
    only for the state they dirtied. Returns (bad_source, code): code 1
    on success, 0 for a push-budget failure at bad_source, -1 for source
    mass stuck on a zero-degree node.
    """
    for si in range(sources.shape[0]):
        s = sources[si]
        touched_flag[s] = True
        touched_list[0] = s
        n_touched = 1
        r[s] = 1.0 - sink[s]
        q_len = 0
        if r[s] > eps:
            in_queue[s] = True
            queue[0] = s
            q_len = 1
        pushes, n_touched, status = _push_loop(
            indptr,
            adj_nodes,
            adj_weights,
            wdeg,
            sink,
            x,
            r,
            in_queue,
            touched_flag,
            touched_list,
            n_touched,
            queue,
            q_len,
            eps,
            max_pushes,
        )
        if status != 1:
            for i in range(n_touched):
                v = touched_list[i]
                x[v] = 0.0
                r[v] = 0.0
                touched_flag[v] = False
                in_queue[v] = False
            return s, status
        for i in range(n_touched):
            u = touched_list[i]
            xu = x[u]
            for k in range(indptr[u], indptr[u + 1]):
                v = adj_nodes[k]
                if touched_flag[v] and v < u:
                    continue  # both endpoints touched: credited from min(u, v)
                d = xu - x[v]
                if d != 0.0:
                    scores[adj_edges[k]] += abs(adj_weights[k] * d)
        for i in range(n_touched):
            v = touched_list[i]
            x[v] = 0.0
            r[v] = 0.0
            touched_flag[v] = False
            in_queue[v] = False
    return -1, 1


def lf_betweenness(
    graph: Graph,
    lam: float,
    epsilon: float = 1e-6,
    max_pushes: int = 10**9,
    threads: int = 1,
    sources=None,
) -> EdgeScores:
    """Local-flow edge betweenness with spread parameter lam in (0, 1].

    For each source v, unit mass diffuses against sink capacities
    d/(lam * volume) and the resulting flow magnitudes accumulate per
    edge; the total is divided by the number of sources (all nodes by
    default). Any nonconverged solve raises, naming the source. Scores
    are identical for every thread count.
    """
    n = graph.node_count
    sink = sink_capacities(graph, lam)
    if sources is None:
        src = np.arange(n, dtype=np.int64)
        sampled = False
    else:
        src = np.asarray(sources, dtype=np.int64).ravel()
        if src.size and (src.min() < 0 or src.max() >= n):
            raise ValueError("source node out of range")
        sampled = True
    params = {
        "lambda": float(lam),
        "epsilon": float(epsilon),
        "source_count": int(src.size),
        "sampled_sources": sampled,
    }
    if src.size == 0:
        return EdgeScores("LF", np.zeros(graph.edge_count), params)

    blocks = [src[i : i + LF_BLOCK_SIZE] for i in range(0, src.size, LF_BLOCK_SIZE)]
    partials: list = [None] * len(blocks)

    def run_block(bi):
        scores = np.zeros(graph.edge_count, dtype=np.float64)
        x = np.zeros(n, dtype=np.float64)
        r = np.zeros(n, dtype=np.float64)
        in_queue = np.zeros(n, dtype=np.bool_)
        touched_flag = np.zeros(n, dtype=np.bool_)
        touched_list = np.zeros(n, dtype=np.int64)
        queue = np.zeros(n + 1, dtype=np.int64)
        bad, code = _lf_block(
            graph.indptr,
            graph.adj_nodes,
            graph.adj_weights,
            graph.adj_edges,
            graph.weighted_degree,
            sink,
            blocks[bi],
            float(epsilon),
            int(max_pushes),
            scores,
            x,
            r,
            in_queue,
            touched_flag,
            touched_list,
            queue,
        )
        partials[bi] = (scores, int(bad), int(code))

    if threads <= 1:
        for bi in range(len(blocks)):
            run_block(bi)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_block, range(len(blocks))))

    for _, bad, code in partials:
        if code == 0:
            raise CentralityError(
                f"diffusion exceeded max_pushes for source node {bad}"
            )
        if code == -1:
            raise CentralityError(
                f"source node {bad} cannot settle its mass (zero degree)"
            )
    total = np.zeros(graph.edge_count, dtype=np.float64)
    for scores, _, _ in partials:  # ascending block order: deterministic sum
        total += scores
    total /= src.size
    return EdgeScores("LF", total, params)


def l2_flow_betweenness(
    graph: Graph,
    mode: str = "exact",
    nsamples: int | None = None,
    seed=None,
    sampler=None,
    max_exact_nodes: int = 64,
) -> EdgeScores:
    """Flow betweenness over source/target pairs.

    Exact mode enumerates all ordered node pairs (s, t), recovers the
    pair's potentials from a full-Laplacian least-squares solve, and
    averages flow magnitudes over |V|^2 (the s = t diagonal contributes
    zero). It requires a connected graph and is meant for small ones.

    Sampled mode draws nsamples problems from a caller-supplied
    sampler(rng) -> DiffusionProblem, solves each with the push solver,
    and averages.
    """
    m = graph.edge_count
    if mode == "exact":
        n = graph.node_count
        if n == 0:
            raise CentralityError("empty graph")
        if not _is_connected(graph):
            raise CentralityError("exact pair mode needs a connected graph")
        if n > max_exact_nodes:
            raise CentralityError(
                f"exact pair mode on {n} nodes would need {n * (n - 1) // 2} dense "
                "solves; use cf_betweenness(normalized=True) instead"
            )
        L = dense_laplacian(graph)
        scores = np.zeros(m, dtype=np.float64)
        for s in range(n):
            for t in range(s + 1, n):
                rhs = np.zeros(n)
                rhs[s] = 1.0
                rhs[t] = -1.0
                y, *_ = np.linalg.lstsq(L, rhs, rcond=None)
                scores += np.abs(graph.edge_w * (y[graph.edge_u] - y[graph.edge_v]))
        scores *= 2.0  # both orders of each pair carry the same magnitude
        scores /= float(n) ** 2
        return EdgeScores("L2FLOW", scores, {"mode": "exact"})
    if mode == "sampled":
        if sampler is None or nsamples is None:
            raise ValueError("sampled mode needs sampler and nsamples")
        rng = np.random.default_rng(seed)
        scores = np.zeros(m, dtype=np.float64)
        for _ in range(int(nsamples)):
            problem = sampler(rng)
            sol = solve_l2_diffusion(graph, problem)
            if not sol.converged:
                raise CentralityError("sampled diffusion did not converge")
            np.add.at(scores, sol.flow_edges, np.abs(sol.flow_values))
        scores /= float(nsamples)
        return EdgeScores(
            "L2FLOW", scores, {"mode": "sampled", "nsamples": int(nsamples), "seed": seed}
        )
    raise ValueError(f"unknown pair mode {mode!r}")


def _sorted_pair_distance_sum(z):
    """2 * sum_{s<t} |z[s] - z[t]| via one sort."""
    zs = np.sort(z)
    n = zs.shape[0]
    coef = 2.0 * np.arange(n) - (n - 1)
    return 2.0 * float(np.dot(coef, zs))


def _cf_potentials_dense(graph: Graph):
    """Inverse of the grounded Laplacian with one refinement pass."""
    n = graph.node_count
    A = np.zeros((n, n), dtype=np.float64)
    u, v, w = graph.edge_u, graph.edge_v, graph.edge_w
    A[u, v] = -w
    A[v, u] = -w
    A[np.arange(n), np.arange(n)] = graph.weighted_degree
    Lg = A[1:, 1:]
    lu_piv = scipy.linalg.lu_factor(Lg)
    eye = np.eye(n - 1)
    Y = scipy.linalg.lu_solve(lu_piv, eye)
    # one iterative-refinement step keeps pair sums accurate to ~1e-12
    Y += scipy.linalg.lu_solve(lu_piv, eye - Lg @ Y)
    return Y


def cf_betweenness(
    graph: Graph,
    normalized: bool = False,
    max_dense_nodes: int = 5000,
    max_nodes: int = 20000,
    cg_rtol: float = 1e-12,
) -> EdgeScores:
    """Current-flow edge betweenness from Laplacian potentials.

    For each edge, the potential-difference profile across all nodes is
    reduced with a sorted prefix sum, giving the sum over ordered node
    pairs of that edge's current magnitude. Dense factorization up to
    max_dense_nodes; per-edge conjugate-gradient solves beyond that.
    normalized=True divides by |V|^2.
    """
    n = graph.node_count
    m = graph.edge_count
    if n == 0:
        raise CentralityError("empty graph")
    if not _is_connected(graph):
        raise CentralityError("current-flow betweenness needs a connected graph")
    if n > max_nodes:
        raise CentralityError(
            f"{n} nodes exceeds max_nodes={max_nodes}; raise the limit explicitly "
            "or rank with lf_betweenness / sp_betweenness instead"
        )
    scores = np.zeros(m, dtype=np.float64)
    if m == 0:
        return EdgeScores("CF", scores, {"normalized": bool(normalized)})
    if n <= max_dense_nodes:
        Y = _cf_potentials_dense(graph)
        z = np.zeros(n, dtype=np.float64)
        for e in range(m):
            u, v = int(graph.edge_u[e]), int(graph.edge_v[e])
            z[0] = 0.0
            if u == 0:
                z[1:] = -Y[v - 1]
            else:
                z[1:] = Y[u - 1] - Y[v - 1]
            scores[e] = graph.edge_w[e] * _sorted_pair_distance_sum(z)
    else:
        Lg = _grounded_laplacian_sparse(graph)
        z = np.zeros(n, dtype=np.float64)
        for e in range(m):
            u, v = int(graph.edge_u[e]), int(graph.edge_v[e])
            rhs = np.zeros(n - 1, dtype=np.float64)
            if u > 0:
                rhs[u - 1] = 1.0
            rhs[v - 1] = -1.0
            sol, info = scipy.sparse.linalg.cg(
                Lg, rhs, rtol=cg_rtol, atol=0.0, maxiter=20 * n
            )
            if info != 0:
                raise CentralityError(f"conjugate gradient failed on edge {e}")
            z[0] = 0.0
            z[1:] = sol
            scores[e] = graph.edge_w[e] * _sorted_pair_distance_sum(z)
    params = {"normalized": bool(normalized)}
    if normalized:
        scores = scores / float(n) ** 2
    return EdgeScores("CF", scores, params)


def _grounded_laplacian_sparse(graph: Graph):
    n = graph.node_count
    A = scipy.sparse.csr_matrix(
        (graph.adj_weights, graph.adj_nodes, graph.indptr), shape=(n, n)
    )
    L = scipy.sparse.diags(graph.weighted_degree) - A
    return L.tocsr()[1:, 1:].tocsr()


@njit(cache=True, nogil=True)
def _brandes_block(indptr, adj_nodes, adj_edges, sources, scores):
    """Hop-count dependency accumulation for a block of sources."""
    n = indptr.shape[0] - 1
    dist = np.empty(n, dtype=np.int64)
    sigma = np.empty(n, dtype=np.float64)
    delta = np.empty(n, dtype=np.float64)
    order = np.empty(n, dtype=np.int64)
    for si in range(sources.shape[0]):
        s = sources[si]
        for i in range(n):
            dist[i] = -1
            sigma[i] = 0.0
            delta[i] = 0.0
        dist[s] = 0
        sigma[s] = 1.0
        order[0] = s
        head = 0
        tail = 1
        while head < tail:
            u = order[head]
            head += 1
            du = dist[u]
            for k in range(indptr[u], indptr[u + 1]):
                v = adj_nodes[k]
                if dist[v] < 0:
                    dist[v] = du + 1
                    order[tail] = v
                    tail += 1
                if dist[v] == du + 1:
                    sigma[v] += sigma[u]
        for oi in range(tail - 1, 0, -1):
            w = order[oi]
            coeff = (1.0 + delta[w]) / sigma[w]
            dw = dist[w]
            for k in range(indptr[w], indptr[w + 1]):
                v = adj_nodes[k]
                if dist[v] == dw - 1:
                    c = sigma[v] * coeff
                    scores[adj_edges[k]] += c
                    delta[v] += c


def sp_betweenness(graph: Graph, threads: int = 1) -> EdgeScores:
    """Shortest-path edge betweenness over ordered node pairs.

    Paths are unweighted hop-count shortest paths regardless of edge
    weights (rankings feed interventions computed on the unit-weight
    network). Disconnected graphs are fine; pairs in different
    components contribute nothing.
    """
    n = graph.node_count
    src = np.arange(n, dtype=np.int64)
    blocks = [src[i : i + LF_BLOCK_SIZE] for i in range(0, n, LF_BLOCK_SIZE)]
    partials: list = [None] * len(blocks)

    def run_block(bi):
        scores = np.zeros(graph.edge_count, dtype=np.float64)
        _brandes_block(graph.indptr, graph.adj_nodes, graph.adj_edges, blocks[bi], scores)
        partials[bi] = scores

    if threads <= 1:
        for bi in range(len(blocks)):
            run_block(bi)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_block, range(len(blocks))))
    total = np.zeros(graph.edge_count, dtype=np.float64)
    for scores in partials:
        total += scores
    return EdgeScores("SP", total, {})


def hd_edge_scores(graph: Graph) -> EdgeScores:
    """Highest incident weighted degree per edge."""
    scores = np.maximum(
        graph.weighted_degree[graph.edge_u], graph.weighted_degree[graph.edge_v]
    )
    return EdgeScores("HD", scores, {})


def eg_edge_scores(graph: Graph, tol: float = 1e-10, max_iter: int = 10**4) -> EdgeScores:
    """Highest incident eigenvector-centrality entry per edge.

    Power iteration on A + I (the diagonal shift rules out sign-flipping
    on bipartite graphs without moving the dominant eigenvector),
    normalized to unit max-norm.
    """
    n = graph.node_count
    if n == 0:
        raise CentralityError("empty graph")
    if not _is_connected(graph):
        raise CentralityError("eigenvector scores need a connected graph")
    A = scipy.sparse.csr_matrix(
        (graph.adj_weights, graph.adj_nodes, graph.indptr), shape=(n, n)
    )
    x = np.ones(n, dtype=np.float64)
    for _ in range(max_iter):
        y = A @ x + x
        y /= y.max()
        if np.abs(y - x).max() <= tol:
            scores = np.maximum(y[graph.edge_u], y[graph.edge_v])
            return EdgeScores("EG", scores, {"tol": tol})
        x = y
    raise CentralityError(f"power iteration did not converge in {max_iter} steps")


def node_scores_from_edges(graph: Graph, edge_scores: EdgeScores) -> NodeScores:
    """Sum each node's incident edge scores; the method tag carries over."""
    s = edge_scores.scores
    if s.shape[0] != graph.edge_count:
        raise ValueError("edge score length does not match graph")
    out = np.zeros(graph.node_count, dtype=np.float64)
    np.add.at(out, graph.edge_u, s)
    np.add.at(out, graph.edge_v, s)
    return NodeScores(edge_scores.method, out, dict(edge_scores.params))
