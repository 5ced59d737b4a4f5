"""2-norm flow diffusion: push solver on the dual, flow recovery, QP oracle.

The primal problem routes nonnegative source mass Delta through the edges
into per-node sink capacity T while minimizing the squared edge-flow norm.
All work happens on the dual

    minimize  g(x) = 1/2 x^T L x + (T - Delta)^T x   over x >= 0,

whose minimizer yields the edge flows f(u, v) = w(u, v) * (x(u) - x(v))
on the canonical orientation u < v. The push solver maintains the negated
gradient r = Delta - T - L x sparsely and relaxes one node at a time
(exact coordinate minimization), so work and flow support stay
proportional to the mass that actually moves rather than to graph size.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from numba import njit

from .graphs import Graph

__all__ = [
    "DiffusionError",
    "DiffusionProblem",
    "DualSolution",
    "sink_capacities",
    "solve_l2_diffusion",
    "flow_from_dual",
    "qp_oracle_solve",
    "nonzero_flow_edge_count",
    "dual_objective",
    "dense_laplacian",
]

_FEAS_SLACK = 1e-12


class DiffusionError(RuntimeError):
    """Infeasible diffusion problem or a solver that ran out of budget."""


def _delta_arrays(delta, node_count):
    """Normalize a sparse source map to sorted (nodes, mass) arrays."""
    if isinstance(delta, dict):
        nodes = np.array(sorted(delta), dtype=np.int64)
        mass = np.array([float(delta[int(v)]) for v in nodes], dtype=np.float64)
    else:
        dense = np.asarray(delta, dtype=np.float64).ravel()
        if dense.shape[0] != node_count:
            raise ValueError("dense source vector has wrong length")
        nodes = np.flatnonzero(dense).astype(np.int64)
        mass = dense[nodes]
    if nodes.size:
        if nodes[0] < 0 or nodes[-1] >= node_count:
            raise ValueError("source node out of range")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            raise ValueError("source mass must be nonnegative and finite")
    return nodes, mass


@dataclass
class DiffusionProblem:
    """Source mass, sink capacities, and solver tolerances for one solve.

    delta maps node id -> nonnegative source mass (a dense vector is also
    accepted); sink is the dense per-node capacity vector. Construction
    rejects problems whose total source mass exceeds total capacity,
    since no flow routing can settle them.
    """

    delta: dict
    sink: np.ndarray
    epsilon: float = 1e-6
    max_pushes: int = 10**9

    def __post_init__(self):
        self.sink = np.asarray(self.sink, dtype=np.float64).ravel()
        if not (self.epsilon > 0):
            raise ValueError("epsilon must be positive")
        if self.max_pushes < 1:
            raise ValueError("max_pushes must be at least 1")
        if not np.all(np.isfinite(self.sink)) or np.any(self.sink < 0):
            raise ValueError("sink capacities must be nonnegative and finite")
        _, mass = _delta_arrays(self.delta, self.sink.shape[0])
        total_in = float(mass.sum())
        total_cap = float(self.sink.sum())
        if total_in > total_cap * (1 + _FEAS_SLACK) + _FEAS_SLACK:
            raise DiffusionError(
                f"total source mass {total_in:g} exceeds total sink capacity {total_cap:g}"
            )


@dataclass
class DualSolution:
    """Result of one dual solve.

    x is the dense nonnegative dual vector. Flows are stored sparsely as
    (flow_edges, flow_values): every edge that could carry flow (an edge
    incident to a node with x > 0) appears; all other edges are exactly
    zero by construction. touched lists the nodes the solver visited,
    sorted ascending.
    """

    x: np.ndarray
    flow_edges: np.ndarray
    flow_values: np.ndarray
    pushes: int
    touched: np.ndarray
    converged: bool

    def dense_flow(self, edge_count: int) -> np.ndarray:
        f = np.zeros(edge_count, dtype=np.float64)
        f[self.flow_edges] = self.flow_values
        return f


def sink_capacities(graph: Graph, lam: float) -> np.ndarray:
    """Per-node capacity T(v) = weighted_degree(v) / (lam * volume).

    Total capacity is 1/lam, so lam = 1 gives exactly unit total capacity
    and smaller lam gives proportionally more room to spread.
    """
    if not (0 < lam <= 1):
        raise ValueError("lam must lie in (0, 1]")
    vol = graph.volume
    if vol <= 0:
        raise ValueError("graph has zero volume")
    return graph.weighted_degree / (lam * vol)


def dense_laplacian(graph: Graph) -> np.ndarray:
    """Dense weighted Laplacian L = D - A (small graphs only)."""
    n = graph.node_count
    L = np.zeros((n, n), dtype=np.float64)
    u, v, w = graph.edge_u, graph.edge_v, graph.edge_w
    L[u, v] -= w
    L[v, u] -= w
    L[np.arange(n), np.arange(n)] = graph.weighted_degree
    return L


@njit(cache=True, nogil=True)
def _push_loop(
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
):
    """FIFO push loop on a pre-seeded sparse state.

    The caller has marked the source nodes touched with r = delta - sink
    and enqueued the violators in ascending id order. Nodes reached later
    are first-touched here with r = credit - sink. Returns
    (pushes, n_touched, status): status 1 converged, 0 push budget
    exhausted, -1 excess mass stuck on a zero-degree node (infeasible).
    """
    cap = queue.shape[0]
    head = 0
    tail = q_len
    count = q_len
    pushes = 0
    status = 1
    while count > 0:
        if pushes >= max_pushes:
            status = 0
            break
        u = queue[head]
        head += 1
        if head == cap:
            head = 0
        count -= 1
        in_queue[u] = False
        ru = r[u]
        if ru <= eps:
            continue
        du = wdeg[u]
        if du <= 0.0:
            status = -1
            break
        step = ru / du
        x[u] += step
        r[u] = 0.0
        pushes += 1
        for k in range(indptr[u], indptr[u + 1]):
            nb = adj_nodes[k]
            credit = adj_weights[k] * step
            if not touched_flag[nb]:
                touched_flag[nb] = True
                touched_list[n_touched] = nb
                n_touched += 1
                r[nb] = credit - sink[nb]
            else:
                r[nb] += credit
            if r[nb] > eps and not in_queue[nb]:
                in_queue[nb] = True
                queue[tail] = nb
                tail += 1
                if tail == cap:
                    tail = 0
                count += 1
    return pushes, n_touched, status


def _flow_support(graph: Graph, x, active_nodes):
    """Sparse flows on all edges incident to the given nodes."""
    if len(active_nodes) == 0:
        empty_e = np.empty(0, dtype=np.int64)
        return empty_e, np.empty(0, dtype=np.float64)
    chunks = [
        graph.adj_edges[graph.indptr[v] : graph.indptr[v + 1]] for v in active_nodes
    ]
    eids = np.unique(np.concatenate(chunks))
    vals = graph.edge_w[eids] * (x[graph.edge_u[eids]] - x[graph.edge_v[eids]])
    return eids, vals


def solve_l2_diffusion(
    graph: Graph, problem: DiffusionProblem, debug_monotone: bool = False
) -> DualSolution:
    """Solve the dual by deterministic FIFO pushes.

    A node is pushed when its residual r(u) = Delta(u) - T(u) - (L x)(u)
    exceeds epsilon: x(u) absorbs r(u)/weighted_degree(u), which zeroes
    r(u) exactly and credits each neighbor through the joining edge. On
    convergence every residual is at most epsilon. A solve that exhausts
    max_pushes comes back flagged converged=False rather than pretending
    optimality.

    With debug_monotone=True a slow reference path recomputes the dual
    objective after every push and asserts it never increases.
    """
    n = graph.node_count
    if problem.sink.shape[0] != n:
        raise ValueError("sink capacity vector length does not match graph")
    src_nodes, src_mass = _delta_arrays(problem.delta, n)
    if float(src_mass.sum()) > float(problem.sink.sum()) * (1 + _FEAS_SLACK) + _FEAS_SLACK:
        raise DiffusionError("total source mass exceeds total sink capacity")
    if debug_monotone:
        return _reference_solve(graph, src_nodes, src_mass, problem)

    x = np.zeros(n, dtype=np.float64)
    r = np.zeros(n, dtype=np.float64)
    in_queue = np.zeros(n, dtype=np.bool_)
    touched_flag = np.zeros(n, dtype=np.bool_)
    touched_list = np.zeros(n, dtype=np.int64)
    queue = np.zeros(n + 1, dtype=np.int64)

    n_touched = 0
    q_len = 0
    for i in range(src_nodes.shape[0]):
        v = int(src_nodes[i])
        touched_flag[v] = True
        touched_list[n_touched] = v
        n_touched += 1
        r[v] = src_mass[i] - problem.sink[v]
        if r[v] > problem.epsilon:
            in_queue[v] = True
            queue[q_len] = v
            q_len += 1

    pushes, n_touched, status = _push_loop(
        graph.indptr,
        graph.adj_nodes,
        graph.adj_weights,
        graph.weighted_degree,
        problem.sink,
        x,
        r,
        in_queue,
        touched_flag,
        touched_list,
        n_touched,
        queue,
        q_len,
        float(problem.epsilon),
        int(problem.max_pushes),
    )
    if status == -1:
        raise DiffusionError("source mass exceeds capacity on a zero-degree node")
    touched = np.sort(touched_list[:n_touched])
    active = touched[x[touched] > 0]
    flow_edges, flow_values = _flow_support(graph, x, active)
    return DualSolution(
        x=x,
        flow_edges=flow_edges,
        flow_values=flow_values,
        pushes=int(pushes),
        touched=touched,
        converged=(status == 1),
    )


def _reference_solve(graph: Graph, src_nodes, src_mass, problem) -> DualSolution:
    """Plain-Python mirror of the push loop with per-push objective checks."""
    n = graph.node_count
    sink = problem.sink
    eps = problem.epsilon
    delta_dense = np.zeros(n, dtype=np.float64)
    delta_dense[src_nodes] = src_mass
    x = np.zeros(n, dtype=np.float64)
    r = delta_dense - sink
    touched = set(int(v) for v in src_nodes)
    in_queue = np.zeros(n, dtype=bool)
    queue = deque()
    for v in src_nodes:
        if r[v] > eps:
            in_queue[v] = True
            queue.append(int(v))

    def objective():
        du = x[graph.edge_u] - x[graph.edge_v]
        return 0.5 * float(np.sum(graph.edge_w * du * du)) + float(
            np.dot(sink - delta_dense, x)
        )

    g_prev = objective()
    pushes = 0
    converged = True
    while queue:
        if pushes >= problem.max_pushes:
            converged = False
            break
        u = queue.popleft()
        in_queue[u] = False
        if r[u] <= eps:
            continue
        du = graph.weighted_degree[u]
        if du <= 0:
            raise DiffusionError("source mass exceeds capacity on a zero-degree node")
        step = r[u] / du
        x[u] += step
        r[u] = 0.0
        pushes += 1
        nbrs, wts, _ = graph.neighbors(u)
        for nb, w in zip(nbrs, wts):
            nb = int(nb)
            touched.add(nb)
            r[nb] += w * step
            if r[nb] > eps and not in_queue[nb]:
                in_queue[nb] = True
                queue.append(nb)
        g_now = objective()
        if g_now > g_prev + 1e-12 * (1.0 + abs(g_prev)):
            raise AssertionError(
                f"dual objective increased across a push: {g_prev!r} -> {g_now!r}"
            )
        g_prev = g_now
    touched_arr = np.array(sorted(touched), dtype=np.int64)
    active = touched_arr[x[touched_arr] > 0]
    flow_edges, flow_values = _flow_support(graph, x, active)
    return DualSolution(
        x=x,
        flow_edges=flow_edges,
        flow_values=flow_values,
        pushes=pushes,
        touched=touched_arr,
        converged=converged,
    )


def flow_from_dual(graph: Graph, x) -> np.ndarray:
    """Dense per-edge flow w(e) * (x(u) - x(v)) on canonical orientation."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != graph.node_count:
        raise ValueError("dual vector length does not match graph")
    return graph.edge_w * (x[graph.edge_u] - x[graph.edge_v])


def nonzero_flow_edge_count(solution: DualSolution, threshold: float = 0.0) -> int:
    """Number of edges whose flow magnitude exceeds the threshold.

    Untouched edges are exact zeros by construction, so the default
    threshold 0 counts precisely the edges that carry any flow.
    """
    return int(np.sum(np.abs(solution.flow_values) > threshold))


def dual_objective(graph: Graph, problem: DiffusionProblem, x) -> float:
    """Evaluate 1/2 x^T L x + (T - Delta)^T x for a candidate x."""
    x = np.asarray(x, dtype=np.float64).ravel()
    src_nodes, src_mass = _delta_arrays(problem.delta, graph.node_count)
    du = x[graph.edge_u] - x[graph.edge_v]
    quad = 0.5 * float(np.sum(graph.edge_w * du * du))
    lin = float(np.dot(problem.sink, x)) - float(np.dot(src_mass, x[src_nodes]))
    return quad + lin


def _active_set_qp(L, c, eps, budget):
    """Nonnegative QP min 1/2 x^T L x + c^T x by active-set pivoting.

    Restricted problems are solved with lstsq, which also covers the
    singular all-free case of a connected graph's full Laplacian.
    """
    n = L.shape[0]
    x = np.zeros(n, dtype=np.float64)
    free = np.zeros(n, dtype=bool)
    rounds = 0
    while True:
        rounds += 1
        if rounds > budget:
            raise DiffusionError("active-set oracle exceeded its iteration budget")
        r = -(L @ x + c)
        if r.max(initial=0.0) <= eps:
            return x, rounds
        cand = np.where(~free, r, -np.inf)
        i = int(np.argmax(cand))
        if cand[i] <= eps:
            # Violations only on free nodes: re-solving below repairs them.
            pass
        else:
            free[i] = True
        inner = 0
        while True:
            inner += 1
            if inner > n + 2:
                raise DiffusionError("active-set oracle stalled in its inner loop")
            P = np.flatnonzero(free)
            if P.size == 0:
                break
            z_p, *_ = np.linalg.lstsq(L[np.ix_(P, P)], -c[P], rcond=None)
            if np.all(z_p >= -1e-12):
                x = np.zeros(n, dtype=np.float64)
                x[P] = np.maximum(z_p, 0.0)
                break
            # Walk toward z until the first free variable hits zero, then
            # retire every variable pinned at the boundary.
            xp = x[P]
            neg = z_p < -1e-12
            alphas = xp[neg] / (xp[neg] - z_p[neg])
            a = float(np.clip(alphas.min(), 0.0, 1.0))
            xp_new = xp + a * (z_p - xp)
            x = np.zeros(n, dtype=np.float64)
            x[P] = np.maximum(xp_new, 0.0)
            drop = P[(neg) & (xp_new <= 1e-14)]
            if drop.size == 0:
                drop = P[neg][np.argmin(alphas)][None]
            free[drop] = False
            x[drop] = 0.0


def _pgd_qp(L, c, eps, dmax, max_iters):
    """Projected gradient descent with a slowly diminishing step."""
    n = L.shape[0]
    x = np.zeros(n, dtype=np.float64)
    base = 1.0 / (2.0 * dmax) if dmax > 0 else 1.0
    for k in range(max_iters):
        grad = L @ x + c
        r = -grad
        worst_free = np.abs(r[x > 0]).max(initial=0.0)
        if r.max(initial=0.0) <= eps and worst_free <= eps:
            return x, k
        step = base * (50000.0 / (50000.0 + k))
        x = np.maximum(0.0, x - step * grad)
    raise DiffusionError("projected-gradient oracle exceeded its iteration budget")


def qp_oracle_solve(
    graph: Graph,
    problem: DiffusionProblem,
    method: str = "active_set",
    max_iters: int | None = None,
) -> DualSolution:
    """Independent dense solver for the same dual, for cross-checking.

    Intended for small graphs (a few hundred nodes). method "active_set"
    pivots to the exact minimizer; "pgd" runs projected gradient descent
    with a diminishing step. Both stop on the same criterion as the push
    solver: every residual at most epsilon (and at most epsilon in
    magnitude on the support). Raises DiffusionError when the budget runs
    out instead of returning a bogus answer.
    """
    n = graph.node_count
    if problem.sink.shape[0] != n:
        raise ValueError("sink capacity vector length does not match graph")
    src_nodes, src_mass = _delta_arrays(problem.delta, n)
    if float(src_mass.sum()) > float(problem.sink.sum()) * (1 + _FEAS_SLACK) + _FEAS_SLACK:
        raise DiffusionError("total source mass exceeds total sink capacity")
    delta_dense = np.zeros(n, dtype=np.float64)
    delta_dense[src_nodes] = src_mass
    L = dense_laplacian(graph)
    c = problem.sink - delta_dense
    if method == "active_set":
        budget = max_iters if max_iters is not None else 30 * n + 100
        x, iters = _active_set_qp(L, c, problem.epsilon, budget)
    elif method == "pgd":
        budget = max_iters if max_iters is not None else 200_000
        dmax = float(graph.weighted_degree.max(initial=0.0))
        x, iters = _pgd_qp(L, c, problem.epsilon, dmax, budget)
    else:
        raise ValueError(f"unknown oracle method {method!r}")
    active = np.flatnonzero(x > 0)
    flow_edges, flow_values = _flow_support(graph, x, active)
    touched = np.unique(np.concatenate([active, src_nodes]))
    return DualSolution(
        x=x,
        flow_edges=flow_edges,
        flow_values=flow_values,
        pushes=int(iters),
        touched=touched,
        converged=True,
    )
