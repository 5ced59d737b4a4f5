"""Undirected weighted graph core: representation, ingestion, mutation.

Every edge is stored exactly once in canonical orientation u < v, with the
edge arrays sorted lexicographically by (u, v). A CSR adjacency mirrors the
edge list with neighbor lists ascending by node id; deterministic scan
orders elsewhere in the package all derive from this layout.
"""

from __future__ import annotations

import os
import warnings
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "Graph",
    "GraphFormatError",
    "as_node_set",
    "load_edge_list",
    "load_node_attributes",
    "save_edge_list",
    "largest_connected_component",
    "reweigh_edges",
    "disconnect_nodes",
]


class GraphFormatError(ValueError):
    """Malformed graph input, or an operation that would corrupt a graph."""


@dataclass(eq=False, repr=False)
class Graph:
    """Immutable undirected weighted graph.

    Attributes
    ----------
    node_count : int
        Number of nodes; ids are dense in [0, node_count).
    edge_u, edge_v : int64 arrays, shape (m,)
        Endpoints with edge_u[i] < edge_v[i], sorted lexicographically by
        (u, v). The position in these arrays is the edge id.
    edge_w : float64 array, shape (m,)
        Strictly positive weights.
    indptr : int64 array, shape (n + 1,)
        CSR row pointer into the adjacency arrays.
    adj_nodes, adj_weights, adj_edges : arrays, shape (2m,)
        Neighbor id, edge weight, and edge id per adjacency slot; each
        node's slice is ascending by neighbor id.
    weighted_degree : float64 array, shape (n,)
        Sum of incident edge weights per node.
    labels : list[str] or None
        Original external labels in id order, when the graph came from a
        labeled edge list.
    populations : float64 array or None
        Optional per-node positive population sizes.

    Instances are treated as immutable after construction; mutating
    operations return new graphs.
    """

    node_count: int
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray
    indptr: np.ndarray
    adj_nodes: np.ndarray
    adj_weights: np.ndarray
    adj_edges: np.ndarray
    weighted_degree: np.ndarray
    labels: list | None = None
    populations: np.ndarray | None = None

    def __repr__(self):
        return f"Graph(node_count={self.node_count}, edge_count={self.edge_count})"

    @property
    def edge_count(self) -> int:
        return int(self.edge_u.shape[0])

    @property
    def volume(self) -> float:
        """Sum of all weighted degrees (twice the total edge weight)."""
        return float(self.weighted_degree.sum())

    def neighbors(self, v: int):
        """Return (neighbor ids, edge weights, edge ids) for node v."""
        lo, hi = self.indptr[v], self.indptr[v + 1]
        return self.adj_nodes[lo:hi], self.adj_weights[lo:hi], self.adj_edges[lo:hi]

    @classmethod
    def from_edges(cls, node_count, u, v, w=None, labels=None, populations=None):
        """Build a graph from endpoint arrays.

        Edges are canonicalized to u < v, duplicates are merged by summing
        weights, and zero-weight edges are dropped. Self-loops are a caller
        bug here and raise; the text loader filters them first.
        """
        n = int(node_count)
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        if w is None:
            w = np.ones(u.shape[0], dtype=np.float64)
        w = np.asarray(w, dtype=np.float64).ravel()
        if not (u.shape == v.shape == w.shape):
            raise GraphFormatError("edge arrays must have matching lengths")
        if u.size and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n):
            raise GraphFormatError("edge endpoint out of range")
        if np.any(u == v):
            raise GraphFormatError("self-loops are not allowed")
        if not np.all(np.isfinite(w)):
            raise GraphFormatError("edge weights must be finite")
        if np.any(w < 0):
            raise GraphFormatError("edge weights must be positive")

        uu = np.minimum(u, v)
        vv = np.maximum(u, v)
        # u-major integer key: unique() then sorts lexicographically by (u, v).
        key = uu * np.int64(max(n, 1)) + vv
        uniq, inverse = np.unique(key, return_inverse=True)
        mw = np.bincount(inverse, weights=w, minlength=uniq.shape[0])
        mu = uniq // max(n, 1)
        mv = uniq % max(n, 1)
        nz = mw > 0
        return cls._assemble(n, mu[nz], mv[nz], mw[nz], labels, populations)

    @classmethod
    def _assemble(cls, n, u, v, w, labels=None, populations=None):
        """Build CSR arrays for already-canonical sorted unique edges."""
        m = u.shape[0]
        eid = np.arange(m, dtype=np.int64)
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        eids = np.concatenate([eid, eid])
        order = np.lexsort((dst, src))
        adj_nodes = dst[order]
        adj_edges = eids[order]
        adj_weights = w[adj_edges]
        indptr = np.zeros(n + 1, dtype=np.int64)
        if m:
            indptr[1:] = np.cumsum(np.bincount(src, minlength=n))
        # add.at, not reduceat: reduceat mishandles empty rows.
        wd = np.zeros(n, dtype=np.float64)
        np.add.at(wd, u, w)
        np.add.at(wd, v, w)
        return cls(
            node_count=n,
            edge_u=np.ascontiguousarray(u, dtype=np.int64),
            edge_v=np.ascontiguousarray(v, dtype=np.int64),
            edge_w=np.ascontiguousarray(w, dtype=np.float64),
            indptr=indptr,
            adj_nodes=adj_nodes,
            adj_weights=adj_weights,
            adj_edges=adj_edges,
            weighted_degree=wd,
            labels=list(labels) if labels is not None else None,
            populations=populations,
        )

    def validate(self):
        """Recheck structural invariants in O(|E|); raise on violation."""
        n, m = self.node_count, self.edge_count
        if not (self.edge_v.shape[0] == self.edge_w.shape[0] == m):
            raise GraphFormatError("edge array length mismatch")
        if m and not np.all(self.edge_u < self.edge_v):
            raise GraphFormatError("edge orientation violated (need u < v)")
        if m:
            key = self.edge_u * np.int64(n) + self.edge_v
            if not np.all(np.diff(key) > 0):
                raise GraphFormatError("edges not in strict lexicographic order")
        if m and not (np.all(self.edge_w > 0) and np.all(np.isfinite(self.edge_w))):
            raise GraphFormatError("nonpositive or nonfinite edge weight")
        if self.indptr.shape[0] != n + 1 or self.indptr[0] != 0 or self.indptr[-1] != 2 * m:
            raise GraphFormatError("bad CSR row pointer")
        if np.any(np.diff(self.indptr) < 0):
            raise GraphFormatError("bad CSR row pointer")
        if m:
            row = np.repeat(np.arange(n, dtype=np.int64), np.diff(self.indptr))
            e = self.adj_edges
            incident = ((self.edge_u[e] == row) & (self.edge_v[e] == self.adj_nodes)) | (
                (self.edge_v[e] == row) & (self.edge_u[e] == self.adj_nodes)
            )
            if not np.all(incident):
                raise GraphFormatError("adjacency inconsistent with edge list")
            if not np.array_equal(self.adj_weights, self.edge_w[e]):
                raise GraphFormatError("adjacency weights inconsistent with edge list")
            starts = self.indptr[:-1]
            order_ok = np.ones(2 * m, dtype=bool)
            order_ok[1:] = np.diff(self.adj_nodes) > 0
            order_ok[starts[starts < 2 * m]] = True
            if not np.all(order_ok):
                raise GraphFormatError("neighbor lists not ascending")
        wd = np.zeros(n, dtype=np.float64)
        np.add.at(wd, self.edge_u, self.edge_w)
        np.add.at(wd, self.edge_v, self.edge_w)
        if not np.allclose(self.weighted_degree, wd, rtol=1e-12, atol=0):
            raise GraphFormatError("weighted_degree inconsistent with edges")
        if not np.isclose(self.volume, 2.0 * self.edge_w.sum(), rtol=1e-12, atol=0):
            raise GraphFormatError("volume inconsistent with total edge weight")
        if self.labels is not None and len(self.labels) != n:
            raise GraphFormatError("label list length mismatch")
        if self.populations is not None:
            p = self.populations
            if p.shape[0] != n or not np.all((p > 0) & np.isfinite(p)):
                raise GraphFormatError("populations must be positive per-node values")


def as_node_set(nodes, node_count) -> np.ndarray:
    """Canonicalize a node collection to a sorted unique int64 id array."""
    arr = np.unique(np.asarray(nodes, dtype=np.int64).ravel())
    if arr.size and (arr[0] < 0 or arr[-1] >= node_count):
        raise GraphFormatError("node id out of range")
    return arr


def _iter_lines(source):
    """Yield lines from a path or an open text stream."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


def load_edge_list(source, weighted=True, comment_prefix="#") -> Graph:
    """Parse a whitespace-separated edge list into a Graph.

    Lines are "u v" or "u v w" with arbitrary string labels; labels are
    remapped to dense ids in first-seen order. Duplicate edges merge by
    summing weights, and self-loops are dropped with one counted warning.
    With weighted=False any weight column is ignored and all edges get
    unit weight.

    Raises GraphFormatError with the offending line number for malformed
    lines and for weights <= 0.
    """
    label_ids: dict = {}
    us, vs, ws = [], [], []
    self_loops = 0
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith(comment_prefix):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(
                f"line {lineno}: expected 'u v' or 'u v w', got {len(parts)} fields"
            )
        if len(parts) == 3 and weighted:
            try:
                w = float(parts[2])
            except ValueError:
                raise GraphFormatError(
                    f"line {lineno}: unparseable weight {parts[2]!r}"
                ) from None
            if not (w > 0) or not np.isfinite(w):
                raise GraphFormatError(f"line {lineno}: weight must be positive, got {w!r}")
        else:
            w = 1.0
        ids = []
        for lab in parts[:2]:
            if lab not in label_ids:
                label_ids[lab] = len(label_ids)
            ids.append(label_ids[lab])
        if ids[0] == ids[1]:
            self_loops += 1
            continue
        us.append(ids[0])
        vs.append(ids[1])
        ws.append(w)
    if self_loops:
        warnings.warn(f"dropped {self_loops} self-loop(s)", stacklevel=2)
    labels = list(label_ids)
    return Graph.from_edges(len(labels), us, vs, ws, labels=labels)


def load_node_attributes(source, graph: Graph) -> Graph:
    """Attach per-node populations from "label value" lines.

    Nodes absent from the file default to 1. Unknown labels and values
    <= 0 are errors. Returns a new Graph; the input is untouched.
    """
    if graph.labels is not None:
        lookup = {lab: i for i, lab in enumerate(graph.labels)}
    else:
        lookup = {str(i): i for i in range(graph.node_count)}
    pops = np.ones(graph.node_count, dtype=np.float64)
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"line {lineno}: expected 'label value'")
        lab, val = parts
        if lab not in lookup:
            raise GraphFormatError(f"line {lineno}: unknown node label {lab!r}")
        try:
            x = float(val)
        except ValueError:
            raise GraphFormatError(f"line {lineno}: unparseable value {val!r}") from None
        if not (x > 0) or not np.isfinite(x):
            raise GraphFormatError(f"line {lineno}: value must be positive, got {val!r}")
        pops[lookup[lab]] = x
    return replace(graph, populations=pops)


def save_edge_list(graph: Graph, target) -> None:
    """Write "u v w" lines (labels when present, 12 significant digits)."""
    def emit(fh):
        if graph.labels is not None:
            name = graph.labels.__getitem__
        else:
            name = str
        for u, v, w in zip(graph.edge_u, graph.edge_v, graph.edge_w):
            fh.write(f"{name(int(u))} {name(int(v))} {w:.12g}\n")

    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="utf-8") as fh:
            emit(fh)
    else:
        emit(target)


def largest_connected_component(graph: Graph):
    """Induced subgraph on the largest component, plus the id mapping.

    Returns (subgraph, new_to_old) where new_to_old[i] is the original id
    of new node i. Size ties break toward the component containing the
    smallest original id.
    """
    n = graph.node_count
    if n == 0:
        raise GraphFormatError("empty graph has no components")
    comp = np.full(n, -1, dtype=np.int64)
    ncomp = 0
    for start in range(n):
        if comp[start] >= 0:
            continue
        # start is the smallest id in its component, so component labels
        # ascend with their minimum original id.
        comp[start] = ncomp
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for nb in graph.adj_nodes[graph.indptr[x] : graph.indptr[x + 1]]:
                if comp[nb] < 0:
                    comp[nb] = ncomp
                    queue.append(nb)
        ncomp += 1
    sizes = np.bincount(comp, minlength=ncomp)
    best = int(np.flatnonzero(sizes == sizes.max())[0])
    new_to_old = np.flatnonzero(comp == best).astype(np.int64)
    old_to_new = np.full(n, -1, dtype=np.int64)
    old_to_new[new_to_old] = np.arange(new_to_old.shape[0], dtype=np.int64)
    mask = (comp[graph.edge_u] == best) & (comp[graph.edge_v] == best)
    labels = [graph.labels[i] for i in new_to_old] if graph.labels is not None else None
    pops = graph.populations[new_to_old] if graph.populations is not None else None
    sub = Graph._assemble(
        int(new_to_old.shape[0]),
        old_to_new[graph.edge_u[mask]],
        old_to_new[graph.edge_v[mask]],
        graph.edge_w[mask].copy(),
        labels=labels,
        populations=pops,
    )
    return sub, new_to_old


def reweigh_edges(graph: Graph, factors) -> Graph:
    """Multiply chosen edge weights; other edges stay bit-identical.

    factors maps edge id -> positive multiplier. Degrees and the volume
    are recomputed on the returned graph.
    """
    new_w = graph.edge_w.copy()
    for eid, mult in factors.items():
        e = int(eid)
        if not 0 <= e < graph.edge_count:
            raise GraphFormatError(f"unknown edge id {eid}")
        f = float(mult)
        if not (f > 0) or not np.isfinite(f):
            raise GraphFormatError(f"multiplier for edge {eid} must be positive")
        new_w[e] *= f
    return Graph._assemble(
        graph.node_count,
        graph.edge_u,
        graph.edge_v,
        new_w,
        labels=graph.labels,
        populations=graph.populations,
    )


def disconnect_nodes(graph: Graph, nodes) -> Graph:
    """Remove all edges touching the given nodes; nodes stay at degree 0."""
    sel = as_node_set(nodes, graph.node_count)
    drop = np.zeros(graph.node_count, dtype=bool)
    drop[sel] = True
    mask = ~(drop[graph.edge_u] | drop[graph.edge_v])
    return Graph._assemble(
        graph.node_count,
        graph.edge_u[mask],
        graph.edge_v[mask],
        graph.edge_w[mask].copy(),
        labels=graph.labels,
        populations=graph.populations,
    )
