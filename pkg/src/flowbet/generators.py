"""Synthetic graph generators: planted partitions and bridged clusters.

Both are fully deterministic given their inputs; the planted partition
draws every node pair independently from a seeded PCG64 stream in a fixed
block order, so edge counts follow exact binomial laws.
"""

from __future__ import annotations

import itertools

import numpy as np

from .graphs import Graph, GraphFormatError

__all__ = ["gen_planted_partition", "gen_bridged_clusters", "community_sizes"]


def community_sizes(n: int, k_communities: int) -> np.ndarray:
    """Contiguous community sizes: n // k per community, remainder to the last."""
    base = n // k_communities
    sizes = np.full(k_communities, base, dtype=np.int64)
    sizes[-1] += n - base * k_communities
    return sizes


def gen_planted_partition(n, k_communities, p_in, p_out, seed):
    """Planted-partition random graph.

    Nodes are split into k_communities contiguous blocks (the last takes
    any remainder). Each intra-community pair is joined independently with
    probability p_in, each inter-community pair with p_out.

    Returns (graph, assignment) where assignment[v] is the community of
    node v, so cut edges are identifiable as those whose endpoints differ.
    """
    n = int(n)
    k = int(k_communities)
    if k < 1 or k > n:
        raise GraphFormatError("need 1 <= k_communities <= n")
    if not (0 <= p_out < p_in <= 1):
        raise GraphFormatError("need 0 <= p_out < p_in <= 1")
    sizes = community_sizes(n, k)
    starts = np.zeros(k, dtype=np.int64)
    starts[1:] = np.cumsum(sizes)[:-1]
    assignment = np.repeat(np.arange(k, dtype=np.int64), sizes)

    rng = np.random.default_rng(seed)
    us, vs = [], []
    # Fixed block order: intra blocks by community, then inter blocks by
    # (c1, c2) lexicographic. Each pair consumes exactly one uniform, so a
    # seed pins the whole edge list.
    for c in range(k):
        s, sz = starts[c], sizes[c]
        if sz < 2:
            continue
        iu, iv = np.triu_indices(sz, k=1)
        hit = rng.random(iu.shape[0]) < p_in
        us.append(s + iu[hit])
        vs.append(s + iv[hit])
    if p_out > 0:
        for c1, c2 in itertools.combinations(range(k), 2):
            s1, sz1 = starts[c1], sizes[c1]
            s2, sz2 = starts[c2], sizes[c2]
            hit = rng.random(sz1 * sz2) < p_out
            idx = np.flatnonzero(hit)
            us.append(s1 + idx // sz2)
            vs.append(s2 + idx % sz2)
    if us:
        u = np.concatenate(us)
        v = np.concatenate(vs)
    else:
        u = v = np.empty(0, dtype=np.int64)
    return Graph.from_edges(n, u, v), assignment


def _cluster_edges(kind_spec, base):
    """Edges of one cluster block starting at node id base; returns (edges, size)."""
    if isinstance(kind_spec, int):
        kind_spec = ("clique", kind_spec)
    kind = kind_spec[0]
    if kind == "clique":
        k = int(kind_spec[1])
        if k < 1:
            raise GraphFormatError("clique size must be >= 1")
        edges = [(base + a, base + b) for a, b in itertools.combinations(range(k), 2)]
        return edges, k
    if kind == "grid":
        rows, cols = int(kind_spec[1]), int(kind_spec[2])
        if rows < 1 or cols < 1:
            raise GraphFormatError("grid dimensions must be >= 1")
        edges = []
        for r in range(rows):
            for c in range(cols):
                a = base + r * cols + c
                if c + 1 < cols:
                    edges.append((a, a + 1))
                if r + 1 < rows:
                    edges.append((a, a + cols))
        return edges, rows * cols
    raise GraphFormatError(f"unknown cluster kind {kind!r}")


def gen_bridged_clusters(cluster_spec, bridge_paths):
    """Dense clusters joined by explicit bridge paths.

    cluster_spec: list of cluster descriptions; an int k means a k-clique,
    ("clique", k) likewise, ("grid", rows, cols) a 4-neighbor lattice.
    Cluster nodes occupy contiguous id blocks in spec order.

    bridge_paths: list of (cluster_a, member_a, cluster_b, member_b,
    length) tuples; length is the edge count of the path, so length 1 is a
    direct edge and length L inserts L - 1 fresh intermediate nodes. The
    intermediates are appended after all cluster blocks, path by path, so
    bridge edges are identifiable from the node layout alone: an edge is a
    bridge edge iff its endpoints lie in different clusters or either one
    is an intermediate.
    """
    if not cluster_spec:
        raise GraphFormatError("need at least one cluster")
    edges = []
    bases = []
    base = 0
    sizes = []
    for spec in cluster_spec:
        bases.append(base)
        cl_edges, size = _cluster_edges(spec, base)
        edges.extend(cl_edges)
        sizes.append(size)
        base += size
    next_fresh = base
    for path in bridge_paths:
        ca, ma, cb, mb, length = path
        for c, mm in ((ca, ma), (cb, mb)):
            if not 0 <= c < len(sizes):
                raise GraphFormatError(f"bridge names unknown cluster {c}")
            if not 0 <= mm < sizes[c]:
                raise GraphFormatError(f"bridge names unknown member {mm} of cluster {c}")
        length = int(length)
        if length < 1:
            raise GraphFormatError("bridge length must be >= 1")
        a = bases[ca] + ma
        b = bases[cb] + mb
        if a == b:
            raise GraphFormatError("bridge endpoints coincide")
        prev = a
        for _ in range(length - 1):
            edges.append((prev, next_fresh))
            prev = next_fresh
            next_fresh += 1
        edges.append((prev, b))
    u = [e[0] for e in edges]
    v = [e[1] for e in edges]
    return Graph.from_edges(next_fresh, u, v)
