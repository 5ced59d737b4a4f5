"""Shared tiny-graph builders used across the test suite.

Builders construct graphs directly through Graph.from_edges so tests of
generators and loaders have an independent route to the same shapes.
"""

import itertools

import numpy as np

from flowbet.graphs import Graph


def build_graph(n, edges):
    """edges: iterable of (u, v) or (u, v, w) tuples."""
    us, vs, ws = [], [], []
    for e in edges:
        us.append(e[0])
        vs.append(e[1])
        ws.append(e[2] if len(e) > 2 else 1.0)
    return Graph.from_edges(n, us, vs, ws)


def k2():
    return build_graph(2, [(0, 1)])


def path_graph(k):
    return build_graph(k, [(i, i + 1) for i in range(k - 1)])


def triangle():
    return build_graph(3, [(0, 1), (0, 2), (1, 2)])


def clique(k):
    return build_graph(k, itertools.combinations(range(k), 2))


def star(leaves):
    """K_{1,leaves} with the hub at id 0."""
    return build_graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def two_triangles_bridge():
    """Triangles {0,1,2} and {3,4,5} joined by the single edge (2,3)."""
    return build_graph(
        6, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 5)]
    )


def ring_of_cliques(num, size):
    """num cliques of the given size, consecutive cliques joined by one edge."""
    edges = []
    for c in range(num):
        base = c * size
        edges.extend((base + a, base + b) for a, b in itertools.combinations(range(size), 2))
    for c in range(num):
        # clique c's node 1 links to clique (c+1)'s node 0
        edges.append((c * size + 1, ((c + 1) % num) * size))
    return build_graph(num * size, edges)


def random_connected_graph(rng, n, extra_edge_prob=0.3, weighted=False):
    """Random spanning tree plus independent extra edges; always connected."""
    edges = []
    for v in range(1, n):
        edges.append((int(rng.integers(0, v)), v))
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < extra_edge_prob:
                edges.append((u, v))
    us = [e[0] for e in edges]
    vs = [e[1] for e in edges]
    if weighted:
        ws = rng.uniform(0.2, 3.0, size=len(edges))
    else:
        ws = np.ones(len(edges))
    return Graph.from_edges(n, us, vs, ws)


def random_tree(rng, n, weighted=False):
    us = list(range(1, n))
    vs = [int(rng.integers(0, v)) for v in range(1, n)]
    ws = rng.uniform(0.2, 3.0, size=n - 1) if weighted else np.ones(n - 1)
    return Graph.from_edges(n, vs, us, ws)
