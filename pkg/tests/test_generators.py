import numpy as np
import pytest

from flowbet.generators import community_sizes, gen_bridged_clusters, gen_planted_partition
from flowbet.graphs import GraphFormatError


def cut_edge_count(graph, assignment):
    return int(np.sum(assignment[graph.edge_u] != assignment[graph.edge_v]))


def test_community_sizes_remainder_to_last():
    assert community_sizes(7, 3).tolist() == [2, 2, 3]
    assert community_sizes(6, 2).tolist() == [3, 3]


def test_pp_no_cut_edges_when_p_out_zero():
    g, assign = gen_planted_partition(30, 3, 0.5, 0.0, seed=1)
    assert cut_edge_count(g, assign) == 0
    g.validate()


def test_pp_two_k3_components():
    g, assign = gen_planted_partition(6, 2, 1.0, 0.0, seed=0)
    assert g.edge_count == 6
    assert assign.tolist() == [0, 0, 0, 1, 1, 1]
    assert np.all(g.weighted_degree == 2)


def test_pp_deterministic_given_seed():
    g1, a1 = gen_planted_partition(80, 4, 0.2, 0.02, seed=42)
    g2, a2 = gen_planted_partition(80, 4, 0.2, 0.02, seed=42)
    assert np.array_equal(g1.edge_u, g2.edge_u)
    assert np.array_equal(g1.edge_v, g2.edge_v)
    assert np.array_equal(a1, a2)
    g3, _ = gen_planted_partition(80, 4, 0.2, 0.02, seed=43)
    assert not (
        g3.edge_count == g1.edge_count and np.array_equal(g3.edge_u, g1.edge_u)
    )


def test_pp_cut_edge_count_within_three_sigma():
    n, k, p_in, p_out = 200, 10, 0.3, 0.005
    g, assign = gen_planted_partition(n, k, p_in, p_out, seed=7)
    sizes = community_sizes(n, k)
    intra_pairs = int(np.sum(sizes * (sizes - 1) // 2))
    inter_pairs = n * (n - 1) // 2 - intra_pairs
    mean = p_out * inter_pairs
    sigma = np.sqrt(inter_pairs * p_out * (1 - p_out))
    assert abs(cut_edge_count(g, assign) - mean) <= 3 * sigma


def test_pp_intra_edge_count_within_three_sigma():
    n, k, p_in, p_out = 200, 10, 0.3, 0.005
    g, assign = gen_planted_partition(n, k, p_in, p_out, seed=11)
    sizes = community_sizes(n, k)
    intra_pairs = int(np.sum(sizes * (sizes - 1) // 2))
    intra = g.edge_count - cut_edge_count(g, assign)
    mean = p_in * intra_pairs
    sigma = np.sqrt(intra_pairs * p_in * (1 - p_in))
    assert abs(intra - mean) <= 3 * sigma


def test_pp_parameter_validation():
    with pytest.raises(GraphFormatError):
        gen_planted_partition(5, 6, 0.5, 0.0, seed=0)
    with pytest.raises(GraphFormatError):
        gen_planted_partition(10, 2, 0.2, 0.5, seed=0)  # p_out >= p_in
    with pytest.raises(GraphFormatError):
        gen_planted_partition(10, 2, 1.2, 0.0, seed=0)


def test_bridged_two_k4_single_bridge_edge_count():
    g = gen_bridged_clusters([4, 4], [(0, 0, 1, 0, 1)])
    assert g.node_count == 8
    assert g.edge_count == 13  # 2 * 6 clique edges + 1 bridge
    g.validate()


def test_bridged_two_k4_three_bridges_lengths_1_2_2():
    g = gen_bridged_clusters(
        [4, 4],
        [(0, 0, 1, 0, 1), (0, 1, 1, 1, 2), (0, 2, 1, 2, 2)],
    )
    assert g.node_count == 10  # 8 clique nodes + 2 intermediates
    assert g.edge_count == 12 + 1 + 2 + 2
    # bridge edges: endpoints in different clusters or touching an intermediate
    cluster = np.full(10, -1)
    cluster[:4] = 0
    cluster[4:8] = 1
    bridge = (cluster[g.edge_u] != cluster[g.edge_v]) | (cluster[g.edge_u] < 0)
    assert int(bridge.sum()) == 5


def test_bridged_single_cluster_no_bridges():
    g = gen_bridged_clusters([("clique", 5)], [])
    assert g.node_count == 5
    assert g.edge_count == 10


def test_bridged_grid_cluster():
    g = gen_bridged_clusters([("grid", 2, 3)], [])
    assert g.node_count == 6
    assert g.edge_count == 7  # 4 horizontal + 3 vertical
    assert g.weighted_degree.tolist() == [2, 3, 2, 2, 3, 2]


def test_bridged_invalid_endpoints():
    with pytest.raises(GraphFormatError):
        gen_bridged_clusters([4, 4], [(0, 0, 2, 0, 1)])
    with pytest.raises(GraphFormatError):
        gen_bridged_clusters([4, 4], [(0, 9, 1, 0, 1)])
    with pytest.raises(GraphFormatError):
        gen_bridged_clusters([4, 4], [(0, 0, 1, 0, 0)])


def test_bridged_deterministic():
    spec = ([4, ("grid", 2, 2)], [(0, 0, 1, 0, 3)])
    g1 = gen_bridged_clusters(*spec)
    g2 = gen_bridged_clusters(*spec)
    assert np.array_equal(g1.edge_u, g2.edge_u)
    assert np.array_equal(g1.edge_v, g2.edge_v)
