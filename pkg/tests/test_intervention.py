"""Tests for intervention planning, application, and evaluation.

Hand-checked anchors used below:

- two_triangles_bridge edge order: (0,1) (0,2) (1,2) (2,3) (3,4) (3,5)
  (4,5); the only cut edge under labels [0,0,0,1,1,1] is id 3.
- K5 budget check at coverage 0.5, retain 0.1: edge targeting scales 5 of
  10 unit edges by 0.1 (weight removed 5 * 0.9 = 4.5); the uniform mode
  scales all 10 edges by 1 - 0.9 * 0.5 = 0.55 (removed 10 * 0.45 = 4.5).
- Planted partition n=2000, 100 communities, p_in=0.3, p_out=0.0006,
  seed=606: 6828 edges, 1152 between communities (16.9 percent), the
  sparse-mixing regime where local-flow targeting concentrates on the
  community boundary.
"""

import numpy as np
import pytest

from conftest import clique, star, two_triangles_bridge
from flowbet.centrality import (
    EdgeScores,
    NodeScores,
    cf_betweenness,
    lf_betweenness,
    sp_betweenness,
)
from flowbet.epidemic import InitialCondition
from flowbet.generators import gen_bridged_clusters, gen_planted_partition
from flowbet.intervention import (
    InterventionPlan,
    InterventionReport,
    apply_edge_intervention,
    apply_plan,
    apply_uniform_intervention,
    cut_edge_recall,
    immunize_top_nodes,
    out_link_coverage,
    run_intervention_experiment,
    score_fingerprint,
    select_top_edges,
)


def test_select_top_edges_extremes():
    scores = np.arange(7, dtype=float)
    assert select_top_edges(scores, 0.0).size == 0
    assert np.array_equal(select_top_edges(scores, 1.0), np.arange(7))


def test_select_top_edges_floor_and_order():
    scores = np.array([5.0, 1.0, 9.0, 3.0, 7.0, 0.5, 2.0, 4.0, 6.0, 8.0])
    # floor(0.25 * 10) = 2 edges: the two highest scores, ids sorted.
    assert np.array_equal(select_top_edges(scores, 0.25), [2, 9])
    assert np.array_equal(select_top_edges(scores, 0.39), [2, 4, 9])


def test_select_top_edges_ties_break_to_lower_id():
    scores = np.array([1.0, 1.0, 1.0, 1.0])
    assert np.array_equal(select_top_edges(scores, 0.5), [0, 1])
    # A higher score wins regardless of id; the tie then fills from low ids.
    scores = np.array([1.0, 1.0, 2.0, 1.0])
    assert np.array_equal(select_top_edges(scores, 0.5), [0, 2])


def test_select_top_edges_accepts_score_objects():
    g = two_triangles_bridge()
    scores = cf_betweenness(g)
    direct = select_top_edges(scores.scores, 0.2)
    assert np.array_equal(select_top_edges(scores, 0.2), direct)


def test_select_top_edges_rejects_bad_coverage():
    with pytest.raises(ValueError):
        select_top_edges(np.ones(4), 1.2)
    with pytest.raises(ValueError):
        select_top_edges(np.ones(4), -0.1)


def test_edge_intervention_scales_selected_weights_only():
    g = two_triangles_bridge()
    out = apply_edge_intervention(g, [3], retain=0.1)
    assert out.edge_w[3] == pytest.approx(0.1, abs=1e-15)
    untouched = np.delete(np.arange(7), 3)
    assert np.array_equal(out.edge_w[untouched], g.edge_w[untouched])
    # The original graph is never modified in place.
    assert np.array_equal(g.edge_w, np.ones(7))


def test_edge_intervention_retain_one_is_identity():
    g = two_triangles_bridge()
    out = apply_edge_intervention(g, [0, 3, 6], retain=1.0)
    assert np.array_equal(out.edge_w, g.edge_w)


def test_edge_intervention_validation():
    g = two_triangles_bridge()
    with pytest.raises(ValueError):
        apply_edge_intervention(g, [0], retain=0.0)
    with pytest.raises(ValueError):
        apply_edge_intervention(g, [0], retain=1.5)
    with pytest.raises(ValueError):
        apply_edge_intervention(g, [99])


def test_uniform_intervention_factor():
    g = two_triangles_bridge()
    out = apply_uniform_intervention(g, 0.25)
    assert np.allclose(out.edge_w, 0.775, atol=1e-15)
    assert np.array_equal(apply_uniform_intervention(g, 0.0).edge_w, g.edge_w)


def test_uniform_intervention_rejects_vanishing_weights():
    g = two_triangles_bridge()
    with pytest.raises(ValueError):
        apply_uniform_intervention(g, 1.0, strength=1.0)


def test_uniform_total_reduction_matches_edge_budget():
    g = clique(5)
    targeted = apply_edge_intervention(g, select_top_edges(np.arange(10.0), 0.5))
    uniform = apply_uniform_intervention(g, 0.5)
    removed_t = g.edge_w.sum() - targeted.edge_w.sum()
    removed_u = g.edge_w.sum() - uniform.edge_w.sum()
    assert removed_t == pytest.approx(4.5, abs=1e-12)
    assert removed_u == pytest.approx(removed_t, abs=1e-12)


def test_immunize_disconnects_hub():
    g = star(4)
    scores = NodeScores(method="degree", scores=g.weighted_degree)
    out = immunize_top_nodes(g, scores, 0.2)
    assert out.edge_count == 0
    assert out.node_count == g.node_count
    assert immunize_top_nodes(g, scores, 0.0).edge_count == g.edge_count


def test_immunize_validates_score_length():
    g = star(4)
    with pytest.raises(ValueError):
        immunize_top_nodes(g, np.ones(3), 0.5)


def test_plan_validation():
    with pytest.raises(ValueError):
        InterventionPlan(method="x", coverage=0.1, mode="other")
    with pytest.raises(ValueError):
        InterventionPlan(method="x", coverage=1.5, mode="uniform")
    with pytest.raises(ValueError):
        InterventionPlan(method="x", coverage=0.1, mode="uniform", retain=0.0)
    with pytest.raises(ValueError):
        InterventionPlan(method="x", coverage=0.1, mode="edge-targeted")
    with pytest.raises(ValueError):
        InterventionPlan(method="x", coverage=0.1, mode="edge-targeted", edges=(0,), nodes=(1,))
    with pytest.raises(ValueError):
        InterventionPlan(method="x", coverage=0.1, mode="uniform", edges=(0,))
    with pytest.raises(ValueError):
        InterventionPlan(method="x", coverage=0.1, mode="node-immunize")


def test_apply_plan_dispatch():
    g = two_triangles_bridge()
    edge_plan = InterventionPlan(
        method="m", coverage=0.1, mode="edge-targeted", retain=0.2, edges=(3,)
    )
    assert np.array_equal(
        apply_plan(g, edge_plan).edge_w, apply_edge_intervention(g, [3], 0.2).edge_w
    )
    uni_plan = InterventionPlan(method="m", coverage=0.5, mode="uniform", retain=0.1)
    assert np.array_equal(
        apply_plan(g, uni_plan).edge_w, apply_uniform_intervention(g, 0.5, 0.9).edge_w
    )
    node_plan = InterventionPlan(method="m", coverage=0.2, mode="node-immunize", nodes=(2,))
    out = apply_plan(g, node_plan)
    assert out.edge_count == 4
    assert 2 not in np.concatenate([out.edge_u, out.edge_v])


def test_fingerprint_identifies_scores():
    g = two_triangles_bridge()
    a = cf_betweenness(g)
    b = sp_betweenness(g)
    fa, fb = score_fingerprint(a), score_fingerprint(b)
    assert len(fa) == 16 and fa != fb
    assert score_fingerprint(a) == fa
    # same values under a different method tag hash differently
    renamed = EdgeScores(method="other", scores=a.scores.copy())
    assert score_fingerprint(renamed) != fa


def test_cut_edge_recall_bridge_fixture():
    g = two_triangles_bridge()
    labels = np.array([0, 0, 0, 1, 1, 1])
    assert cut_edge_recall(labels, [3], g) == 1.0
    assert cut_edge_recall(labels, np.arange(7), g) == 1.0
    assert cut_edge_recall(labels, [], g) == 0.0
    assert cut_edge_recall(labels, [0, 1, 2], g) == 0.0


def test_cut_edge_recall_errors():
    g = two_triangles_bridge()
    with pytest.raises(ValueError):
        cut_edge_recall(np.zeros(6), [3], g)
    with pytest.raises(ValueError):
        cut_edge_recall(np.zeros(5), [3], g)
    with pytest.raises(ValueError):
        cut_edge_recall(np.array([0, 0, 0, 1, 1, 1]), [99], g)


def test_out_link_coverage_bridge():
    g = gen_bridged_clusters([4, 4], [(0, 0, 1, 0, 1)])
    bridge = int(np.flatnonzero((g.edge_u < 4) != (g.edge_v < 4))[0])
    assert out_link_coverage([0, 1, 2, 3], [bridge], g) == 1.0
    assert out_link_coverage([0, 1, 2, 3], [], g) == 0.0


def test_out_link_coverage_errors():
    g = gen_bridged_clusters([4, 4], [(0, 0, 1, 0, 1)])
    with pytest.raises(ValueError):
        out_link_coverage(np.arange(8), [0], g)
    with pytest.raises(ValueError):
        out_link_coverage([0, 99], [0], g)


def experiment_fixture():
    g = two_triangles_bridge()
    init = InitialCondition(mode="explicit", nodes=(0,))
    scores = cf_betweenness(g)
    return g, init, scores


def test_experiment_zero_coverage_matches_baseline():
    g, init, scores = experiment_fixture()
    report = run_intervention_experiment(
        g, {"cf": scores}, [0.0, 0.5], init, beta=0.6, trials=8, seed=21
    )
    base = report.baseline
    zero = report.cell("cf", 0.0)
    assert zero.final_size == base.final_size
    assert zero.peak_prevalence == base.peak_prevalence
    assert zero.peak_time == base.peak_time
    assert report.cell("cf", 0.5).final_size <= base.final_size


def test_experiment_beta_zero_finals_equal_seed_fraction():
    g, init, scores = experiment_fixture()
    report = run_intervention_experiment(
        g, {"cf": scores, "flat": "uniform"}, [0.25], init, beta=0.0, trials=4, seed=3
    )
    for row in report.rows:
        assert row.error is None
        assert row.final_size == pytest.approx(1 / 6, abs=1e-12)


def test_experiment_reports_failed_cells():
    g, init, scores = experiment_fixture()
    report = run_intervention_experiment(
        g, {"ok": scores, "broken": "nonsense"}, [0.5], init, beta=0.6, trials=4, seed=9
    )
    good = report.cell("ok", 0.5)
    bad = report.cell("broken", 0.5)
    assert good.error is None and np.isfinite(good.final_size)
    assert bad.error is not None and "broken" in bad.error
    assert np.isnan(bad.final_size)


def test_experiment_records_config_and_fingerprints():
    g, init, scores = experiment_fixture()
    report = run_intervention_experiment(
        g, {"cf": scores, "flat": "uniform"}, [0.5], init, beta=0.6, trials=4, seed=9
    )
    cfg = report.config
    assert cfg["model"] == "agent" and cfg["trials"] == 4 and cfg["seed"] == 9
    prints = cfg["score_fingerprints"]
    assert prints["cf"] == score_fingerprint(scores)
    assert prints["flat"] is None


def test_experiment_thread_invariance():
    g, init, scores = experiment_fixture()
    kwargs = dict(init=init, beta=0.6, trials=8, seed=21)
    serial = run_intervention_experiment(g, {"cf": scores}, [0.25, 0.5], **kwargs)
    parallel = run_intervention_experiment(
        g, {"cf": scores}, [0.25, 0.5], threads=4, **kwargs
    )
    for row_s, row_p in zip(serial.rows, parallel.rows):
        assert (row_s.method, row_s.coverage) == (row_p.method, row_p.coverage)
        assert row_s.final_size == row_p.final_size
        assert np.array_equal(row_s.curve.i, row_p.curve.i)


def test_experiment_ode_model():
    g, init, scores = experiment_fixture()
    report = run_intervention_experiment(
        g, {"cf": scores}, [0.5], init, beta=0.6, model="ode", horizon=80.0
    )
    assert report.config["dt"] == 0.05 and "trials" not in report.config
    assert report.cell("cf", 0.5).final_size < report.baseline.final_size
    for row in report.rows:
        row.curve.validate()


def test_experiment_rejects_bad_inputs():
    g, init, scores = experiment_fixture()
    with pytest.raises(ValueError):
        run_intervention_experiment(g, {"cf": scores}, [0.5], init, beta=0.6, model="sir")
    with pytest.raises(ValueError):
        run_intervention_experiment(g, {"cf": scores}, [1.5], init, beta=0.6)
    short = EdgeScores(method="cf", scores=np.ones(3))
    with pytest.raises(ValueError):
        run_intervention_experiment(g, {"cf": short}, [0.5], init, beta=0.6)


def test_report_lookup_errors():
    report = InterventionReport(rows=[])
    with pytest.raises(ValueError):
        report.baseline
    with pytest.raises(KeyError):
        report.cell("cf", 0.5)


def test_recall_advantage_on_sparsely_mixed_communities():
    """Local-flow targeting finds community boundaries when mixing is sparse.

    With ~17 percent of edges between communities, the diffusion
    equilibrates inside each community and pushes its large potential
    drops across the boundary, so the top-scoring edges concentrate on
    cut edges more than hop-count betweenness does.
    """
    g, labels = gen_planted_partition(2000, 100, 0.3, 0.0006, seed=606)
    cut = np.count_nonzero(labels[g.edge_u] != labels[g.edge_v])
    assert cut / g.edge_count == pytest.approx(0.169, abs=0.01)
    lf = lf_betweenness(g, 0.1, threads=4)
    sp = sp_betweenness(g, threads=4)
    coverages = [0.05, 0.10, 0.15, 0.20, 0.25]
    r_lf = [cut_edge_recall(labels, select_top_edges(lf, c), g) for c in coverages]
    r_sp = [cut_edge_recall(labels, select_top_edges(sp, c), g) for c in coverages]
    assert all(a >= b for a, b in zip(r_lf, r_sp))
    assert r_lf[2] > r_sp[2] + 0.05
    # by 20 percent coverage local flow has found nearly every cut edge
    assert r_lf[3] > 0.99
