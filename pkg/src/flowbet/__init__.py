"""Local-flow edge betweenness and epidemic intervention experiments.

The package computes edge importance from 2-norm flow diffusion (a
localized alternative to shortest-path and current-flow betweenness),
evaluates contact-reduction strategies with deterministic and agent
SEIR simulators, and provides the structural diagnostics (conductance,
sweep cuts, approximate community profiles) that explain why targeting
local bottleneck edges curbs spread.
"""

from .analysis import (
    NcpPoint,
    conductance,
    degree_distribution,
    low_degree_fraction,
    ncp_approx,
    ncp_bucket,
    singleton_count_after_removal,
    sweep_cut,
)
from .centrality import (
    CentralityError,
    EdgeScores,
    NodeScores,
    cf_betweenness,
    eg_edge_scores,
    hd_edge_scores,
    l2_flow_betweenness,
    lf_betweenness,
    node_scores_from_edges,
    sp_betweenness,
)
from .diffusion import (
    DiffusionError,
    DiffusionProblem,
    DualSolution,
    dense_laplacian,
    dual_objective,
    flow_from_dual,
    nonzero_flow_edge_count,
    qp_oracle_solve,
    sink_capacities,
    solve_l2_diffusion,
)
from .epidemic import (
    AgentSeirParams,
    CalibrationResult,
    EpidemicCurve,
    EpidemicError,
    InitialCondition,
    OdeSeirParams,
    beta_from_r0,
    calibrate_beta_final_size,
    curve_metrics,
    ensemble_agent_seir,
    resolve_initial_nodes,
    simulate_agent_seir,
    simulate_ode_seir,
)
from .generators import gen_bridged_clusters, gen_planted_partition
from .graphs import (
    Graph,
    GraphFormatError,
    disconnect_nodes,
    largest_connected_component,
    load_edge_list,
    load_node_attributes,
    reweigh_edges,
    save_edge_list,
)
from .intervention import (
    InterventionPlan,
    InterventionReport,
    InterventionRow,
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

__version__ = "0.1.0"

__all__ = [
    "AgentSeirParams",
    "CalibrationResult",
    "CentralityError",
    "DiffusionError",
    "DiffusionProblem",
    "DualSolution",
    "EdgeScores",
    "EpidemicCurve",
    "EpidemicError",
    "Graph",
    "GraphFormatError",
    "InitialCondition",
    "InterventionPlan",
    "InterventionReport",
    "InterventionRow",
    "NcpPoint",
    "NodeScores",
    "OdeSeirParams",
    "apply_edge_intervention",
    "apply_plan",
    "apply_uniform_intervention",
    "beta_from_r0",
    "calibrate_beta_final_size",
    "cf_betweenness",
    "conductance",
    "curve_metrics",
    "cut_edge_recall",
    "degree_distribution",
    "dense_laplacian",
    "disconnect_nodes",
    "dual_objective",
    "eg_edge_scores",
    "ensemble_agent_seir",
    "flow_from_dual",
    "gen_bridged_clusters",
    "gen_planted_partition",
    "hd_edge_scores",
    "immunize_top_nodes",
    "l2_flow_betweenness",
    "largest_connected_component",
    "lf_betweenness",
    "load_edge_list",
    "load_node_attributes",
    "low_degree_fraction",
    "ncp_approx",
    "ncp_bucket",
    "node_scores_from_edges",
    "nonzero_flow_edge_count",
    "out_link_coverage",
    "qp_oracle_solve",
    "reweigh_edges",
    "resolve_initial_nodes",
    "run_intervention_experiment",
    "save_edge_list",
    "score_fingerprint",
    "select_top_edges",
    "simulate_agent_seir",
    "simulate_ode_seir",
    "sink_capacities",
    "solve_l2_diffusion",
    "sp_betweenness",
    "sweep_cut",
]
