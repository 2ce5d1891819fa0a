"""Bootstrap-style threshold activation on a torus with random long-range edges."""

from .torus_model import ParameterError, TorusParams, Vertex, lambda_size, long_edge_prob, offsets_at_distance, torus_distance
from .graph_gen import Graph, RngSeed, build_graph, expected_long_edge_count, parse, sample_long_edges, serialize
from .graph_analysis import (
    DegreeDistribution,
    DiameterReport,
    bfs_eccentricity,
    estimate_diameter,
    exact_diameter,
    exact_long_degree_distribution,
    long_degree_histogram,
    poisson_pmf,
    tv_distance,
)
from .dynamics import ActivationConfig, ActivationState, RunOutcome, init_state, mf_chain_run, mf_chain_step, run, step
from .meanfield import (
    FixedPoint,
    GeneralizedRule,
    MeanFieldModel,
    dpc_dlambda,
    f_mean,
    f_minus,
    f_plus,
    fbar_closed,
    fbar_generalized,
    fbar_generic,
    find_fixed_points,
    g_var,
    p_c,
    pc_curve,
)

__version__ = "0.1.0"
