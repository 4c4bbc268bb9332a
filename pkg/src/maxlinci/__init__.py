"""Exact conditional independence engine for max-linear Bayesian networks.

Max-times linear algebra over exact rationals, impact graph enumeration,
context-specific source DAGs, conditional representations and samplers,
and a family of graphical separation criteria, with a Monte Carlo oracle
for cross-checking all of it.
"""

from .context import (
    Context,
    ContextAnalysis,
    ImpossibleContext,
    Partition,
    SourceDag,
    analyze,
    compatible_impact_graphs,
    completion_matrix,
    constant_nodes,
    constant_stars,
    effective_edges_in_context,
    partition,
    region_feasible,
    source_dag,
)
from .impact import (
    ENUMERATION_GUARD,
    Galaxy,
    ImpactExchange,
    ImpactVerdict,
    TieDetected,
    TooLarge,
    enumerate_impact_graphs,
    impact_exchange,
    is_impact_graph,
    realized_impact_graph,
    restricted_kleene,
)
from .network import (
    DerivedDag,
    WeightedDag,
    conditional_reach_dag,
    critical_dag,
    dot_digraph,
    evaluate,
    reachability_dag,
)
from .oracle import (
    IndependenceResult,
    SampleBatch,
    Timeout,
    holm,
    independence_test,
    mc_impact_graphs,
    mc_sample_batch,
    rejection_band_sampler,
)
from .representation import (
    BasicRepresentation,
    Bound,
    CondRepresentation,
    ConditionalSample,
    DegenerateBlock,
    InnovationDist,
    ZBlock,
    atoms_of,
    basic_representation,
    build_representation,
    conditional_sampler,
    z_dependency_blocks,
)
from .separation import (
    CIVerdict,
    EdgeNotCritical,
    PathEffectiveness,
    SetsNotDisjoint,
    StarPath,
    ci_context,
    ci_fixed_c,
    ci_fixed_c_complete,
    ci_generic,
    d_separated,
    path_effective,
    star_connecting_paths,
    substitution_entries,
    substitution_matrix,
    witness_context,
)
from .trop import (
    CycleComparison,
    CyclicSupport,
    Rat,
    TropMatrix,
    as_rat,
    bounded_star,
    cycle_compare_one,
    kleene_star,
    max_cycle_mean_float,
    rational_mu_below_one,
    subeigen_candidate,
    subeigen_check,
    trop_mul,
    trop_mul_vec,
    weak_closure,
)

__version__ = "0.1.0"

__all__ = [
    "BasicRepresentation",
    "Bound",
    "CIVerdict",
    "CondRepresentation",
    "ConditionalSample",
    "Context",
    "ContextAnalysis",
    "CycleComparison",
    "CyclicSupport",
    "DegenerateBlock",
    "DerivedDag",
    "ENUMERATION_GUARD",
    "EdgeNotCritical",
    "Galaxy",
    "ImpactExchange",
    "ImpactVerdict",
    "ImpossibleContext",
    "IndependenceResult",
    "InnovationDist",
    "Partition",
    "PathEffectiveness",
    "Rat",
    "SampleBatch",
    "SetsNotDisjoint",
    "SourceDag",
    "StarPath",
    "TieDetected",
    "Timeout",
    "TooLarge",
    "TropMatrix",
    "WeightedDag",
    "ZBlock",
    "analyze",
    "as_rat",
    "atoms_of",
    "basic_representation",
    "bounded_star",
    "build_representation",
    "ci_context",
    "ci_fixed_c",
    "ci_fixed_c_complete",
    "ci_generic",
    "compatible_impact_graphs",
    "completion_matrix",
    "conditional_reach_dag",
    "conditional_sampler",
    "constant_nodes",
    "constant_stars",
    "critical_dag",
    "cycle_compare_one",
    "d_separated",
    "dot_digraph",
    "effective_edges_in_context",
    "enumerate_impact_graphs",
    "evaluate",
    "holm",
    "impact_exchange",
    "independence_test",
    "is_impact_graph",
    "kleene_star",
    "max_cycle_mean_float",
    "mc_impact_graphs",
    "mc_sample_batch",
    "partition",
    "path_effective",
    "rational_mu_below_one",
    "reachability_dag",
    "realized_impact_graph",
    "region_feasible",
    "rejection_band_sampler",
    "restricted_kleene",
    "source_dag",
    "star_connecting_paths",
    "subeigen_candidate",
    "subeigen_check",
    "substitution_entries",
    "substitution_matrix",
    "trop_mul",
    "trop_mul_vec",
    "weak_closure",
    "witness_context",
]
