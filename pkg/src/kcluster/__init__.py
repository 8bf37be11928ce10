"""Sublinear testing of graph clusterability with exact desk-scale oracles."""

__version__ = "0.1.0"

from .cluster import (
    RunReport,
    SimilarityGraph,
    TestParams,
    connected_components,
    k_cluster_test,
    oracle_cluster_test,
    practical_params,
    theory_params,
)
from .distributions import (
    TesterVerdict,
    collision_count,
    l2_closeness_test,
    l2_distance_estimate,
    l2_norm_estimate,
    l2_norm_test,
)
from .errors import CapacityError, ConstructionError, InputError, KClusterError, ResampleError
from .generators import (
    ClusterInstance,
    dumbbell,
    far_instance_disjoint,
    low_conductance_family,
    planted_clusterable,
    random_regular_expander,
)
from .graph import (
    BoundedDegreeGraph,
    VertexSet,
    induced_subgraph,
    inner_conductance,
    min_conductance_bruteforce,
    neighbor_query,
    outer_conductance,
)
from .walks import (
    SampleCounts,
    WalkDistribution,
    exact_distribution,
    remain_probability,
    sample_counts,
    sample_endpoint,
    walk_step,
)
