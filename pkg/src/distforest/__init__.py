"""Forest reconstruction from distorted tree metrics."""

from .errors import *  # noqa: F401,F403
from .tree_core import (
    AttachLeaf,
    BridgeEdges,
    DirectedEdge,
    Forest,
    JoinLeaves,
    Split,
    Tree,
    apply_edge_add,
    directed_edge_leaf_distance,
    edge_leaf_distance,
    edge_split,
    leaf_path,
    restrict,
    same_topology,
    splits,
    tree_from_splits,
)
from .metric_space import (
    INF,
    DistortionParams,
    LeafMetric,
    WeightedTree,
    ball,
    four_point_gap,
    is_distortion,
    path_metric,
    restrict_weighted,
    truncate,
)
from .local_builder import build_tree, quartet_topology
from .disjointness import (
    SharingGraph,
    UnionFind,
    connected_components,
    edge_on_leafpath,
    edge_sharing,
    forest_count_bound,
)
from .supertree_glue import SharingCollection, candidate_edges, extend_split, glue, glue_report, layers
from .forest_pipeline import ForestResult, alpha_bound, radius, reconstruct_forest, sample_size
from .seq_models import (
    BINARY,
    DNA,
    Alphabet,
    CharacterMatrix,
    JointFrequency,
    MutationModel,
    Threshold,
    cfn_matrix,
    cfn_model,
    distance_matrix,
    empirical_joint,
    exact_joint,
    jc_matrix,
    jc_model,
    logdet_distance,
    logdet_metric,
    logdet_tree,
    simulate,
)

__version__ = "0.1.0"
