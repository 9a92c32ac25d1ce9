"""Balancing augmentation for signed graphs.

Pipeline: load a signed edge list, train a compact two-branch signed GNN,
derive per-sign edge propensities from the embeddings, selectively perturb the
graph under an edge-utility filter and a perturbation regulator, retrain on the
augmented graph, and evaluate link sign prediction.
"""

from .graph import (
    EdgeSplit,
    ParseError,
    RatingRecord,
    SignedGraph,
    build_graph,
    graph_stats,
    load_edge_list,
    record_stats,
    split_adjacency,
    split_edges,
)
from .balance import (
    CycleCountSet,
    UtilityScores,
    compute_utilities,
    count_cycles,
    edge_utility,
    entropy_shares,
    expected_entropy_after_perturbation,
    filter_edge,
    oracle_count_cycles,
    pair_utility,
    path_sign,
    shannon_entropy,
)
from .sgnn import (
    EgoTree,
    EmbeddingPair,
    ModelParams,
    TrainConfig,
    TrainResult,
    build_k_hop_ego_tree,
    concat,
    forward,
    gradient_check,
    init_params,
    load_embeddings,
    load_params,
    loss,
    save_embeddings,
    save_params,
    synth_features,
    train,
)
from .augment import (
    AugmentationState,
    AugmentedGraph,
    EPRConfig,
    LogEntry,
    PerturbationLog,
    ProbabilityMatrices,
    augment,
    edge_probabilities,
    epr_check,
    fuse,
    perturb_step,
)
from .evaluate import (
    ExperimentConfig,
    MetricReport,
    auc,
    boundary_diagnostics,
    classification_metrics,
    predict_test_edges,
    run_experiment,
    sweep,
)

__version__ = "0.1.0"
