"""Active similarity learning from nearest-neighbor queries.

A query shows an oracle one reference item and C candidates; the oracle
picks the candidate most similar to the reference. This package selects the
most informative such queries by Monte-Carlo mutual information under a
Plackett-Luce response model, learns an embedding from the answers with
probabilistic MDS, reuses the same selection machinery for active
classification, and exposes the loop to simulated oracles (experiments) and
a live human oracle (HTTP session service).
"""

from .acquisition import (
    BatchConfig,
    MIConfig,
    MIScores,
    build_classification_pool,
    kmeans_labels,
    knn_majority_labels,
    score_mi_distances,
    score_mi_embedding,
    score_mi_ranking,
    score_pool,
    select_batch_clustered,
    select_batch_top_random,
)
from .choice import PLParams, choice_probabilities, entropy, mu_value
from .classify import (
    ClassificationLoopConfig,
    ModelConfig,
    al_classification_loop,
    k_center_select,
    max_entropy_select,
)
from .embedding import (
    ActiveEmbeddingSession,
    ActiveLoopConfig,
    MDSConfig,
    active_embed_loop,
    mds_fit,
    pair_log_loss,
    pair_log_loss_grad,
)
from .metrics import (
    TrialStats,
    aggregate_kendall,
    kendall_tau,
    recall_at_k,
    top_fraction_at_k,
    triplet_generalization_accuracy,
)
from .oracles import (
    CorruptedOracle,
    DeterministicOracle,
    GroundTruth,
    HumanBridgeOracle,
    Oracle,
    PLNoisyOracle,
    ReplayOracle,
)
from .types import (
    ComparisonStore,
    Embedding,
    NNQuery,
    PairedComparison,
    QueryPool,
    QueryResponse,
    RankingQuery,
    RankingResponse,
    decompose_nn,
    decompose_ranking,
    enumerate_candidate_queries,
    query_distances,
)

__version__ = "0.1.0"
