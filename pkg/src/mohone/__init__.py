"""Scale-aware heat-kernel network embeddings for knowledge graphs.

Pipeline: project a KG to an undirected entity graph, diffuse heat at a
chosen scale, train network embeddings (shared-neighborhood or structural),
retrofit base KG entity embeddings toward their network neighbors, relearn
relation embeddings, and compare baseline vs infused models under filtered
link-prediction metrics.
"""

__version__ = "0.1.0"

from .graph import (
    TripleStore, Vocab, UndirectedGraph, NormalizedLaplacian, TripleFileError,
    load_triples, project_graph, normalized_laplacian,
)
from .diffusion import (
    HeatKernelConfig, HeatDiffusionMatrix, HeatSignature, NumericError,
    heat_matrix_exact, heat_matrix_chebyshev, heat_matrix,
    estimate_lambda_max, heat_signature, all_heat_signatures,
)
from .netembed import (
    TrainConfig, NodeEmbeddingMatrix, PairSampler,
    build_shnb_sampler, build_structural_sampler, js_divergence,
    sgns_step, train_embeddings,
)
from .kge import (
    KgeTrainConfig, KGEmbedding, MODELS,
    score, score_triples, score_candidates, make_scorer,
    train_kge, relearn_relations,
)
from .retrofit import (
    RetrofitProblem, RetrofitResult,
    build_neighbor_sets, retrofit_objective, retrofit_step, retrofit,
)
from .evaluation import (
    EvalResult, rank_filtered, evaluate, paired_significance,
)
