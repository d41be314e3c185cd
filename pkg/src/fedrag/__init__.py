"""Desk-scale federated learning + hybrid-retrieval RAG simulation.

Core building blocks are importable from the top level; the FastAPI
service lives in fedrag.service and the CLI in fedrag.cli.
"""

__version__ = "0.1.0"

from .corpus import Chunk, ChunkingConfig, Document, chunk_corpus, chunk_document, load_corpus
from .fedcore import (
    ClientShard,
    FederationConfig,
    LossSummary,
    RoundLog,
    cosine_lrate,
    fedavg,
    partition_explicit,
    run_centralized,
    run_federated,
    select_clients,
    summarize_losses,
)
from .modelkit import (
    ExtractiveGenerator,
    HashedEmbedder,
    JaccardJudge,
    ModelFamily,
    TrainExample,
    TrainReport,
    reference_embed,
    reference_generate,
    reference_judge_entails,
    reference_model_train,
)
from .ragpipe import QaSample, RagConfig, RagOutput, answer_with_rag, answer_without_rag
from .retrieval import (
    Bm25Index,
    DenseIndex,
    EnsembleConfig,
    RetrievalResult,
    bm25_query,
    build_bm25,
    build_dense,
    dense_query,
    ensemble_query,
)
from .evalkit import (
    MetricScores,
    ScenarioReport,
    aggregate_report,
    answer_relevancy,
    context_recall,
    factual_correctness,
    faithfulness,
    semantic_similarity,
)
from .experiment import ExperimentConfig, RunManifest, run_experiment, validate_config

__all__ = [name for name in dir() if not name.startswith("_")]
