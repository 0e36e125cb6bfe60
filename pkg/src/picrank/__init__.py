"""Two-stage long-text-to-image retrieval over precomputed embeddings.

Stage one gates candidates through an offline entity index (per-entity
top-k postings, unioned at query time); stage two re-ranks the pool by
summary-embedding dot product. Everything is encoder-agnostic: vectors
arrive through binary cache files, never from a model inside this package.
"""

from . import errors
from .encoder_io import (
    MockEncoderConfig,
    SynthCorpus,
    SynthCorpusSpec,
    TextEmbeddings,
    attach_summary_vectors,
    generate_synth_corpus,
    load_text_embeddings,
    mock_encode_text,
    read_queries,
    write_queries,
    write_synth_corpus,
    write_text_embeddings,
)
from .entity_index import (
    EntityIndex,
    IndexBuildReport,
    build_entity_index,
    extend_index,
    normalize_entity,
    open_index,
    save_index,
    verify_store_match,
)
from .evaluation import (
    Qrels,
    RunFile,
    load_qrels,
    mrr_at_k,
    overlap_ratio,
    recall_at_k,
    write_qrels,
)
from .pipeline import (
    ER_ONLY,
    MODES,
    SR_FULL,
    TWO_STAGE,
    BatchResult,
    CandidateSet,
    PipelineConfig,
    QueryDocument,
    QueryResult,
    batch_run,
    er_candidates,
    run_query,
    sr_rerank,
)
from .ranking import RankedList, ScoredId, fuse_max, select_top_k, top_k_scan
from .store import (
    EmbeddingRecord,
    EmbeddingStore,
    build_store,
    open_store,
    read_embedding_records,
    read_header,
    save_store,
    store_from_arrays,
)

__version__ = "1.0.0"

__all__ = [
    "errors",
    "__version__",
    # store
    "EmbeddingRecord",
    "EmbeddingStore",
    "build_store",
    "store_from_arrays",
    "save_store",
    "open_store",
    "read_header",
    "read_embedding_records",
    # ranking
    "RankedList",
    "ScoredId",
    "select_top_k",
    "top_k_scan",
    "fuse_max",
    # entity index
    "EntityIndex",
    "IndexBuildReport",
    "normalize_entity",
    "build_entity_index",
    "extend_index",
    "save_index",
    "open_index",
    "verify_store_match",
    # pipeline
    "TWO_STAGE",
    "ER_ONLY",
    "SR_FULL",
    "MODES",
    "QueryDocument",
    "CandidateSet",
    "QueryResult",
    "PipelineConfig",
    "BatchResult",
    "er_candidates",
    "sr_rerank",
    "run_query",
    "batch_run",
    # evaluation
    "Qrels",
    "RunFile",
    "load_qrels",
    "write_qrels",
    "recall_at_k",
    "mrr_at_k",
    "overlap_ratio",
    # encoder io
    "MockEncoderConfig",
    "mock_encode_text",
    "TextEmbeddings",
    "load_text_embeddings",
    "write_text_embeddings",
    "read_queries",
    "write_queries",
    "attach_summary_vectors",
    "SynthCorpusSpec",
    "SynthCorpus",
    "generate_synth_corpus",
    "write_synth_corpus",
]
