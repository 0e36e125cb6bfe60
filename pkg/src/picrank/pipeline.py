"""Query-time orchestration: candidate gathering, then summary re-ranking.

The two-stage path looks up each of the query's entities in the index,
unions the truncated postings into a candidate pool, and re-ranks only that
pool against the query's summary embedding. Entity scores gate candidacy
but never contribute to the final score. Two ablation configurations are
supported alongside: entity-only (fused postings, no summary) and
full-corpus summary scan (no candidate gate).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import ranking
from .entity_index import EntityIndex
from .errors import DimensionMismatch, DuplicateQueryId, MissingSummary
from .evaluation import RunFile
from .ranking import RankedList
from .store import EmbeddingStore

TWO_STAGE = "two_stage"
ER_ONLY = "er_only"
SR_FULL = "sr_full"
MODES = (TWO_STAGE, ER_ONLY, SR_FULL)

Encoder = Callable[[str], np.ndarray]


@dataclass
class QueryDocument:
    """One query: its id, raw entity strings, and a summary.

    The summary arrives as text, as a resolved vector, or as a reference
    into a text-embedding sidecar (``summary_embedding_id``) that callers
    resolve into ``summary_vector`` before ranking.
    """

    query_id: int
    entities: list[str] = field(default_factory=list)
    summary_text: str | None = None
    summary_vector: np.ndarray | None = None
    summary_embedding_id: int | None = None


@dataclass(eq=False)
class CandidateSet:
    """Deduplicated union of per-entity postings, plus gathering counters.

    ``pre_dedup_size`` is the sum of truncated postings lengths before the
    union, kept so the candidate-overlap statistic can always be measured.
    """

    ids: np.ndarray
    entities_found: int = 0
    entities_disregarded: int = 0
    pre_dedup_size: int = 0

    @classmethod
    def empty(cls) -> "CandidateSet":
        return cls(ids=np.empty(0, dtype=np.uint64))

    @property
    def size(self) -> int:
        return int(self.ids.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CandidateSet):
            return NotImplemented
        return (
            np.array_equal(self.ids, other.ids)
            and self.entities_found == other.entities_found
            and self.entities_disregarded == other.entities_disregarded
            and self.pre_dedup_size == other.pre_dedup_size
        )


@dataclass
class QueryResult:
    query_id: int
    ranking: RankedList
    candidates: CandidateSet
    skipped_unknown: int = 0
    used_fallback: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    """Retrieval configuration; defaults match the evaluation operating point
    (candidate depth 10000 per entity, rankings reported to depth 1000)."""

    mode: str = TWO_STAGE
    k_query: int = 10000
    depth: int = 1000
    fallback_to_full: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.k_query < 1:
            raise ValueError("k_query must be >= 1")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")


def _gather_postings(
    query: QueryDocument, index: EntityIndex, k_query: int
) -> tuple[list[RankedList], CandidateSet]:
    """Normalize, dedupe, and look up the query's entities.

    Duplicate entities (after normalization) are looked up once; entities
    unknown to the index, and strings that normalize to nothing, are counted
    as disregarded and affect nothing else. One counter unit per unique
    normalized form.
    """
    if k_query > index.k_build:
        raise ValueError(f"k_query={k_query} exceeds the index's k_build={index.k_build}")
    seen: set[str] = set()
    found_lists: list[RankedList] = []
    found = 0
    disregarded = 0
    pre_dedup = 0
    for raw in query.entities:
        key = " ".join(raw.split()).casefold()
        if key in seen:
            continue
        seen.add(key)
        postings = index.entries.get(key) if key else None
        if postings is None:
            disregarded += 1
            continue
        found += 1
        truncated = postings.truncate(k_query)
        pre_dedup += len(truncated)
        found_lists.append(truncated)
    if found_lists:
        ids = np.unique(np.concatenate([lst.ids for lst in found_lists]))
    else:
        ids = np.empty(0, dtype=np.uint64)
    stats = CandidateSet(
        ids=ids,
        entities_found=found,
        entities_disregarded=disregarded,
        pre_dedup_size=pre_dedup,
    )
    return found_lists, stats


def er_candidates(query: QueryDocument, index: EntityIndex, k_query: int) -> CandidateSet:
    """Candidate pool for one query: union of per-entity top-``k_query`` postings."""
    if k_query < 1:
        raise ValueError("k_query must be >= 1")
    return _gather_postings(query, index, k_query)[1]


def _rerank(
    summary_vector: np.ndarray, candidate_ids: np.ndarray, store: EmbeddingStore, depth: int
) -> tuple[RankedList, int]:
    vec = np.asarray(summary_vector, dtype=np.float64).reshape(-1)
    if vec.shape[0] != store.dimension:
        raise DimensionMismatch(store.dimension, int(vec.shape[0]))
    positions, missing = store.positions_for(candidate_ids)
    ids = store.ids[positions]
    scores = ranking.chunked_scores(store.vectors[positions], vec)
    top_ids, top_scores = ranking.select_top_k(ids, scores, depth)
    return RankedList(top_ids, top_scores), missing


def sr_rerank(
    summary_vector: np.ndarray,
    candidates: CandidateSet,
    store: EmbeddingStore,
    depth: int,
) -> RankedList:
    """Re-rank the candidate pool by summary dot product.

    Equivalent to a full top-k scan restricted to the candidate ids;
    candidates absent from the store are skipped.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return _rerank(summary_vector, candidates.ids, store, depth)[0]


def _resolve_summary(query: QueryDocument, encoder: Encoder | None) -> np.ndarray:
    if query.summary_vector is not None:
        return np.asarray(query.summary_vector, dtype=np.float64).reshape(-1)
    if query.summary_text is not None and encoder is not None:
        return np.asarray(encoder(query.summary_text), dtype=np.float64).reshape(-1)
    raise MissingSummary(query.query_id)


def run_query(
    query: QueryDocument,
    index: EntityIndex,
    store: EmbeddingStore,
    config: PipelineConfig,
    encoder: Encoder | None = None,
) -> QueryResult:
    """Run one query in the configured mode.

    two_stage: entity candidates, then summary re-ranking over the pool.
    er_only:   max-fused per-entity postings, no summary involved.
    sr_full:   summary scan over the whole corpus, no candidate gate.

    An all-unknown entity list in two_stage mode yields an empty ranking
    (with counters telling why) unless ``fallback_to_full`` asks for a
    full-corpus rescue scan instead.
    """
    if config.mode == SR_FULL:
        vec = _resolve_summary(query, encoder)
        ranked = ranking.top_k_scan(vec, store, config.depth)
        return QueryResult(query.query_id, ranked, CandidateSet.empty())

    found_lists, stats = _gather_postings(query, index, config.k_query)

    if config.mode == ER_ONLY:
        fused = ranking.fuse_max(found_lists).truncate(config.depth)
        return QueryResult(query.query_id, fused, stats)

    vec = _resolve_summary(query, encoder)
    if stats.size == 0:
        if config.fallback_to_full:
            ranked = ranking.top_k_scan(vec, store, config.depth)
            return QueryResult(query.query_id, ranked, stats, used_fallback=True)
        return QueryResult(query.query_id, RankedList.empty(), stats)
    ranked, skipped = _rerank(vec, stats.ids, store, config.depth)
    return QueryResult(query.query_id, ranked, stats, skipped_unknown=skipped)


@dataclass
class BatchResult:
    """Everything a batch produced: the run file plus per-query results."""

    run: RunFile
    results: list[QueryResult]


def batch_run(
    queries: Sequence[QueryDocument],
    index: EntityIndex,
    store: EmbeddingStore,
    config: PipelineConfig,
    run_tag: str = "picrank",
    encoder: Encoder | None = None,
    threads: int = 1,
) -> BatchResult:
    """Run a batch of queries and assemble a TREC-style run.

    Queries execute independently (optionally on a thread pool); output is
    always assembled in ascending query_id order, so the run bytes do not
    depend on scheduling.
    """
    seen_ids: set[int] = set()
    for q in queries:
        if q.query_id in seen_ids:
            raise DuplicateQueryId(q.query_id)
        seen_ids.add(q.query_id)
    ordered = sorted(queries, key=lambda q: q.query_id)

    def run_one(q: QueryDocument) -> QueryResult:
        return run_query(q, index, store, config, encoder)

    if threads > 1 and len(ordered) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_one, ordered))
    else:
        results = [run_one(q) for q in ordered]

    run = RunFile(tag=run_tag)
    for result in results:
        run.add_ranking(result.query_id, result.ranking.truncate(config.depth))
    return BatchResult(run=run, results=results)
