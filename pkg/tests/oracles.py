"""Independently written reference implementations used as test oracles.

These deliberately avoid the library's own selection, fusion, metric and
encoding code paths: sorting happens through Python's ``sorted`` on tuples,
metrics through plain dict/loop arithmetic, and the reference encoder is a
from-scratch rewrite of the documented scheme. Score accumulation is the
one mandated exception: scores must come from a float64 GEMV over the
float32 rows (a single full-matrix call here, versus the library's chunked
loop) so exact score comparisons are meaningful.
"""

from __future__ import annotations

import hashlib

import numpy as np


def oracle_scores(vectors_f32: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Mandated accumulation: float64 GEMV over float32 rows, one call."""
    return vectors_f32.astype(np.float64) @ np.asarray(query, dtype=np.float64)


def oracle_sort(ids, scores) -> list[tuple[int, float]]:
    """Full sort under the total order (score descending, id ascending)."""
    pairs = [(int(i), float(s)) for i, s in zip(ids, scores)]
    return sorted(pairs, key=lambda p: (-p[1], p[0]))


def oracle_top_k(ids, scores, k: int) -> list[tuple[int, float]]:
    return oracle_sort(ids, scores)[:k]


def oracle_full_scan(store, query: np.ndarray, k: int) -> list[tuple[int, float]]:
    scores = oracle_scores(store.vectors, query)
    return oracle_top_k(store.ids, scores, k)


def oracle_postings(store, entity_vector: np.ndarray, k_build: int) -> list[tuple[int, float]]:
    """Reference postings: float64 top-k, then float32 score rounding and a
    re-sort under the same total order (the persisted-precision semantics)."""
    top = oracle_full_scan(store, entity_vector, k_build)
    rounded = [(i, float(np.float32(s))) for i, s in top]
    return sorted(rounded, key=lambda p: (-p[1], p[0]))


def oracle_fuse_max(lists) -> list[tuple[int, float]]:
    best: dict[int, float] = {}
    for lst in lists:
        for doc_id, score in lst:
            doc_id, score = int(doc_id), float(score)
            if doc_id not in best or score > best[doc_id]:
                best[doc_id] = score
    return sorted(best.items(), key=lambda p: (-p[1], p[0]))


def oracle_recall_at_k(rankings: dict[int, list[int]], qrels: dict[int, set[int]], k: int) -> float:
    total = 0.0
    for qid, relevant in qrels.items():
        docs = rankings.get(qid, [])[:k]
        hit = sum(1 for d in docs if d in relevant)
        total += hit / len(relevant)
    return total / len(qrels)


def oracle_mrr_at_k(rankings: dict[int, list[int]], qrels: dict[int, set[int]], k: int) -> float:
    total = 0.0
    for qid, relevant in qrels.items():
        for position, doc in enumerate(rankings.get(qid, [])[:k], start=1):
            if doc in relevant:
                total += 1.0 / position
                break
    return total / len(qrels)


def oracle_mock_encode(text: str, dimension: int, seed: int) -> np.ndarray:
    """From-scratch rewrite of the documented mock encoding scheme."""
    tokens = text.split()
    assert tokens, "oracle only covers non-empty text"
    rows = []
    for token in tokens:
        digest = hashlib.blake2b(
            token.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little")
        ).digest()
        gen = np.random.default_rng(int.from_bytes(digest, "little"))
        row = gen.uniform(-1.0, 1.0, dimension)
        rows.append(row / np.linalg.norm(row))
    mean = np.mean(np.stack(rows), axis=0)
    return (mean / np.linalg.norm(mean)).astype(np.float32)


def as_pairs(ranked) -> list[tuple[int, float]]:
    """RankedList (or any (id, score) iterable) to a plain list of tuples."""
    return [(int(i), float(s)) for i, s in ranked]
