"""Exact dot-product scoring and deterministic top-k selection.

Scores are accumulated in float64 over the float32 stored components, and
scans walk the id space in fixed-size chunks, so results do not depend on
how work happens to be scheduled. Ordering everywhere is the same total
order: score descending, then id ascending. There is no approximate path;
the engine's speed comes from candidate pruning, not from giving up
exactness.
"""

from __future__ import annotations

from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch
from .store import EmbeddingStore

# Fixed, input-independent chunk width for scans; keeps peak memory flat and
# makes the float64 accumulation order reproducible.
SCAN_CHUNK = 65536


class ScoredId(NamedTuple):
    """One ranked entry: image id plus its dot-product score."""

    id: int
    score: float


class RankedList:
    """Ordered (id, score) pairs: score descending, ties by id ascending.

    Backed by parallel numpy arrays (uint64 ids, float64 scores) so unions
    and truncations over tens of thousands of entries stay cheap; iteration
    yields :class:`ScoredId` for convenience.
    """

    __slots__ = ("ids", "scores")

    def __init__(self, ids: np.ndarray, scores: np.ndarray):
        ids = np.ascontiguousarray(ids, dtype=np.uint64)
        scores = np.ascontiguousarray(scores, dtype=np.float64)
        if ids.shape != scores.shape or ids.ndim != 1:
            raise ValueError("ids and scores must be 1-d arrays of equal length")
        self.ids = ids
        self.scores = scores

    @classmethod
    def empty(cls) -> "RankedList":
        return cls(np.empty(0, dtype=np.uint64), np.empty(0, dtype=np.float64))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "RankedList":
        items = list(pairs)
        ids = np.fromiter((p[0] for p in items), dtype=np.uint64, count=len(items))
        scores = np.fromiter((p[1] for p in items), dtype=np.float64, count=len(items))
        return cls(ids, scores)

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    def __iter__(self) -> Iterator[ScoredId]:
        for i in range(len(self)):
            yield ScoredId(int(self.ids[i]), float(self.scores[i]))

    def __getitem__(self, i: int) -> ScoredId:
        return ScoredId(int(self.ids[i]), float(self.scores[i]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RankedList):
            return NotImplemented
        return np.array_equal(self.ids, other.ids) and np.array_equal(self.scores, other.scores)

    def __repr__(self) -> str:
        head = ", ".join(f"({e.id}, {e.score:g})" for e in list(self)[:4])
        tail = ", ..." if len(self) > 4 else ""
        return f"RankedList([{head}{tail}], len={len(self)})"

    @property
    def entries(self) -> list[ScoredId]:
        return list(self)

    def truncate(self, k: int) -> "RankedList":
        if k >= len(self):
            return self
        return RankedList(self.ids[:k], self.scores[:k])

    def validate(self) -> None:
        """Raise ValueError if ordering, uniqueness or finiteness is violated."""
        if not np.isfinite(self.scores).all():
            raise ValueError("scores must be finite")
        if len(self) > 1:
            s, i = self.scores, self.ids
            ok = (s[:-1] > s[1:]) | ((s[:-1] == s[1:]) & (i[:-1] < i[1:]))
            if not ok.all():
                raise ValueError(f"tie rule violated at position {int(np.flatnonzero(~ok)[0])}")
        if len(np.unique(self.ids)) != len(self):
            raise ValueError("ids must be unique within a ranked list")


def dot_score(a: Sequence[float], b: Sequence[float]) -> float:
    """Dot product of two vectors, accumulated in float64."""
    av = np.asarray(a, dtype=np.float64).reshape(-1)
    bv = np.asarray(b, dtype=np.float64).reshape(-1)
    if av.shape[0] != bv.shape[0]:
        raise DimensionMismatch(int(av.shape[0]), int(bv.shape[0]))
    return float(av @ bv)


def chunked_scores(vectors: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Float64 dot products of every row against ``query``, in fixed chunks."""
    n = vectors.shape[0]
    out = np.empty(n, dtype=np.float64)
    for start in range(0, n, SCAN_CHUNK):
        stop = min(start + SCAN_CHUNK, n)
        out[start:stop] = vectors[start:stop].astype(np.float64) @ query
    return out


def select_top_k(ids: np.ndarray, scores: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact top-k under (score desc, id asc) without fully sorting.

    Boundary ties are resolved explicitly: entries strictly above the k-th
    score always win, and the remaining slots go to the tied entries with
    the smallest ids.
    """
    n = scores.shape[0]
    if k >= n:
        order = np.lexsort((ids, -scores))
        return ids[order], scores[order]
    part = np.argpartition(-scores, k - 1)[:k]
    kth = scores[part].min()
    better = np.flatnonzero(scores > kth)
    tied = np.flatnonzero(scores == kth)
    need = k - better.shape[0]
    chosen_tied = tied[np.argsort(ids[tied])[:need]]
    sel = np.concatenate([better, chosen_tied])
    order = np.lexsort((ids[sel], -scores[sel]))
    return ids[sel][order], scores[sel][order]


def top_k_scan(
    query: Sequence[float],
    store: EmbeddingStore,
    k: int,
    candidates: np.ndarray | Iterable[int] | None = None,
) -> RankedList:
    """Top-k images by dot product, over the whole store or a candidate set.

    With ``candidates`` given, only those ids are scored; candidate ids that
    are not in the store are skipped. Returns min(k, scanned) entries.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != store.dimension:
        raise DimensionMismatch(store.dimension, int(q.shape[0]))
    if candidates is None:
        ids = store.ids
        scores = chunked_scores(store.vectors, q)
    else:
        wanted = candidates if isinstance(candidates, np.ndarray) else np.fromiter(candidates, dtype=np.uint64)
        positions, _missing = store.positions_for(np.unique(wanted.astype(np.uint64, copy=False)))
        ids = store.ids[positions]
        scores = chunked_scores(store.vectors[positions], q)
    top_ids, top_scores = select_top_k(ids, scores, k)
    return RankedList(top_ids, top_scores)


def fuse_max(lists: Sequence[RankedList]) -> RankedList:
    """Merge ranked lists, keeping each id once at its maximum score.

    This is how per-entity postings collapse into a single entity-only
    ranking; the engine's two-stage path never fuses entity scores into the
    final ranking, so this only backs the entity-only configuration.
    """
    non_empty = [lst for lst in lists if len(lst)]
    if not non_empty:
        return RankedList.empty()
    ids = np.concatenate([lst.ids for lst in non_empty])
    scores = np.concatenate([lst.scores for lst in non_empty])
    # Sort by (id asc, score desc); the first row of each id group is its max.
    order = np.lexsort((-scores, ids))
    ids = ids[order]
    scores = scores[order]
    first = np.empty(len(ids), dtype=bool)
    first[0] = True
    first[1:] = ids[1:] != ids[:-1]
    ids = ids[first]
    scores = scores[first]
    order = np.lexsort((ids, -scores))
    return RankedList(ids[order], scores[order])
