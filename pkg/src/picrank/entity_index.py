"""Entity-to-candidates index: the offline coarse stage.

Each named entity maps to the top ``k_build`` images by dot product against
the embedding cache. At query time the postings act purely as a candidate
gate; their scores never enter the final ranking, but they are persisted so
the entity-only configuration can fuse them without re-scanning the cache.

The index records a fingerprint of the cache it was ranked against, because
postings silently paired with a different cache would invalidate every
score. Unknown entities at query time are a counted non-event, never an
error, and new entities can be appended offline at any later time.

Binary layout (little-endian): magic ``T2PSEIX1``; u32 version (1); u64
store fingerprint; u32 k_build; u64 entry count; then per entry, with keys
sorted by their UTF-8 bytes: u32 key length, key bytes, u32 postings length
L, then L pairs of (u64 id, f32 score).
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from . import ranking
from .errors import (
    BadMagic,
    DimensionMismatch,
    EmptyAfterNormalization,
    EmptyStore,
    FingerprintMismatch,
    IoFailure,
    TruncatedPayload,
    UnsupportedVersion,
)
from .ranking import RankedList
from .store import ByteSink, ByteSource, EmbeddingStore, _read_all

INDEX_MAGIC = b"T2PSEIX1"
INDEX_FORMAT_VERSION = 1

_POSTING_DTYPE = np.dtype([("id", "<u8"), ("score", "<f4")])


def normalize_entity(raw: str) -> str:
    """Canonical entity key: case-folded, whitespace collapsed, trimmed.

    Idempotent, so keys can be normalized defensively at every boundary.
    """
    key = " ".join(raw.split()).casefold()
    if not key:
        raise EmptyAfterNormalization(raw)
    return key


@dataclass
class IndexBuildReport:
    """Counters from a build or extend pass."""

    entities_in: int = 0
    entities_indexed: int = 0
    duplicates_collapsed: int = 0
    existing_skipped: int = 0


@dataclass
class EntityIndex:
    """Mapping from normalized entity key to its candidate postings."""

    store_fingerprint: int
    k_build: int
    entries: dict[str, RankedList] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: str) -> bool:
        return self.lookup(key) is not None

    def lookup(self, key: str) -> RankedList | None:
        """Postings for an entity, or None when the entity is unknown.

        The key is normalized before lookup; strings that normalize to
        nothing are treated as unknown rather than as errors, so callers
        can uniformly count them as disregarded.
        """
        try:
            key = normalize_entity(key)
        except EmptyAfterNormalization:
            return None
        return self.entries.get(key)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EntityIndex):
            return NotImplemented
        return (
            self.store_fingerprint == other.store_fingerprint
            and self.k_build == other.k_build
            and self.entries == other.entries
        )


def _ranked_postings(vector: np.ndarray, store: EmbeddingStore, k_build: int) -> RankedList:
    top = ranking.top_k_scan(vector, store, k_build)
    # Scores persist as float32; round now and re-apply the tie rule so the
    # in-memory postings match the serialized form bit for bit.
    scores = top.scores.astype(np.float32).astype(np.float64)
    order = np.lexsort((top.ids, -scores))
    return RankedList(top.ids[order], scores[order])


def _collapse_duplicates(
    entity_embeddings: Iterable[tuple[str, Sequence[float]]],
    dimension: int,
) -> tuple[dict[str, np.ndarray], int, int]:
    """Normalize keys and collapse duplicates, last occurrence winning."""
    collapsed: dict[str, np.ndarray] = {}
    seen = 0
    duplicates = 0
    for raw_key, vector in entity_embeddings:
        seen += 1
        key = normalize_entity(raw_key)
        vec = np.asarray(vector, dtype=np.float32).reshape(-1)
        if vec.shape[0] != dimension:
            raise DimensionMismatch(dimension, int(vec.shape[0]))
        if key in collapsed:
            duplicates += 1
        collapsed[key] = vec
    return collapsed, seen, duplicates


def build_entity_index(
    entity_embeddings: Iterable[tuple[str, Sequence[float]]],
    store: EmbeddingStore,
    k_build: int,
) -> tuple[EntityIndex, IndexBuildReport]:
    """Rank every entity against the cache and record the pairing fingerprint."""
    if k_build < 1:
        raise ValueError("k_build must be >= 1")
    if store.count == 0:
        raise EmptyStore()
    collapsed, seen, duplicates = _collapse_duplicates(entity_embeddings, store.dimension)
    entries = {key: _ranked_postings(vec, store, k_build) for key, vec in collapsed.items()}
    index = EntityIndex(store.fingerprint(), k_build, entries)
    report = IndexBuildReport(entities_in=seen, entities_indexed=len(entries), duplicates_collapsed=duplicates)
    return index, report


def extend_index(
    index: EntityIndex,
    new_entities: Iterable[tuple[str, Sequence[float]]],
    store: EmbeddingStore,
) -> tuple[EntityIndex, IndexBuildReport]:
    """Append freshly ranked entities; existing keys are left untouched.

    Purely offline: produces a new index value, never mutating the input.
    The store must be the exact cache the index was built against.
    """
    if store.fingerprint() != index.store_fingerprint:
        raise FingerprintMismatch(index.store_fingerprint, store.fingerprint())
    if store.count == 0:
        raise EmptyStore()
    collapsed, seen, duplicates = _collapse_duplicates(new_entities, store.dimension)
    entries = dict(index.entries)
    skipped = 0
    added = 0
    for key, vec in collapsed.items():
        if key in entries:
            skipped += 1
            continue
        entries[key] = _ranked_postings(vec, store, index.k_build)
        added += 1
    extended = EntityIndex(index.store_fingerprint, index.k_build, entries)
    report = IndexBuildReport(
        entities_in=seen,
        entities_indexed=added,
        duplicates_collapsed=duplicates,
        existing_skipped=skipped,
    )
    return extended, report


def verify_store_match(index: EntityIndex, store: EmbeddingStore) -> None:
    """Raise FingerprintMismatch unless the cache is the one the index ranks."""
    if store.fingerprint() != index.store_fingerprint:
        raise FingerprintMismatch(index.store_fingerprint, store.fingerprint())


# -- serialization -------------------------------------------------------------


def save_index(index: EntityIndex, destination: ByteSink) -> int:
    """Write the canonical form (keys sorted by UTF-8 bytes); returns bytes."""
    try:
        if isinstance(destination, (str, Path)):
            with open(destination, "wb") as sink:
                return _write_index(index, sink)
        return _write_index(index, destination)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def _write_index(index: EntityIndex, sink: BinaryIO) -> int:
    written = sink.write(INDEX_MAGIC)
    written += sink.write(struct.pack("<IQIQ", INDEX_FORMAT_VERSION, index.store_fingerprint, index.k_build, len(index.entries)))
    for key in sorted(index.entries, key=lambda s: s.encode("utf-8")):
        postings = index.entries[key]
        key_bytes = key.encode("utf-8")
        written += sink.write(struct.pack("<I", len(key_bytes)))
        written += sink.write(key_bytes)
        written += sink.write(struct.pack("<I", len(postings)))
        block = np.empty(len(postings), dtype=_POSTING_DTYPE)
        block["id"] = postings.ids
        block["score"] = postings.scores
        written += sink.write(block.tobytes())
    return written


def open_index(source: ByteSource) -> EntityIndex:
    data = _read_all(source)
    view = memoryview(data)
    if len(view) < 8:
        raise TruncatedPayload("file shorter than the index magic")
    if bytes(view[:8]) != INDEX_MAGIC:
        raise BadMagic(bytes(view[:8]))
    offset = 8
    header_size = struct.calcsize("<IQIQ")
    if len(view) < offset + header_size:
        raise TruncatedPayload("file shorter than the index header")
    version, fingerprint, k_build, entry_count = struct.unpack_from("<IQIQ", view, offset)
    if version != INDEX_FORMAT_VERSION:
        raise UnsupportedVersion(version)
    offset += header_size
    entries: dict[str, RankedList] = {}
    for _ in range(entry_count):
        if len(view) < offset + 4:
            raise TruncatedPayload("entry key length missing")
        (key_len,) = struct.unpack_from("<I", view, offset)
        offset += 4
        if len(view) < offset + key_len + 4:
            raise TruncatedPayload("entry key or postings length missing")
        key = bytes(view[offset : offset + key_len]).decode("utf-8")
        offset += key_len
        (postings_len,) = struct.unpack_from("<I", view, offset)
        offset += 4
        if postings_len > k_build:
            raise IoFailure(f"postings for {key!r} exceed k_build={k_build}")
        nbytes = postings_len * _POSTING_DTYPE.itemsize
        if len(view) < offset + nbytes:
            raise TruncatedPayload(f"postings payload for {key!r} missing")
        block = np.frombuffer(view, dtype=_POSTING_DTYPE, count=postings_len, offset=offset)
        offset += nbytes
        entries[key] = RankedList(block["id"].copy(), block["score"].astype(np.float64))
    if offset != len(view):
        raise IoFailure(f"{len(view) - offset} trailing bytes after last entry")
    return EntityIndex(int(fingerprint), int(k_build), entries)


def index_to_bytes(index: EntityIndex) -> bytes:
    buf = io.BytesIO()
    save_index(index, buf)
    return buf.getvalue()
