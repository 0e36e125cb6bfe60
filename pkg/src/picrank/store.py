"""Immutable on-disk cache of image embeddings.

The cache is the shared substrate for both retrieval stages: entity postings
are ranked against it offline, and summary re-ranking reads candidate vectors
from it at query time. Records are kept sorted by image id so serialization
is canonical (the same records always produce the same bytes) and lookups are
a binary search.

Binary layout (little-endian throughout):

    bytes 0-7    magic ``T2PSEMB1``
    bytes 8-11   format version (u32, currently 1)
    bytes 12-15  dimension (u32, >= 1)
    bytes 16-23  record count (u64)
    then per record: id (u64) followed by ``dimension`` float32 components

No padding, no trailing bytes. Vectors are stored raw; the cache never
normalizes, because normalization would silently change dot-product scores.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, NamedTuple, Sequence, Union

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    DuplicateId,
    IoFailure,
    NonFiniteComponent,
    TruncatedPayload,
    UnknownId,
    UnsortedIds,
    UnsupportedVersion,
)

MAGIC = b"T2PSEMB1"
FORMAT_VERSION = 1
HEADER_SIZE = 24

_HEADER_DTYPE = np.dtype([("magic", "S8"), ("version", "<u4"), ("dimension", "<u4"), ("count", "<u8")])

# Records are encoded/hashed in fixed-size chunks so a fingerprint can be
# computed without materializing the whole byte stream.
_ENCODE_CHUNK = 65536

ByteSink = Union[str, Path, BinaryIO]
ByteSource = Union[str, Path, bytes, BinaryIO]


class EmbeddingRecord(NamedTuple):
    """One (image id, vector) pair as supplied to :func:`build_store`."""

    id: int
    vector: np.ndarray


@dataclass(frozen=True)
class StoreHeader:
    magic: bytes
    format_version: int
    dimension: int
    count: int


def _record_dtype(dimension: int) -> np.dtype:
    return np.dtype([("id", "<u8"), ("vec", "<f4", (dimension,))])


class EmbeddingStore:
    """In-memory view of the cache: sorted ids plus a float32 vector matrix.

    Instances are immutable after construction and safe to share across
    threads; all arrays are marked read-only.
    """

    def __init__(self, ids: np.ndarray, vectors: np.ndarray):
        ids = np.ascontiguousarray(ids, dtype=np.uint64)
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise ValueError("vectors must be a 2-d array")
        if len(ids) != len(vectors):
            raise ValueError("ids and vectors disagree on record count")
        ids.flags.writeable = False
        vectors.flags.writeable = False
        self._ids = ids
        self._vectors = vectors
        self._fingerprint: int | None = None

    # -- basic accessors -------------------------------------------------

    @property
    def ids(self) -> np.ndarray:
        return self._ids

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def dimension(self) -> int:
        return int(self._vectors.shape[1])

    @property
    def count(self) -> int:
        return int(self._vectors.shape[0])

    def __len__(self) -> int:
        return self.count

    def __contains__(self, image_id: int) -> bool:
        pos = int(np.searchsorted(self._ids, np.uint64(image_id)))
        return pos < self.count and int(self._ids[pos]) == int(image_id)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self._ids.tobytes() == other._ids.tobytes()
            and self._vectors.tobytes() == other._vectors.tobytes()
        )

    def __repr__(self) -> str:
        return f"EmbeddingStore(count={self.count}, dimension={self.dimension})"

    # -- lookup ----------------------------------------------------------

    def position(self, image_id: int) -> int:
        """Record position for an id, raising :class:`UnknownId` if absent."""
        pos = int(np.searchsorted(self._ids, np.uint64(image_id)))
        if pos >= self.count or int(self._ids[pos]) != int(image_id):
            raise UnknownId(int(image_id))
        return pos

    def get_vector(self, image_id: int) -> np.ndarray:
        """Stored vector for an id, bit-exact, as a read-only float32 view."""
        return self._vectors[self.position(image_id)]

    def positions_for(self, image_ids: np.ndarray) -> tuple[np.ndarray, int]:
        """Map an array of ids to record positions, skipping unknown ids.

        Returns ``(positions, missing)`` where ``positions`` follows the
        input order restricted to known ids and ``missing`` counts the ids
        that are not in the store.
        """
        wanted = np.asarray(image_ids, dtype=np.uint64)
        pos = np.searchsorted(self._ids, wanted)
        pos_clipped = np.minimum(pos, max(self.count - 1, 0))
        known = np.zeros(len(wanted), dtype=bool) if self.count == 0 else self._ids[pos_clipped] == wanted
        return pos_clipped[known].astype(np.int64), int(len(wanted) - known.sum())

    # -- serialization helpers --------------------------------------------

    @property
    def header(self) -> StoreHeader:
        return StoreHeader(MAGIC, FORMAT_VERSION, self.dimension, self.count)

    def iter_encoded_chunks(self) -> Iterator[bytes]:
        """Yield the exact file bytes (header first, then record chunks)."""
        header = np.zeros(1, dtype=_HEADER_DTYPE)
        header["magic"] = MAGIC
        header["version"] = FORMAT_VERSION
        header["dimension"] = self.dimension
        header["count"] = self.count
        yield header.tobytes()
        rec_dtype = _record_dtype(self.dimension)
        for start in range(0, self.count, _ENCODE_CHUNK):
            stop = min(start + _ENCODE_CHUNK, self.count)
            block = np.empty(stop - start, dtype=rec_dtype)
            block["id"] = self._ids[start:stop]
            block["vec"] = self._vectors[start:stop]
            yield block.tobytes()

    def fingerprint(self) -> int:
        """64-bit checksum over the serialized cache bytes.

        Cached after the first call; used to pair an entity index with the
        exact cache it was ranked against.
        """
        if self._fingerprint is None:
            digest = hashlib.blake2b(digest_size=8)
            for chunk in self.iter_encoded_chunks():
                digest.update(chunk)
            self._fingerprint = int.from_bytes(digest.digest(), "little")
        return self._fingerprint


def build_store(records: Iterable[tuple[int, Sequence[float]]], dimension: int) -> EmbeddingStore:
    """Assemble a store from (id, vector) pairs, sorting by id.

    Vectors are cast to float32 (the stored precision) before the finiteness
    check, so values that overflow float32 are rejected here rather than
    corrupting scores later. Input order never affects the result.
    """
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    ids_list: list[int] = []
    rows: list[np.ndarray] = []
    for image_id, vector in records:
        # Overflowing float32 yields inf here and is rejected as non-finite
        # below; silence the cast warning for that handled case.
        with np.errstate(over="ignore"):
            row = np.asarray(vector, dtype=np.float32).reshape(-1)
        if row.shape[0] != dimension:
            raise DimensionMismatch(dimension, int(row.shape[0]))
        ids_list.append(int(image_id))
        rows.append(row)
    ids = np.asarray(ids_list, dtype=np.uint64)
    vectors = np.vstack(rows) if rows else np.empty((0, dimension), dtype=np.float32)
    return store_from_arrays(ids, vectors)


def store_from_arrays(
    ids: np.ndarray, vectors: np.ndarray, dimension: int | None = None
) -> EmbeddingStore:
    """Vectorized construction path for already-batched inputs.

    Same validation as :func:`build_store`: unique ids, float32-finite
    components, result sorted by id. ``dimension``, when given, asserts the
    expected vector width.
    """
    ids = np.asarray(ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2:
        raise ValueError("vectors must be a 2-D array")
    if dimension is not None and vectors.shape[1] != dimension:
        raise DimensionMismatch(dimension, int(vectors.shape[1]))
    if ids.shape[0] != vectors.shape[0]:
        raise ValueError("ids and vectors row counts differ")
    order = np.argsort(ids, kind="stable")
    ids = ids[order]
    vectors = vectors[order]
    if len(ids) > 1:
        dup = np.flatnonzero(ids[1:] == ids[:-1])
        if dup.size:
            raise DuplicateId(int(ids[dup[0]]))
    bad = ~np.isfinite(vectors).all(axis=1)
    if bad.any():
        raise NonFiniteComponent(int(ids[int(np.flatnonzero(bad)[0])]))
    return EmbeddingStore(ids, vectors)


def save_store(store: EmbeddingStore, destination: ByteSink) -> int:
    """Write the canonical binary layout; returns bytes written."""
    try:
        if isinstance(destination, (str, Path)):
            with open(destination, "wb") as sink:
                return _write_chunks(store, sink)
        return _write_chunks(store, destination)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def _write_chunks(store: EmbeddingStore, sink: BinaryIO) -> int:
    written = 0
    for chunk in store.iter_encoded_chunks():
        sink.write(chunk)
        written += len(chunk)
    return written


def open_store(source: ByteSource) -> EmbeddingStore:
    """Read and validate a cache file.

    Checks magic, version, count-vs-payload consistency and id monotonicity;
    the returned store owns its arrays (no references into ``source``).
    """
    data = _read_all(source)
    header = read_header(data)
    dim, count = header.dimension, header.count
    expected = count * (8 + 4 * dim)
    payload = memoryview(data)[HEADER_SIZE:]
    if len(payload) < expected:
        raise TruncatedPayload(f"need {expected} payload bytes, have {len(payload)}")
    if len(payload) > expected:
        raise IoFailure(f"{len(payload) - expected} trailing bytes after last record")
    if dim < 1:
        raise IoFailure("header dimension must be >= 1")
    parsed = np.frombuffer(payload, dtype=_record_dtype(dim))
    ids = parsed["id"].copy()
    vectors = np.ascontiguousarray(parsed["vec"])
    if len(ids) > 1:
        ok = ids[1:] > ids[:-1]
        if not ok.all():
            raise UnsortedIds(int(np.flatnonzero(~ok)[0]) + 1)
    return EmbeddingStore(ids, vectors)


def read_header(data: bytes) -> StoreHeader:
    if len(data) < HEADER_SIZE:
        raise TruncatedPayload(f"file shorter than the {HEADER_SIZE}-byte header")
    parsed = np.frombuffer(data[:HEADER_SIZE], dtype=_HEADER_DTYPE)[0]
    if bytes(parsed["magic"]) != MAGIC:
        raise BadMagic(bytes(parsed["magic"]))
    if int(parsed["version"]) != FORMAT_VERSION:
        raise UnsupportedVersion(int(parsed["version"]))
    return StoreHeader(bytes(parsed["magic"]), int(parsed["version"]), int(parsed["dimension"]), int(parsed["count"]))


def read_embedding_records(source: ByteSource) -> tuple[np.ndarray, np.ndarray]:
    """Lenient reader for externally produced embedding binaries.

    Same layout as the cache, but ids may arrive unsorted (encoders emit in
    their own order); feed the result to :func:`store_from_arrays` to build
    the canonical cache. Truncation and magic/version problems still raise.
    """
    data = _read_all(source)
    header = read_header(data)
    expected = header.count * (8 + 4 * header.dimension)
    payload = memoryview(data)[HEADER_SIZE:]
    if len(payload) < expected:
        raise TruncatedPayload(f"need {expected} payload bytes, have {len(payload)}")
    if len(payload) > expected:
        raise IoFailure(f"{len(payload) - expected} trailing bytes after last record")
    parsed = np.frombuffer(payload, dtype=_record_dtype(header.dimension))
    return parsed["id"].copy(), np.ascontiguousarray(parsed["vec"])


def _read_all(source: ByteSource) -> bytes:
    try:
        if isinstance(source, (str, Path)):
            return Path(source).read_bytes()
        if isinstance(source, bytes):
            return source
        if isinstance(source, (bytearray, memoryview)):
            return bytes(source)
        return source.read()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def store_to_bytes(store: EmbeddingStore) -> bytes:
    buf = io.BytesIO()
    save_store(store, buf)
    return buf.getvalue()
