"""Writers for the retrieval engine's on-disk interchange formats.

Layouts (all integers little-endian, text UTF-8):

- embedding records: 8-byte magic "T2PSEMB1", u32 version 1, u32 dimension,
  u64 count, then count records of u64 id + dimension float32 components,
  sorted by id. File size is exactly 24 + count * (8 + 4 * dimension).
- text sidecar: JSONL of {"id": <int>, "text": <str>}, sorted by id.
- query file: JSONL of {"query_id", "entities", "summary_embedding_id"}.
- qrels: whitespace-separated "query_id 0 doc_id relevance" lines.

All writers are atomic: content goes to a temporary sibling file that is
renamed over the destination only once fully written.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateTextId, NonFiniteVector

EMBEDDING_MAGIC = b"T2PSEMB1"
EMBEDDING_VERSION = 1
HEADER = struct.Struct("<8sIIQ")


def _atomic_write(destination: str | Path, data: bytes) -> None:
    destination = Path(destination)
    temporary = destination.with_name(destination.name + ".tmp")
    with open(temporary, "wb") as handle:
        handle.write(data)
        handle.flush()
        os.fsync(handle.fileno())
    os.replace(temporary, destination)


def embedding_records_bytes(
    entries: Sequence[tuple[int, np.ndarray]], dimension: int
) -> bytes:
    ordered = sorted(entries, key=lambda entry: entry[0])
    for index in range(1, len(ordered)):
        if ordered[index][0] == ordered[index - 1][0]:
            raise DuplicateTextId(f"id {ordered[index][0]} appears twice")
    parts = [HEADER.pack(EMBEDDING_MAGIC, EMBEDDING_VERSION, dimension, len(ordered))]
    for record_id, vector in ordered:
        if not 0 <= record_id < 2**64:
            raise ValueError(f"id {record_id} does not fit in an unsigned 64-bit integer")
        row = np.asarray(vector, dtype="<f4").reshape(-1)
        if row.shape[0] != dimension:
            raise ValueError(
                f"id {record_id}: vector length {row.shape[0]} != dimension {dimension}"
            )
        if not np.all(np.isfinite(row)):
            raise NonFiniteVector(f"id {record_id} has a non-finite component")
        parts.append(struct.pack("<Q", record_id))
        parts.append(row.tobytes())
    return b"".join(parts)


def write_embedding_records(
    entries: Sequence[tuple[int, np.ndarray]], destination: str | Path, dimension: int
) -> int:
    _atomic_write(destination, embedding_records_bytes(entries, dimension))
    return len(entries)


def write_sidecar(entries: Sequence[tuple[int, str]], destination: str | Path) -> int:
    lines = [
        json.dumps({"id": entry_id, "text": text}, ensure_ascii=False)
        for entry_id, text in sorted(entries, key=lambda entry: entry[0])
    ]
    _atomic_write(destination, ("\n".join(lines) + "\n" if lines else "").encode("utf-8"))
    return len(lines)


def write_queries(
    rows: Sequence[tuple[int, Sequence[str], int]], destination: str | Path
) -> int:
    lines = [
        json.dumps(
            {"query_id": query_id, "entities": list(entities),
             "summary_embedding_id": summary_id},
            ensure_ascii=False,
        )
        for query_id, entities, summary_id in rows
    ]
    _atomic_write(destination, ("\n".join(lines) + "\n" if lines else "").encode("utf-8"))
    return len(lines)


def write_qrels(judgments: dict[int, Iterable[int]], destination: str | Path) -> int:
    lines = []
    for query_id in sorted(judgments):
        for doc_id in sorted(judgments[query_id]):
            lines.append(f"{query_id} 0 {doc_id} 1")
    _atomic_write(destination, ("\n".join(lines) + "\n" if lines else "").encode("utf-8"))
    return len(lines)


def write_metadata(payload: dict, destination: str | Path) -> None:
    _atomic_write(
        destination, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")
    )
