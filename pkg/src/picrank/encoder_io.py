"""Embedding transport and the model-free test harness.

Three concerns live here:

* loading externally produced text/entity/summary embeddings (binary file in
  the cache layout plus a JSONL sidecar mapping id to the original string),
* a deterministic mock encoder so tests never need a neural model,
* a seeded synthetic-corpus generator with planted relevance, giving the
  pipeline a desk-scale benchmark with known ground truth.

Mock encoding scheme (fixed so independently written oracles can agree):
each whitespace token is hashed with a seeded 64-bit blake2b, the digest
seeds a PCG64 generator, components are drawn uniform in [-1, 1], the token
vector is L2-normalized, token vectors are averaged, and the mean is
L2-normalized again. Unit-norm outputs make dot product equal cosine.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence, TextIO, Union

import numpy as np

from .errors import (
    EmptyText,
    MalformedLine,
    SidecarIdMismatch,
    UnknownId,
)
from .evaluation import Qrels, write_qrels
from .pipeline import QueryDocument
from .store import EmbeddingStore, open_store, save_store, store_from_arrays

TextSource = Union[str, Path, TextIO]
TextSink = Union[str, Path, TextIO]

_NORMALIZE_CHUNK = 65536


@dataclass(frozen=True)
class MockEncoderConfig:
    """Parameters of the deterministic mock encoder."""

    dimension: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@lru_cache(maxsize=65536)
def _token_vector(token: str, dimension: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little")
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    vec = rng.uniform(-1.0, 1.0, dimension)
    norm = float(np.linalg.norm(vec))
    while norm == 0.0:
        vec = rng.uniform(-1.0, 1.0, dimension)
        norm = float(np.linalg.norm(vec))
    vec /= norm
    vec.setflags(write=False)
    return vec


def mock_encode_text(text: str, config: MockEncoderConfig) -> np.ndarray:
    """Deterministically encode text to a float32 unit vector.

    Pure function of (text, config); identical inputs give identical bits.
    Token order does not matter because token vectors are averaged.
    """
    tokens = text.split()
    if not tokens:
        raise EmptyText()
    acc = np.zeros(config.dimension, dtype=np.float64)
    for token in tokens:
        acc += _token_vector(token, config.dimension, config.seed)
    acc /= len(tokens)
    norm = float(np.linalg.norm(acc))
    if norm == 0.0:
        # Token vectors cancelled exactly; fall back to hashing the whole
        # text as a single token so the output is still deterministic.
        return _token_vector("\x00".join(tokens), config.dimension, config.seed).astype(
            np.float32
        )
    return (acc / norm).astype(np.float32)


# ---------------------------------------------------------------------------
# Text-embedding files: binary vectors plus a JSONL sidecar of id -> string.
# ---------------------------------------------------------------------------


@dataclass
class TextEmbeddings:
    """Joint view of a text-embedding binary and its string sidecar."""

    store: EmbeddingStore
    texts: dict[int, str]

    def __len__(self) -> int:
        return self.store.count

    def __contains__(self, text_id: int) -> bool:
        return int(text_id) in self.texts

    def ids(self) -> list[int]:
        return [int(i) for i in self.store.ids]

    def vector(self, text_id: int) -> np.ndarray:
        return self.store.get_vector(text_id)

    def text(self, text_id: int) -> str:
        try:
            return self.texts[int(text_id)]
        except KeyError:
            raise UnknownId(int(text_id)) from None

    def items(self) -> Iterable[tuple[int, tuple[str, np.ndarray]]]:
        for text_id in self.ids():
            yield text_id, (self.texts[text_id], self.store.get_vector(text_id))


def _read_sidecar(source: TextSource) -> dict[int, str]:
    if isinstance(source, (str, Path)):
        raw = Path(source).read_text(encoding="utf-8")
    else:
        raw = source.read()
    texts: dict[int, str] = {}
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            raise MalformedLine(line_no, line) from None
        if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
            raise MalformedLine(line_no, line)
        text_id, text = obj["id"], obj["text"]
        if not isinstance(text_id, int) or isinstance(text_id, bool) or text_id < 0:
            raise MalformedLine(line_no, line)
        if not isinstance(text, str):
            raise MalformedLine(line_no, line)
        if text_id in texts:
            raise MalformedLine(line_no, f"duplicate sidecar id {text_id}")
        texts[text_id] = text
    return texts


def load_text_embeddings(binary_source, sidecar_source: TextSource) -> TextEmbeddings:
    """Open a text-embedding binary and its sidecar, verifying the id join."""
    store = open_store(binary_source)
    texts = _read_sidecar(sidecar_source)
    binary_ids = {int(i) for i in store.ids}
    sidecar_ids = set(texts)
    if binary_ids != sidecar_ids:
        raise SidecarIdMismatch(binary_ids - sidecar_ids, sidecar_ids - binary_ids)
    return TextEmbeddings(store=store, texts=texts)


def write_text_embeddings(
    entries: Iterable[tuple[int, str, np.ndarray]],
    binary_destination,
    sidecar_destination: TextSink,
    dimension: int,
) -> TextEmbeddings:
    """Write (id, text, vector) entries as a binary + sidecar pair."""
    entries = list(entries)
    ids = np.array([e[0] for e in entries], dtype=np.uint64)
    if len(entries) == 0:
        vectors = np.zeros((0, dimension), dtype=np.float32)
    else:
        vectors = np.stack([np.asarray(e[2], dtype=np.float32) for e in entries])
    store = store_from_arrays(ids, vectors, dimension=dimension)
    save_store(store, binary_destination)
    by_id = {int(e[0]): e[1] for e in entries}
    lines = [
        json.dumps({"id": text_id, "text": by_id[text_id]}, ensure_ascii=False)
        for text_id in sorted(by_id)
    ]
    _write_text("\n".join(lines) + ("\n" if lines else ""), sidecar_destination)
    return TextEmbeddings(store=store, texts=by_id)


def _write_text(text: str, destination: TextSink) -> None:
    if isinstance(destination, (str, Path)):
        Path(destination).write_text(text, encoding="utf-8")
    else:
        destination.write(text)


# ---------------------------------------------------------------------------
# Query JSONL.
# ---------------------------------------------------------------------------


def read_queries(source: TextSource) -> list[QueryDocument]:
    """Parse query JSONL: query_id, entities, and at most one summary field."""
    if isinstance(source, (str, Path)):
        raw = Path(source).read_text(encoding="utf-8")
    else:
        raw = source.read()
    queries: list[QueryDocument] = []
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            raise MalformedLine(line_no, line) from None
        if not isinstance(obj, dict):
            raise MalformedLine(line_no, line)
        query_id = obj.get("query_id")
        if not isinstance(query_id, int) or isinstance(query_id, bool) or query_id < 0:
            raise MalformedLine(line_no, line)
        entities = obj.get("entities", [])
        if not isinstance(entities, list) or not all(isinstance(e, str) for e in entities):
            raise MalformedLine(line_no, line)
        summary_text = obj.get("summary_text")
        summary_embedding_id = obj.get("summary_embedding_id")
        if summary_text is not None and not isinstance(summary_text, str):
            raise MalformedLine(line_no, line)
        if summary_embedding_id is not None and (
            not isinstance(summary_embedding_id, int)
            or isinstance(summary_embedding_id, bool)
            or summary_embedding_id < 0
        ):
            raise MalformedLine(line_no, line)
        if summary_text is not None and summary_embedding_id is not None:
            raise MalformedLine(line_no, f"query {query_id} carries both summary fields")
        queries.append(
            QueryDocument(
                query_id=query_id,
                entities=list(entities),
                summary_text=summary_text,
                summary_embedding_id=summary_embedding_id,
            )
        )
    return queries


def write_queries(queries: Sequence[QueryDocument], destination: TextSink) -> int:
    lines = []
    for query in queries:
        obj: dict = {"query_id": int(query.query_id), "entities": list(query.entities)}
        if query.summary_text is not None:
            obj["summary_text"] = query.summary_text
        if query.summary_embedding_id is not None:
            obj["summary_embedding_id"] = int(query.summary_embedding_id)
        lines.append(json.dumps(obj, ensure_ascii=False))
    _write_text("\n".join(lines) + ("\n" if lines else ""), destination)
    return len(lines)


def attach_summary_vectors(
    queries: Sequence[QueryDocument], embeddings: TextEmbeddings
) -> int:
    """Resolve summary_embedding_id references into in-memory vectors."""
    resolved = 0
    for query in queries:
        if query.summary_vector is None and query.summary_embedding_id is not None:
            query.summary_vector = embeddings.vector(query.summary_embedding_id)
            resolved += 1
    return resolved


# ---------------------------------------------------------------------------
# Synthetic corpus with planted relevance.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthCorpusSpec:
    """Parameters of the seeded synthetic corpus generator."""

    image_count: int
    query_count: int
    entities_per_query: int = 3
    vocab_size: int = 100
    dimension: int = 64
    seed: int = 0
    noise_scale: float = 0.0

    def __post_init__(self) -> None:
        for name in ("image_count", "query_count", "entities_per_query", "vocab_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")
        if not 0.0 <= self.noise_scale < 1.0:
            raise ValueError("noise_scale must lie in [0, 1)")
        if self.entities_per_query > self.vocab_size:
            raise ValueError("entities_per_query cannot exceed vocab_size")
        if self.query_count > self.image_count:
            raise ValueError("query_count cannot exceed image_count (one target each)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass
class SynthCorpus:
    """Generated corpus: image store, queries with planted targets, qrels."""

    spec: SynthCorpusSpec
    store: EmbeddingStore
    queries: list[QueryDocument]
    qrels: Qrels
    entity_texts: list[str]
    entity_vectors: np.ndarray
    target_ids: dict[int, int] = field(default_factory=dict)

    def entity_embeddings(self) -> Iterable[tuple[str, np.ndarray]]:
        for text, vector in zip(self.entity_texts, self.entity_vectors):
            yield text, vector


def _normalize_rows_inplace(matrix: np.ndarray) -> None:
    for start in range(0, matrix.shape[0], _NORMALIZE_CHUNK):
        block = matrix[start : start + _NORMALIZE_CHUNK]
        norms = np.linalg.norm(block.astype(np.float64), axis=1)
        zero = norms == 0.0
        if zero.any():
            block[zero, 0] = 1.0
            norms[zero] = 1.0
        block /= norms[:, None].astype(np.float32)


def generate_synth_corpus(spec: SynthCorpusSpec) -> SynthCorpus:
    """Build a seeded corpus whose relevant images are planted near their query.

    Each query draws ``entities_per_query`` distinct vocabulary entities and
    one distinct target image. The target's vector points near the mean of
    the query's entity directions (so entity postings find it), and the
    query's summary vector is the target vector perturbed by ``noise_scale``
    and renormalized; with noise_scale=0 it is the target vector, bit for bit.
    """
    rng = np.random.default_rng(spec.seed)
    config = MockEncoderConfig(dimension=spec.dimension, seed=spec.seed)

    width = max(5, len(str(spec.vocab_size - 1)))
    entity_texts = [f"topic {i:0{width}d}" for i in range(spec.vocab_size)]
    entity_vectors = np.stack([mock_encode_text(t, config) for t in entity_texts])

    vectors = rng.standard_normal((spec.image_count, spec.dimension), dtype=np.float32)
    _normalize_rows_inplace(vectors)
    ids = np.arange(spec.image_count, dtype=np.uint64)

    target_positions = rng.choice(spec.image_count, size=spec.query_count, replace=False)
    queries: list[QueryDocument] = []
    qrels: Qrels = {}
    target_ids: dict[int, int] = {}
    sqrt_dim = float(np.sqrt(spec.dimension))
    for query_id in range(spec.query_count):
        entity_idx = rng.choice(spec.vocab_size, size=spec.entities_per_query, replace=False)
        base = entity_vectors[entity_idx].astype(np.float64).mean(axis=0)
        jitter = rng.standard_normal(spec.dimension) / sqrt_dim
        target = base + 0.25 * jitter
        target /= np.linalg.norm(target)
        target32 = target.astype(np.float32)
        position = int(target_positions[query_id])
        vectors[position] = target32

        if spec.noise_scale == 0.0:
            summary = target32.copy()
        else:
            bump = rng.standard_normal(spec.dimension)
            bump /= np.linalg.norm(bump)
            perturbed = target32.astype(np.float64) + spec.noise_scale * bump
            perturbed /= np.linalg.norm(perturbed)
            summary = perturbed.astype(np.float32)

        queries.append(
            QueryDocument(
                query_id=query_id,
                entities=[entity_texts[i] for i in sorted(entity_idx)],
                summary_vector=summary,
                summary_embedding_id=query_id,
            )
        )
        qrels[query_id] = {position}
        target_ids[query_id] = position

    store = store_from_arrays(ids, vectors, dimension=spec.dimension)
    return SynthCorpus(
        spec=spec,
        store=store,
        queries=queries,
        qrels=qrels,
        entity_texts=entity_texts,
        entity_vectors=entity_vectors,
        target_ids=target_ids,
    )


def write_synth_corpus(corpus: SynthCorpus, out_dir: Union[str, Path]) -> dict[str, Path]:
    """Serialize a generated corpus into the on-disk interchange formats.

    Emits the image cache, entity and summary embedding pairs (binary +
    sidecar), the query JSONL (summaries referenced by embedding id), and
    the qrels file. Returns the path of each artifact by name.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "cache": out / "cache.bin",
        "entities_binary": out / "entities.bin",
        "entities_sidecar": out / "entities.jsonl",
        "summaries_binary": out / "summaries.bin",
        "summaries_sidecar": out / "summaries.jsonl",
        "queries": out / "queries.jsonl",
        "qrels": out / "qrels.txt",
    }
    save_store(corpus.store, paths["cache"])
    write_text_embeddings(
        (
            (i, text, corpus.entity_vectors[i])
            for i, text in enumerate(corpus.entity_texts)
        ),
        paths["entities_binary"],
        paths["entities_sidecar"],
        dimension=corpus.spec.dimension,
    )
    write_text_embeddings(
        (
            (q.query_id, f"planted summary {q.query_id}", q.summary_vector)
            for q in corpus.queries
        ),
        paths["summaries_binary"],
        paths["summaries_sidecar"],
        dimension=corpus.spec.dimension,
    )
    public = [
        QueryDocument(
            query_id=q.query_id,
            entities=list(q.entities),
            summary_embedding_id=q.summary_embedding_id,
        )
        for q in corpus.queries
    ]
    write_queries(public, paths["queries"])
    write_qrels(corpus.qrels, paths["qrels"])
    return paths
