"""Text embedding export.

The default "hashed" backend is a deterministic stand-in for a frozen text
encoder: each whitespace token hashes to a seeded pseudo-random unit vector,
token vectors are averaged in float64 and the mean is re-normalized. Equal
texts always produce bit-identical vectors. The "neural" backend defers to a
sentence-transformer when that library is installed.
"""

from __future__ import annotations

from functools import lru_cache
from hashlib import blake2b

import numpy as np

from .documents import ToolchainConfig
from .errors import DuplicateTextId, EmptyText, ModelUnavailable, NonFiniteVector
from .formats import write_embedding_records, write_sidecar

_PERSON = b"textprep"


@lru_cache(maxsize=65536)
def _token_vector(token: str, dimension: int, seed: int) -> np.ndarray:
    digest = blake2b(
        token.encode("utf-8"), digest_size=8,
        key=seed.to_bytes(8, "little"), person=_PERSON,
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    while True:
        vector = rng.standard_normal(dimension)
        norm = float(np.linalg.norm(vector))
        if norm > 0.0:
            vector /= norm
            vector.setflags(write=False)
            return vector


def hashed_encode_text(text: str, config: ToolchainConfig) -> np.ndarray:
    tokens = text.split()
    if not tokens:
        raise EmptyText("cannot encode text with no tokens")
    accumulator = np.zeros(config.dimension, dtype=np.float64)
    for token in tokens:
        accumulator += _token_vector(token, config.dimension, config.seed)
    accumulator /= len(tokens)
    norm = float(np.linalg.norm(accumulator))
    if norm == 0.0:
        # Opposing token vectors cancelled; fall back to hashing the whole text.
        return np.asarray(
            _token_vector("\x00".join(tokens), config.dimension, config.seed),
            dtype=np.float32,
        )
    result = (accumulator / norm).astype(np.float32)
    if not np.all(np.isfinite(result)):
        raise NonFiniteVector("encoded vector has a non-finite component")
    return result


def _neural_encode(texts: list[str], config: ToolchainConfig) -> np.ndarray:
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ModelUnavailable(
            "neural backend needs the sentence-transformers package: "
            "pip install sentence-transformers"
        ) from exc
    model = SentenceTransformer("all-MiniLM-L6-v2", device=config.device)
    return model.encode(
        texts, batch_size=config.batch_size,
        convert_to_numpy=True, normalize_embeddings=True,
    ).astype(np.float32)


def encode_texts(
    entries: list[tuple[int, str]],
    binary_destination,
    sidecar_destination,
    config: ToolchainConfig,
) -> int:
    """Embed (id, text) pairs into an embedding binary plus text sidecar."""
    if not entries:
        raise EmptyText("nothing to encode")
    seen: set[int] = set()
    for entry_id, text in entries:
        if entry_id in seen:
            raise DuplicateTextId(f"id {entry_id} appears twice")
        seen.add(entry_id)
        if not text.split():
            raise EmptyText(f"id {entry_id} has no tokens to encode")

    vectors: list[np.ndarray] = []
    if config.encoder_model == "hashed":
        for start in range(0, len(entries), config.batch_size):
            for _, text in entries[start:start + config.batch_size]:
                vectors.append(hashed_encode_text(text, config))
    else:
        encoded = _neural_encode([text for _, text in entries], config)
        vectors.extend(encoded)

    records = [(entry_id, vector) for (entry_id, _), vector in zip(entries, vectors)]
    dimension = vectors[0].shape[0]
    write_embedding_records(records, binary_destination, dimension)
    write_sidecar([(entry_id, text) for entry_id, text in entries], sidecar_destination)
    return len(records)
