"""Shared fixtures: small seeded stores and corpora reused across test files."""

from __future__ import annotations

import pytest

import picrank as pr

from store_factory import make_random_store


@pytest.fixture(scope="session")
def small_store() -> pr.EmbeddingStore:
    return make_random_store(500, 16, seed=101)


@pytest.fixture(scope="session")
def small_corpus() -> pr.SynthCorpus:
    spec = pr.SynthCorpusSpec(
        image_count=2000,
        query_count=25,
        entities_per_query=3,
        vocab_size=40,
        dimension=16,
        seed=7,
        noise_scale=0.0,
    )
    return pr.generate_synth_corpus(spec)


@pytest.fixture(scope="session")
def small_index(small_corpus) -> pr.EntityIndex:
    index, _ = pr.build_entity_index(
        small_corpus.entity_embeddings(), small_corpus.store, k_build=2000
    )
    return index
