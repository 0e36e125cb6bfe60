"""End-to-end document processing into the retrieval engine's input files.

One call turns a document batch into everything the engine's index builder
and batch runner consume: an entity vocabulary embedding (binary + sidecar),
summary embeddings (binary + sidecar, one row per query), the query JSONL,
and a metadata JSON recording the models and decoding settings that produced
the artifacts.
"""

from __future__ import annotations

from pathlib import Path

from .documents import DocumentRecord, ToolchainConfig
from .encode import encode_texts
from .formats import write_metadata, write_queries
from .ner import extract_entities
from .summarize import decoding_settings, summarize

FILENAMES = {
    "entities_binary": "entities.bin",
    "entities_sidecar": "entities.jsonl",
    "summaries_binary": "summaries.bin",
    "summaries_sidecar": "summaries.jsonl",
    "queries": "queries.jsonl",
    "metadata": "metadata.json",
}


def process_documents(
    documents: list[DocumentRecord],
    config: ToolchainConfig,
    out_dir: str | Path,
) -> dict:
    """Process a batch into engine-ready files; returns paths and counts."""
    if not documents:
        raise ValueError("no documents to process")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {key: out_dir / name for key, name in FILENAMES.items()}

    per_query_entities = {
        doc.query_id: extract_entities(doc, config) for doc in documents
    }
    summaries = {doc.query_id: summarize(doc, config) for doc in documents}

    vocabulary = sorted({
        entity for entities in per_query_entities.values() for entity in entities
    })
    if not vocabulary:
        raise ValueError("no entities extracted from any document")
    entity_entries = list(enumerate(vocabulary))
    encode_texts(entity_entries, paths["entities_binary"],
                 paths["entities_sidecar"], config)

    summary_entries = [
        (doc.query_id, summaries[doc.query_id]) for doc in documents
    ]
    encode_texts(summary_entries, paths["summaries_binary"],
                 paths["summaries_sidecar"], config)

    write_queries(
        [(doc.query_id, per_query_entities[doc.query_id], doc.query_id)
         for doc in documents],
        paths["queries"],
    )

    write_metadata(
        {
            "ner_model": config.ner_model,
            "summarizer_model": config.summarizer_model,
            "encoder_model": config.encoder_model,
            "decoding": decoding_settings(config),
            "dimension": config.dimension,
            "seed": config.seed,
            "batch_size": config.batch_size,
            "device": config.device,
            "documents": len(documents),
            "entity_vocabulary": len(vocabulary),
        },
        paths["metadata"],
    )

    return {
        "documents": len(documents),
        "entity_vocabulary": len(vocabulary),
        "entity_mentions": sum(len(v) for v in per_query_entities.values()),
        "paths": {key: str(path) for key, path in paths.items()},
    }
