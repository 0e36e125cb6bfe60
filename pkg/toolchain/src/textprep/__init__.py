"""textprep: document preprocessing for the picrank retrieval engine.

Extracts named entities, writes bounded summaries, and exports text
embeddings in the engine's interchange formats. All default backends are
deterministic and model-free; neural backends activate when their libraries
are installed.
"""

from . import errors
from .documents import (
    DocumentRecord,
    ToolchainConfig,
    read_documents,
    write_documents,
)
from .emit import FILENAMES, process_documents
from .encode import encode_texts, hashed_encode_text
from .errors import (
    DuplicateDocumentId,
    DuplicateTextId,
    EmptyText,
    InputTooLong,
    MalformedLine,
    ModelUnavailable,
    NonFiniteVector,
    TextprepError,
)
from .formats import (
    EMBEDDING_MAGIC,
    EMBEDDING_VERSION,
    embedding_records_bytes,
    write_embedding_records,
    write_metadata,
    write_qrels,
    write_queries,
    write_sidecar,
)
from .ner import extract_entities
from .normalize import normalize_text
from .summarize import decoding_settings, summarize

__version__ = "1.0.0"

__all__ = [
    "DocumentRecord",
    "ToolchainConfig",
    "read_documents",
    "write_documents",
    "FILENAMES",
    "process_documents",
    "encode_texts",
    "hashed_encode_text",
    "extract_entities",
    "normalize_text",
    "summarize",
    "decoding_settings",
    "EMBEDDING_MAGIC",
    "EMBEDDING_VERSION",
    "embedding_records_bytes",
    "write_embedding_records",
    "write_metadata",
    "write_qrels",
    "write_queries",
    "write_sidecar",
    "errors",
    "TextprepError",
    "ModelUnavailable",
    "InputTooLong",
    "EmptyText",
    "MalformedLine",
    "DuplicateDocumentId",
    "DuplicateTextId",
    "NonFiniteVector",
]
