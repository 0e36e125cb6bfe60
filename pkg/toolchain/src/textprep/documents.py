"""Document records and the JSONL document reader."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import DuplicateDocumentId, MalformedLine

# Summarizer input limits in whitespace tokens, by model name.
SUMMARIZER_INPUT_LIMITS = {"lead": 1024, "bart": 1024}

NER_MODELS = ("rule", "spacy")
SUMMARIZER_MODELS = ("lead", "bart")
ENCODER_MODELS = ("hashed", "neural")
DEVICES = ("cpu", "cuda")


@dataclass(frozen=True)
class DocumentRecord:
    """One long input document identified by the query id it will become."""

    query_id: int
    text: str

    def __post_init__(self) -> None:
        if not isinstance(self.query_id, int) or isinstance(self.query_id, bool):
            raise ValueError("query_id must be an integer")
        if self.query_id < 0:
            raise ValueError("query_id must be non-negative")
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError("document text must be a non-empty string")


@dataclass(frozen=True)
class ToolchainConfig:
    """Backend selection and batch settings for one processing run."""

    ner_model: str = "rule"
    summarizer_model: str = "lead"
    encoder_model: str = "hashed"
    max_summary_tokens: int = 64
    batch_size: int = 32
    device: str = "cpu"
    dimension: int = 64
    seed: int = 0
    truncate_long_inputs: bool = True

    def __post_init__(self) -> None:
        if self.ner_model not in NER_MODELS:
            raise ValueError(f"unknown NER model {self.ner_model!r}; choose from {NER_MODELS}")
        if self.summarizer_model not in SUMMARIZER_MODELS:
            raise ValueError(
                f"unknown summarizer {self.summarizer_model!r}; choose from {SUMMARIZER_MODELS}"
            )
        if self.encoder_model not in ENCODER_MODELS:
            raise ValueError(
                f"unknown encoder {self.encoder_model!r}; choose from {ENCODER_MODELS}"
            )
        if self.device not in DEVICES:
            raise ValueError(f"unknown device {self.device!r}; choose from {DEVICES}")
        if self.max_summary_tokens < 1:
            raise ValueError("max_summary_tokens must be at least 1")
        limit = SUMMARIZER_INPUT_LIMITS[self.summarizer_model]
        if self.max_summary_tokens > limit:
            raise ValueError(
                f"max_summary_tokens {self.max_summary_tokens} exceeds the "
                f"{self.summarizer_model} input limit {limit}"
            )
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.dimension < 2:
            raise ValueError("dimension must be at least 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    @property
    def input_limit(self) -> int:
        return SUMMARIZER_INPUT_LIMITS[self.summarizer_model]


def read_documents(source: str | Path) -> list[DocumentRecord]:
    """Parse a documents JSONL file of {"query_id": int, "text": str} lines."""
    records: list[DocumentRecord] = []
    seen: set[int] = set()
    with open(source, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                payload = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_number, f"invalid JSON: {exc}") from exc
            if not isinstance(payload, dict):
                raise MalformedLine(line_number, "expected a JSON object")
            extra = set(payload) - {"query_id", "text"}
            if extra:
                raise MalformedLine(line_number, f"unexpected keys {sorted(extra)}")
            if "query_id" not in payload or "text" not in payload:
                raise MalformedLine(line_number, "needs query_id and text")
            try:
                record = DocumentRecord(payload["query_id"], payload["text"])
            except ValueError as exc:
                raise MalformedLine(line_number, str(exc)) from exc
            if record.query_id in seen:
                raise DuplicateDocumentId(f"query_id {record.query_id} appears twice")
            seen.add(record.query_id)
            records.append(record)
    return records


def write_documents(records: Iterable[DocumentRecord], destination: str | Path) -> int:
    count = 0
    with open(destination, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(
                json.dumps({"query_id": record.query_id, "text": record.text},
                           ensure_ascii=False) + "\n"
            )
            count += 1
    return count
