"""Exception types raised by the toolchain."""

from __future__ import annotations


class TextprepError(Exception):
    """Base class for all toolchain errors."""


class ModelUnavailable(TextprepError):
    """A backend needs a model or library that is not installed."""


class InputTooLong(TextprepError):
    """Document exceeds the summarizer input limit and truncation is off."""


class EmptyText(TextprepError):
    """Text with no tokens cannot be encoded."""


class MalformedLine(TextprepError):
    """A JSONL input line failed validation."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class DuplicateDocumentId(TextprepError):
    """Two document records share a query_id."""


class DuplicateTextId(TextprepError):
    """Two texts handed to the encoder share an id."""


class NonFiniteVector(TextprepError):
    """An embedding came out with a NaN or infinity."""
