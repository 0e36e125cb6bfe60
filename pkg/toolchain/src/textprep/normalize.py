"""Entity string normalization.

This rule must stay byte-for-byte compatible with the retrieval engine's
normalizer: whitespace runs collapse to single spaces, the result is
casefolded. A golden vector file in the test suite locks the parity.
"""

from __future__ import annotations


def normalize_text(raw: str) -> str:
    return " ".join(raw.split()).casefold()
