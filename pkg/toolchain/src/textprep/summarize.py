"""Document summarization.

The default "lead" backend is extractive and fully deterministic: it keeps
leading sentences while they fit the token budget, falling back to a hard
token truncation of the first sentence when even that is too long. The
"bart" backend defers to a sequence-to-sequence model when the transformers
library is installed; decoding is greedy so repeat runs stay identical.
"""

from __future__ import annotations

import re

from .documents import DocumentRecord, ToolchainConfig
from .errors import InputTooLong, ModelUnavailable

_SENTENCE = re.compile(r"[^.!?]+[.!?]*\s*")


def decoding_settings(config: ToolchainConfig) -> dict:
    """The decoding parameters recorded in output metadata."""
    if config.summarizer_model == "lead":
        return {
            "strategy": "leading-sentences",
            "token_budget": config.max_summary_tokens,
            "input_limit": config.input_limit,
            "truncate_long_inputs": config.truncate_long_inputs,
        }
    return {
        "strategy": "greedy",
        "num_beams": 1,
        "do_sample": False,
        "max_new_tokens": config.max_summary_tokens,
        "input_limit": config.input_limit,
        "truncate_long_inputs": config.truncate_long_inputs,
    }


def _bounded_input(doc: DocumentRecord, config: ToolchainConfig) -> str:
    tokens = doc.text.split()
    if len(tokens) <= config.input_limit:
        return doc.text
    if not config.truncate_long_inputs:
        raise InputTooLong(
            f"document {doc.query_id} has {len(tokens)} tokens, over the "
            f"{config.summarizer_model} limit {config.input_limit} and truncation is off"
        )
    return " ".join(tokens[:config.input_limit])


def _lead_summary(text: str, budget: int) -> str:
    kept: list[str] = []
    used = 0
    for match in _SENTENCE.finditer(text):
        sentence = match.group().strip()
        if not sentence:
            continue
        length = len(sentence.split())
        if used + length > budget:
            break
        kept.append(sentence)
        used += length
    if not kept:
        # First sentence alone is over budget: hard-truncate by tokens.
        return " ".join(text.split()[:budget])
    return " ".join(kept)


def _bart_summary(text: str, config: ToolchainConfig) -> str:
    try:
        from transformers import pipeline
    except ImportError as exc:
        raise ModelUnavailable(
            "bart backend needs the transformers package: "
            "pip install transformers torch"
        ) from exc
    summarizer = pipeline(
        "summarization", model="facebook/bart-large-cnn", device=config.device
    )
    output = summarizer(
        text, max_length=config.max_summary_tokens, num_beams=1, do_sample=False
    )
    return output[0]["summary_text"].strip()


def summarize(doc: DocumentRecord, config: ToolchainConfig) -> str:
    """A summary no longer than the configured token budget."""
    text = _bounded_input(doc, config)
    if config.summarizer_model == "lead":
        return _lead_summary(text, config.max_summary_tokens)
    return _bart_summary(text, config)
