"""Named-entity extraction.

The default "rule" backend is a deterministic capitalization-based tagger:
maximal runs of capitalized tokens (lowercase connectors allowed between
capitalized neighbors) become entity spans. Sentence-initial single words are
only kept when the document itself gives evidence they are names (they also
appear capitalized mid-sentence, or never appear lowercase). The "spacy"
backend defers to a statistical model when that library is installed.

Output is normalized with the same rule the retrieval engine applies to its
index keys, in document order, duplicates preserved (the engine deduplicates).
"""

from __future__ import annotations

import re

from .documents import DocumentRecord, ToolchainConfig
from .errors import ModelUnavailable
from .normalize import normalize_text

_TOKEN = re.compile(r"[^\W_]+(?:['’-][^\W_]+)*")
_SENTENCE_END = re.compile(r"[.!?]")

# Lowercase words allowed inside a span when flanked by capitalized tokens.
# Coordinators like "and"/"for" are excluded: they merge unrelated names far
# more often than they appear inside real ones.
_CONNECTORS = frozenset({
    "of", "the", "in", "de", "la", "le", "du", "da", "di",
    "del", "della", "von", "van", "der", "den", "al", "bin", "ibn",
})

# Single capitalized words that are grammar, not names.
_STOP_SINGLES = frozenset({
    "the", "a", "an", "i", "it", "he", "she", "we", "you", "they", "this",
    "that", "these", "those", "there", "here", "its", "his", "her", "their",
    "our", "my", "your", "one", "some", "many", "most", "both", "each",
    "when", "where", "while", "after", "before", "during", "although",
    "because", "since", "however", "meanwhile", "today", "yesterday",
    "tomorrow", "first", "second", "later", "now", "then", "but", "and",
    "or", "if", "as", "at", "by", "on", "in", "for", "with", "from", "to",
    "not", "no", "yes", "all", "every", "another", "other", "such", "so",
    "what", "who", "how", "why", "which", "can", "may", "will",
})

_LEADING_STRIP = frozenset({"the", "a", "an"})


def _is_capitalized(word: str) -> bool:
    return word[:1].isupper()


def _is_acronym(word: str) -> bool:
    return len(word) >= 2 and word.isupper() and word.isalpha()


def _rule_entities(text: str) -> list[str]:
    tokens = list(_TOKEN.finditer(text))
    if not tokens:
        return []

    sentence_initial = []
    previous_end = 0
    for match in tokens:
        gap = text[previous_end:match.start()]
        sentence_initial.append(previous_end == 0 or bool(_SENTENCE_END.search(gap)))
        previous_end = match.end()

    # Evidence pass: forms seen capitalized mid-sentence, and forms seen
    # lowercase anywhere, decide ambiguous sentence-initial words.
    interior_forms = {
        m.group().casefold()
        for m, initial in zip(tokens, sentence_initial)
        if not initial and _is_capitalized(m.group())
    }
    lowercase_forms = {
        m.group().casefold() for m in tokens if m.group()[:1].islower()
    }

    def adjacent(left: int, right: int) -> bool:
        return text[tokens[left].end():tokens[right].start()].isspace()

    spans: list[str] = []
    i = 0
    n = len(tokens)
    while i < n:
        if not _is_capitalized(tokens[i].group()):
            i += 1
            continue
        last_capitalized = i
        j = i + 1
        while j < n and adjacent(j - 1, j):
            word = tokens[j].group()
            if _is_capitalized(word) or word.isdigit():
                # Digits extend a started span (Apollo 11) but never begin one.
                last_capitalized = j
            elif not (word.casefold() in _CONNECTORS and j + 1 < n
                      and adjacent(j, j + 1) and _is_capitalized(tokens[j + 1].group())):
                break
            j += 1
        words = [tokens[k].group() for k in range(i, last_capitalized + 1)]
        start_initial = sentence_initial[i]
        i = last_capitalized + 1

        while words and words[0].casefold() in _LEADING_STRIP:
            words = words[1:]
        if not words:
            continue
        if len(words) == 1:
            word = words[0]
            form = word.casefold()
            if form in _STOP_SINGLES:
                continue
            if start_initial and not (
                _is_acronym(word) or form in interior_forms or form not in lowercase_forms
            ):
                continue
        spans.append(normalize_text(" ".join(words)))
    return spans


def _spacy_entities(text: str) -> list[str]:
    try:
        import spacy
    except ImportError as exc:
        raise ModelUnavailable(
            "spacy backend needs the spacy package and a model: "
            "pip install spacy && python -m spacy download en_core_web_sm"
        ) from exc
    try:
        nlp = spacy.load("en_core_web_sm")
    except OSError as exc:
        raise ModelUnavailable(
            "spacy model en_core_web_sm is not installed: "
            "python -m spacy download en_core_web_sm"
        ) from exc
    return [normalize_text(ent.text) for ent in nlp(text).ents]


def extract_entities(doc: DocumentRecord, config: ToolchainConfig) -> list[str]:
    """Entity strings from one document, normalized, in document order."""
    if config.ner_model == "rule":
        return _rule_entities(doc.text)
    return _spacy_entities(doc.text)
