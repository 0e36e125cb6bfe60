"""Qrels and run-file handling plus the two reported metrics.

Recall@K and MRR@K are macro-averaged over judged queries. Judged queries
missing from the run score zero (missing output is a system failure, not a
free pass); run queries without judgments are skipped with a warning. The
evaluator trusts the run's explicit rank order and never re-sorts by score.

Text formats, one record per line, whitespace separated:

    qrels:  ``qid 0 docid rel``           (rel > 0 means relevant)
    run:    ``qid Q0 docid rank score tag`` (rank 1-based, score %.6f,
            ascending qid, ranks ascending within a query)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO, Union

from .errors import MalformedLine, NoCandidates, NoJudgedQueries

logger = logging.getLogger(__name__)

Qrels = dict[int, set[int]]
TextSource = Union[str, Path, TextIO]
TextSink = Union[str, Path, TextIO]


def _read_lines(source: TextSource) -> list[str]:
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8").splitlines()
    return source.read().splitlines()


def load_qrels(source: TextSource) -> Qrels:
    """Parse relevance judgments; rel > 0 marks a document relevant.

    Queries left with no relevant documents are dropped with a warning so
    downstream averages never divide by zero.
    """
    qrels: Qrels = {}
    seen_queries: set[int] = set()
    for line_no, line in enumerate(_read_lines(source), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise MalformedLine(line_no, line)
        try:
            qid, docid, rel = int(parts[0]), int(parts[2]), int(parts[3])
        except ValueError:
            raise MalformedLine(line_no, line) from None
        seen_queries.add(qid)
        if rel > 0:
            qrels.setdefault(qid, set()).add(docid)
    dropped = seen_queries - qrels.keys()
    if dropped:
        logger.warning("dropped %d queries with no relevant documents", len(dropped))
    return qrels


def write_qrels(qrels: Qrels, destination: TextSink) -> int:
    lines = [
        f"{qid} 0 {docid} 1"
        for qid in sorted(qrels)
        for docid in sorted(qrels[qid])
    ]
    _write_lines(lines, destination)
    return len(lines)


@dataclass
class RunFile:
    """Ranked retrieval output for a batch of queries.

    Rankings are stored in rank order (position i is rank i+1); writers emit
    and loaders verify contiguous 1-based ranks and per-query unique ids.
    """

    tag: str = "picrank"
    rankings: dict[int, list[tuple[int, float]]] = field(default_factory=dict)

    def add_ranking(self, query_id: int, ranked: Iterable[tuple[int, float]]) -> None:
        self.rankings[int(query_id)] = [(int(doc), float(score)) for doc, score in ranked]

    def query_ids(self) -> list[int]:
        return sorted(self.rankings)

    def line_count(self) -> int:
        return sum(len(r) for r in self.rankings.values())

    def write(self, destination: TextSink) -> int:
        lines = [
            f"{qid} Q0 {docid} {rank} {score:.6f} {self.tag}"
            for qid in self.query_ids()
            for rank, (docid, score) in enumerate(self.rankings[qid], start=1)
        ]
        _write_lines(lines, destination)
        return len(lines)

    @classmethod
    def load(cls, source: TextSource) -> "RunFile":
        run = cls()
        tags: set[str] = set()
        for line_no, line in enumerate(_read_lines(source), start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise MalformedLine(line_no, line)
            qid_s, _q0, docid_s, rank_s, score_s, tag = parts
            try:
                qid, docid, rank, score = int(qid_s), int(docid_s), int(rank_s), float(score_s)
            except ValueError:
                raise MalformedLine(line_no, line) from None
            entries = run.rankings.setdefault(qid, [])
            if rank != len(entries) + 1:
                raise MalformedLine(line_no, f"rank {rank} breaks 1..n contiguity for query {qid}")
            if any(docid == d for d, _ in entries):
                raise MalformedLine(line_no, f"duplicate doc {docid} for query {qid}")
            entries.append((docid, score))
            tags.add(tag)
        if tags:
            run.tag = sorted(tags)[0]
        return run


def _write_lines(lines: list[str], destination: TextSink) -> None:
    text = "\n".join(lines)
    if lines:
        text += "\n"
    if isinstance(destination, (str, Path)):
        Path(destination).write_text(text, encoding="utf-8")
    else:
        destination.write(text)


def _judged_queries(run: RunFile, qrels: Qrels) -> None:
    unjudged = [qid for qid in run.rankings if qid not in qrels]
    if unjudged:
        logger.warning("skipping %d run queries absent from qrels", len(unjudged))


def recall_at_k(run: RunFile, qrels: Qrels, k: int) -> float:
    """Macro-averaged fraction of each query's relevant docs in its top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not qrels:
        raise NoJudgedQueries()
    _judged_queries(run, qrels)
    total = 0.0
    for qid, relevant in qrels.items():
        retrieved = {docid for docid, _ in run.rankings.get(qid, [])[:k]}
        total += len(relevant & retrieved) / len(relevant)
    return total / len(qrels)


def mrr_at_k(run: RunFile, qrels: Qrels, k: int) -> float:
    """Macro-averaged reciprocal rank of the first relevant doc in the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not qrels:
        raise NoJudgedQueries()
    _judged_queries(run, qrels)
    total = 0.0
    for qid, relevant in qrels.items():
        for rank, (docid, _) in enumerate(run.rankings.get(qid, [])[:k], start=1):
            if docid in relevant:
                total += 1.0 / rank
                break
    return total / len(qrels)


def overlap_ratio(stats: Sequence) -> float:
    """Fraction of pre-union postings removed as duplicates, over a batch.

    ``stats`` elements need ``size`` (deduplicated pool size) and
    ``pre_dedup_size`` attributes, as produced by candidate gathering.
    """
    total_unique = sum(int(s.size) for s in stats)
    total_pre = sum(int(s.pre_dedup_size) for s in stats)
    if total_pre == 0:
        raise NoCandidates()
    return 1.0 - total_unique / total_pre
