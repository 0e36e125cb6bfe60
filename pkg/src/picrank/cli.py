"""Command-line surface for the retrieval engine.

Every subcommand prints one machine-readable JSON summary on standard
output and keeps human-oriented logging on standard error; the exit
status is 0 exactly when no error was reported. Binary artifacts are
bit-reproducible, so rerunning a command on identical inputs rewrites
identical files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from typing import Callable, Sequence

import numpy as np

from .encoder_io import (
    MockEncoderConfig,
    SynthCorpusSpec,
    attach_summary_vectors,
    generate_synth_corpus,
    load_text_embeddings,
    mock_encode_text,
    read_queries,
    write_synth_corpus,
)
from .entity_index import (
    build_entity_index,
    extend_index,
    open_index,
    save_index,
    verify_store_match,
)
from .errors import PicrankError
from .evaluation import RunFile, load_qrels, mrr_at_k, overlap_ratio, recall_at_k
from .pipeline import (
    MODES,
    SR_FULL,
    TWO_STAGE,
    PipelineConfig,
    QueryDocument,
    batch_run,
    run_query,
)
from .store import open_store, read_embedding_records, save_store, store_from_arrays

logger = logging.getLogger("picrank.cli")


def _fingerprint_hex(value: int) -> str:
    return f"{value:016x}"


def _load_pair(cache_path: str, index_path: str):
    store = open_store(cache_path)
    index = open_index(index_path)
    verify_store_match(index, store)
    return store, index


def _check_k_query(k_query: int, k_build: int, mode: str = TWO_STAGE) -> None:
    # sr_full never consults postings, so its k_query is inert.
    if mode != SR_FULL and k_query > k_build:
        raise ValueError(
            f"k_query {k_query} exceeds the index build depth {k_build}; "
            "rebuild the index with a larger --k-build"
        )


def _maybe_attach_summaries(args, queries) -> None:
    if getattr(args, "summaries_bin", None) is None:
        return
    if args.summaries_sidecar is None:
        raise ValueError("--summaries-bin requires --summaries-sidecar")
    embeddings = load_text_embeddings(args.summaries_bin, args.summaries_sidecar)
    resolved = attach_summary_vectors(queries, embeddings)
    logger.info("resolved %d summary vectors from %s", resolved, args.summaries_bin)


def _maybe_encoder(args, dimension: int) -> Callable[[str], np.ndarray] | None:
    if not getattr(args, "mock_encoder", False):
        return None
    config = MockEncoderConfig(dimension=dimension, seed=args.seed)
    return lambda text: mock_encode_text(text, config)


# -- subcommands ---------------------------------------------------------------


def cmd_build_cache(args) -> dict:
    ids, vectors = read_embedding_records(args.embeddings)
    store = store_from_arrays(ids, vectors)
    written = save_store(store, args.cache)
    return {
        "command": "build-cache",
        "cache": args.cache,
        "count": store.count,
        "dimension": store.dimension,
        "fingerprint": _fingerprint_hex(store.fingerprint()),
        "bytes_written": written,
    }


def cmd_build_index(args) -> dict:
    store = open_store(args.cache)
    entities = load_text_embeddings(args.entities_bin, args.entities_sidecar)
    pairs = [(text, vector) for _, (text, vector) in entities.items()]
    index, report = build_entity_index(pairs, store, k_build=args.k_build)
    written = save_index(index, args.index)
    return {
        "command": "build-index",
        "index": args.index,
        "k_build": index.k_build,
        "entities_in": report.entities_in,
        "entities_indexed": report.entities_indexed,
        "duplicates_collapsed": report.duplicates_collapsed,
        "store_fingerprint": _fingerprint_hex(index.store_fingerprint),
        "bytes_written": written,
    }


def cmd_extend_index(args) -> dict:
    store, index = _load_pair(args.cache, args.index)
    entities = load_text_embeddings(args.entities_bin, args.entities_sidecar)
    pairs = [(text, vector) for _, (text, vector) in entities.items()]
    extended, report = extend_index(index, pairs, store)
    out_path = args.index_out or args.index
    written = save_index(extended, out_path)
    return {
        "command": "extend-index",
        "index": out_path,
        "k_build": extended.k_build,
        "entities_in": report.entities_in,
        "entities_indexed": report.entities_indexed,
        "existing_skipped": report.existing_skipped,
        "duplicates_collapsed": report.duplicates_collapsed,
        "total_entities": len(extended.entries),
        "bytes_written": written,
    }


def _single_query_from_args(args) -> QueryDocument:
    query = QueryDocument(
        query_id=args.query_id,
        entities=list(args.entity or []),
        summary_text=args.summary_text,
        summary_embedding_id=args.summary_id,
    )
    if query.summary_text is not None and query.summary_embedding_id is not None:
        raise ValueError("give at most one of --summary-text / --summary-id")
    return query


def cmd_query(args) -> dict:
    store, index = _load_pair(args.cache, args.index)
    _check_k_query(args.k_query, index.k_build, args.mode)
    query = _single_query_from_args(args)
    _maybe_attach_summaries(args, [query])
    if query.summary_embedding_id is not None and query.summary_vector is None:
        raise ValueError("--summary-id needs --summaries-bin/--summaries-sidecar")
    config = PipelineConfig(
        mode=args.mode,
        k_query=args.k_query,
        depth=args.depth,
        fallback_to_full=args.fallback_full,
    )
    encoder = _maybe_encoder(args, store.dimension)
    result = run_query(query, index, store, config, encoder=encoder)
    if args.run_out:
        run = RunFile(tag=args.tag)
        run.add_ranking(query.query_id, result.ranking)
        run.write(args.run_out)
    return {
        "command": "query",
        "query_id": query.query_id,
        "mode": config.mode,
        "entities_found": result.candidates.entities_found,
        "entities_disregarded": result.candidates.entities_disregarded,
        "pool_size": result.candidates.size,
        "skipped_unknown_ids": result.skipped_unknown,
        "used_fallback": result.used_fallback,
        "results": [
            {"rank": rank, "id": int(doc_id), "score": float(score)}
            for rank, (doc_id, score) in enumerate(result.ranking, start=1)
        ],
    }


def cmd_batch(args) -> dict:
    store, index = _load_pair(args.cache, args.index)
    _check_k_query(args.k_query, index.k_build, args.mode)
    queries = read_queries(args.queries)
    _maybe_attach_summaries(args, queries)
    config = PipelineConfig(
        mode=args.mode,
        k_query=args.k_query,
        depth=args.depth,
        fallback_to_full=args.fallback_full,
    )
    encoder = _maybe_encoder(args, store.dimension)
    threads = args.threads if args.threads > 0 else (os.cpu_count() or 1)
    batch = batch_run(
        queries,
        index,
        store,
        config,
        run_tag=args.tag,
        encoder=encoder,
        threads=threads,
    )
    lines = batch.run.write(args.run_out)
    pools = [r.candidates for r in batch.results if r.candidates.pre_dedup_size > 0]
    mean_pool = (
        float(np.mean([c.size for c in pools])) if pools else 0.0
    )
    summary = {
        "command": "batch",
        "run_out": args.run_out,
        "mode": config.mode,
        "k_query": config.k_query,
        "depth": config.depth,
        "queries": len(queries),
        "lines_written": lines,
        "mean_pool_size": mean_pool,
        "entities_disregarded": sum(r.candidates.entities_disregarded for r in batch.results),
        "threads": threads,
    }
    if pools:
        summary["overlap_ratio"] = overlap_ratio(pools)
    return summary


def cmd_eval(args) -> dict:
    run = RunFile.load(args.run)
    qrels = load_qrels(args.qrels)
    return {
        "command": "eval",
        "run": args.run,
        "judged_queries": len(qrels),
        "run_queries": len(run.rankings),
        f"recall@{args.recall_k}": recall_at_k(run, qrels, args.recall_k),
        f"mrr@{args.mrr_k}": mrr_at_k(run, qrels, args.mrr_k),
    }


def cmd_synth(args) -> dict:
    spec = SynthCorpusSpec(
        image_count=args.image_count,
        query_count=args.query_count,
        entities_per_query=args.entities_per_query,
        vocab_size=args.vocab_size,
        dimension=args.dim,
        seed=args.seed,
        noise_scale=args.noise_scale,
    )
    corpus = generate_synth_corpus(spec)
    paths = write_synth_corpus(corpus, args.out_dir)
    return {
        "command": "synth",
        "out_dir": args.out_dir,
        "image_count": spec.image_count,
        "query_count": spec.query_count,
        "vocab_size": spec.vocab_size,
        "dimension": spec.dimension,
        "noise_scale": spec.noise_scale,
        "seed": spec.seed,
        "files": {name: str(path) for name, path in paths.items()},
        "cache_fingerprint": _fingerprint_hex(corpus.store.fingerprint()),
    }


def cmd_bench(args) -> dict:
    store, index = _load_pair(args.cache, args.index)
    _check_k_query(args.k_query, index.k_build)
    queries = read_queries(args.queries)
    if not queries:
        raise ValueError("benchmark needs at least one query")
    _maybe_attach_summaries(args, queries)
    missing = [q.query_id for q in queries if q.summary_vector is None]
    if missing:
        raise ValueError(f"{len(missing)} queries lack summary vectors; benchmark needs them")

    two_cfg = PipelineConfig(mode=TWO_STAGE, k_query=args.k_query, depth=args.depth)
    full_cfg = PipelineConfig(mode=SR_FULL, k_query=args.k_query, depth=args.depth)

    # Touch both paths once so first-call page faults are not billed to a mode.
    run_query(queries[0], index, store, two_cfg)
    run_query(queries[0], index, store, full_cfg)

    def _time_mode(config: PipelineConfig):
        results = []
        start = time.perf_counter()
        for _ in range(args.repeat):
            results = [run_query(q, index, store, config) for q in queries]
        elapsed = time.perf_counter() - start
        per_query_ms = elapsed * 1000.0 / (len(queries) * args.repeat)
        return per_query_ms, results

    full_ms, _ = _time_mode(full_cfg)
    two_ms, two_results = _time_mode(two_cfg)

    pools = [r.candidates for r in two_results]
    mean_pool = float(np.mean([c.size for c in pools]))
    report = {
        "command": "bench",
        "queries": len(queries),
        "repeat": args.repeat,
        "k_query": args.k_query,
        "depth": args.depth,
        "store_count": store.count,
        "dimension": store.dimension,
        "sr_full_mean_ms": full_ms,
        "two_stage_mean_ms": two_ms,
        "speedup": full_ms / two_ms if two_ms > 0 else float("inf"),
        "mean_pool_size": mean_pool,
    }
    if any(c.pre_dedup_size > 0 for c in pools):
        report["overlap_ratio"] = overlap_ratio(
            [c for c in pools if c.pre_dedup_size > 0]
        )
    return report


# -- argument parsing ----------------------------------------------------------


def _add_pipeline_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--k-query", type=int, default=10000,
                     help="postings taken per entity at query time (default 10000)")
    sub.add_argument("--depth", type=int, default=1000,
                     help="ranks reported per query (default 1000)")
    sub.add_argument("--mode", choices=MODES, default=TWO_STAGE)
    sub.add_argument("--fallback-full", action="store_true",
                     help="full-corpus scan when no entity is known")
    sub.add_argument("--mock-encoder", action="store_true",
                     help="encode summary_text with the deterministic mock encoder")
    sub.add_argument("--seed", type=int, default=0, help="mock encoder seed")
    sub.add_argument("--tag", default="picrank", help="run tag written to run files")


def _add_summaries_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--summaries-bin", help="summary embedding binary")
    sub.add_argument("--summaries-sidecar", help="summary sidecar JSONL")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="picrank",
        description="Two-stage long-text-to-image retrieval over embedding caches.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("build-cache", help="canonicalize an embedding binary")
    sub.add_argument("--embeddings", required=True, help="input embedding records")
    sub.add_argument("--cache", required=True, help="output cache file")
    sub.set_defaults(func=cmd_build_cache)

    sub = commands.add_parser("build-index", help="rank entities into a postings index")
    sub.add_argument("--cache", required=True)
    sub.add_argument("--entities-bin", required=True, help="entity embedding binary")
    sub.add_argument("--entities-sidecar", required=True, help="entity sidecar JSONL")
    sub.add_argument("--k-build", type=int, default=10000,
                     help="postings stored per entity (default 10000)")
    sub.add_argument("--index", required=True, help="output index file")
    sub.set_defaults(func=cmd_build_index)

    sub = commands.add_parser("extend-index", help="append new entities to an index")
    sub.add_argument("--cache", required=True)
    sub.add_argument("--index", required=True, help="existing index file")
    sub.add_argument("--entities-bin", required=True)
    sub.add_argument("--entities-sidecar", required=True)
    sub.add_argument("--index-out", help="output path (default: overwrite --index)")
    sub.set_defaults(func=cmd_extend_index)

    sub = commands.add_parser("query", help="run a single query")
    sub.add_argument("--cache", required=True)
    sub.add_argument("--index", required=True)
    sub.add_argument("--query-id", type=int, default=0)
    sub.add_argument("--entity", action="append", help="repeatable entity string")
    sub.add_argument("--summary-text")
    sub.add_argument("--summary-id", type=int, help="id into --summaries-bin")
    sub.add_argument("--run-out", help="also write a single-query run file")
    _add_summaries_flags(sub)
    _add_pipeline_flags(sub)
    sub.set_defaults(func=cmd_query)

    sub = commands.add_parser("batch", help="run a query JSONL into a run file")
    sub.add_argument("--cache", required=True)
    sub.add_argument("--index", required=True)
    sub.add_argument("--queries", required=True, help="query JSONL")
    sub.add_argument("--run-out", required=True, help="output run file")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker threads; 0 = one per CPU")
    _add_summaries_flags(sub)
    _add_pipeline_flags(sub)
    sub.set_defaults(func=cmd_batch)

    sub = commands.add_parser("eval", help="score a run file against qrels")
    sub.add_argument("--run", required=True)
    sub.add_argument("--qrels", required=True)
    sub.add_argument("--recall-k", type=int, default=1000)
    sub.add_argument("--mrr-k", type=int, default=10)
    sub.set_defaults(func=cmd_eval)

    sub = commands.add_parser("synth", help="generate a seeded synthetic corpus")
    sub.add_argument("--out-dir", required=True)
    sub.add_argument("--image-count", type=int, required=True)
    sub.add_argument("--query-count", type=int, required=True)
    sub.add_argument("--entities-per-query", type=int, default=3)
    sub.add_argument("--vocab-size", type=int, default=100)
    sub.add_argument("--dim", type=int, default=64)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--noise-scale", type=float, default=0.0)
    sub.set_defaults(func=cmd_synth)

    sub = commands.add_parser("bench", help="time two_stage against sr_full")
    sub.add_argument("--cache", required=True)
    sub.add_argument("--index", required=True)
    sub.add_argument("--queries", required=True)
    sub.add_argument("--k-query", type=int, default=10000)
    sub.add_argument("--depth", type=int, default=1000)
    sub.add_argument("--repeat", type=int, default=1)
    _add_summaries_flags(sub)
    sub.set_defaults(func=cmd_bench)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s %(message)s",
    )
    try:
        summary = args.func(args)
    except (PicrankError, ValueError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
