"""Toolchain integration acceptance, one printed verdict line.

Runs 100 hand-written documents through the full preprocessing pipeline,
feeds every emitted file to the retrieval engine (its Python loaders must
accept them with zero warnings, its CLI must index, rank, and score them),
and locks entity normalization parity through the shared golden vectors.
"""

from __future__ import annotations

import json
import logging
import subprocess
import sys
import warnings
from contextlib import contextmanager
from pathlib import Path

import pytest

import textprep as tp
from tp_corpus import EXPECTED_ENTITIES, build_documents

GOLDEN = Path(__file__).parent / "data" / "normalize_golden.json"

_CAPTURE_MANAGER = None


@pytest.fixture(autouse=True, scope="module")
def _route_verdicts_past_capture(pytestconfig):
    # Default capture redirects the stdout file descriptor itself, so the
    # verdict line must go through the capture manager to reach the terminal.
    global _CAPTURE_MANAGER
    _CAPTURE_MANAGER = pytestconfig.pluginmanager.getplugin("capturemanager")
    yield
    _CAPTURE_MANAGER = None


def _report(number: int, description: str, passed: bool) -> None:
    line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'} {description}\n"
    if _CAPTURE_MANAGER is not None:
        with _CAPTURE_MANAGER.global_and_fixture_disabled():
            sys.stdout.write(line)
            sys.stdout.flush()
    else:
        sys.stdout.write(line)
        sys.stdout.flush()


@contextmanager
def criterion(number: int, description: str):
    try:
        yield
    except BaseException:
        _report(number, description, False)
        raise
    _report(number, description, True)


def _engine_cli(*args: str) -> tuple[dict, list[str]]:
    process = subprocess.run(
        [sys.executable, "-m", "picrank.cli", *args],
        capture_output=True, text=True,
    )
    assert process.returncode == 0, process.stderr
    noisy = [line for line in process.stderr.splitlines()
             if "WARNING" in line or "ERROR" in line]
    return json.loads(process.stdout), noisy


def test_criterion_9_toolchain_integration(tmp_path, documents_100):
    desc = ("100 documents preprocess into engine files that load with zero "
            "warnings, rank end to end, and share normalization golden vectors")
    with criterion(9, desc):
        config = tp.ToolchainConfig(max_summary_tokens=128, dimension=64, seed=5)
        art = tmp_path / "art"
        summary = tp.process_documents(documents_100, config, art)
        assert summary["documents"] == 100

        vocabulary = [json.loads(line)["text"] for line in
                      (art / "entities.jsonl").read_text("utf-8").splitlines()]
        for expected in EXPECTED_ENTITIES:
            assert expected in vocabulary, expected

        # Image collection: one planted row per query holding the encoded
        # summary text (bit-identical to that query's summary embedding)
        # plus 500 distractor captions built from the entity vocabulary.
        summaries = {doc.query_id: tp.summarize(doc, config)
                     for doc in documents_100}
        assert len(set(summaries.values())) == len(summaries)
        image_texts = [(100000 + qid, text) for qid, text in summaries.items()]
        image_texts += [
            (i, f"archive scene {i} filed under {vocabulary[i % len(vocabulary)]}")
            for i in range(500)
        ]
        tp.encode_texts(image_texts, tmp_path / "images.bin",
                        tmp_path / "images.jsonl", config)
        tp.write_qrels({qid: [100000 + qid] for qid in summaries},
                       tmp_path / "qrels.txt")

        # The engine's own loaders must accept every emitted file silently.
        import picrank

        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            logger = logging.getLogger("picrank")
            records: list[logging.LogRecord] = []
            handler = logging.Handler()
            handler.emit = records.append
            handler.setLevel(logging.WARNING)
            logger.addHandler(handler)
            try:
                entities = picrank.load_text_embeddings(
                    art / "entities.bin", art / "entities.jsonl")
                engine_summaries = picrank.load_text_embeddings(
                    art / "summaries.bin", art / "summaries.jsonl")
                queries = picrank.read_queries(art / "queries.jsonl")
                qrels = picrank.load_qrels(tmp_path / "qrels.txt")
            finally:
                logger.removeHandler(handler)
        assert len(entities.ids()) == summary["entity_vocabulary"]
        assert len(engine_summaries.ids()) == 100
        assert len(queries) == 100
        assert len(qrels) == 100
        assert records == []
        assert [w for w in caught if issubclass(w.category, Warning)] == []

        # Emitted entity keys are fix-points of the engine's normalizer.
        for entity in vocabulary:
            assert picrank.normalize_entity(entity) == entity

        # Full pipeline through the engine CLI, warnings forbidden throughout.
        total = len(image_texts)
        noise: list[str] = []
        _, lines = _engine_cli("build-cache", "--embeddings", str(tmp_path / "images.bin"),
                               "--cache", str(tmp_path / "cache.bin"))
        noise += lines
        _, lines = _engine_cli("build-index", "--cache", str(tmp_path / "cache.bin"),
                               "--entities-bin", str(art / "entities.bin"),
                               "--entities-sidecar", str(art / "entities.jsonl"),
                               "--k-build", str(total), "--index", str(tmp_path / "index.bin"))
        noise += lines
        _, lines = _engine_cli("batch", "--cache", str(tmp_path / "cache.bin"),
                               "--index", str(tmp_path / "index.bin"),
                               "--queries", str(art / "queries.jsonl"),
                               "--summaries-bin", str(art / "summaries.bin"),
                               "--summaries-sidecar", str(art / "summaries.jsonl"),
                               "--k-query", str(total), "--depth", "1000",
                               "--run-out", str(tmp_path / "run.txt"))
        noise += lines
        scores, lines = _engine_cli("eval", "--run", str(tmp_path / "run.txt"),
                                    "--qrels", str(tmp_path / "qrels.txt"),
                                    "--recall-k", "1000", "--mrr-k", "10")
        noise += lines
        assert noise == [], noise
        assert scores["judged_queries"] == 100
        assert scores["mrr@10"] == 1.0
        assert scores["recall@1000"] == 1.0

        # Shared golden vectors: both normalizers reproduce every pair.
        pairs = json.loads(GOLDEN.read_text("utf-8"))
        assert len(pairs) >= 20
        for pair in pairs:
            assert tp.normalize_text(pair["raw"]) == pair["normalized"]
            assert picrank.normalize_entity(pair["raw"]) == pair["normalized"]
