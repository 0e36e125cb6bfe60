"""Command-line surface: full flows, JSON summaries, exit codes."""

from __future__ import annotations

import io
import json
import struct

import numpy as np
import pytest

import picrank as pr
from picrank.cli import main
from picrank.store import FORMAT_VERSION, MAGIC


def _run_cli(capsys, *argv: str) -> tuple[int, dict]:
    code = main(list(argv))
    captured = capsys.readouterr()
    summary = json.loads(captured.out) if code == 0 else {}
    return code, summary


def _write_records(path, ids, vectors) -> None:
    vectors = np.asarray(vectors, dtype=np.float32)
    blob = MAGIC + struct.pack("<IIQ", FORMAT_VERSION, vectors.shape[1], len(ids))
    for image_id, vec in zip(ids, vectors):
        blob += struct.pack("<Q", image_id) + vec.tobytes()
    path.write_bytes(blob)


@pytest.fixture()
def corpus_dir(tmp_path, capsys):
    out = tmp_path / "corpus"
    code, _ = _run_cli(
        capsys, "synth", "--out-dir", str(out),
        "--image-count", "1500", "--query-count", "12",
        "--entities-per-query", "2", "--vocab-size", "20",
        "--dim", "16", "--seed", "21", "--noise-scale", "0.0",
    )
    assert code == 0
    code, _ = _run_cli(
        capsys, "build-index",
        "--cache", str(out / "cache.bin"),
        "--entities-bin", str(out / "entities.bin"),
        "--entities-sidecar", str(out / "entities.jsonl"),
        "--k-build", "1500", "--index", str(out / "index.bin"),
    )
    assert code == 0
    return out


class TestBuildCache:
    def test_canonicalizes_unsorted_records(self, tmp_path, capsys):
        raw = tmp_path / "records.bin"
        _write_records(raw, [5, 2, 9], np.eye(3, dtype=np.float32))
        cache = tmp_path / "cache.bin"
        code, summary = _run_cli(capsys, "build-cache", "--embeddings", str(raw), "--cache", str(cache))
        assert code == 0
        assert summary["count"] == 3 and summary["dimension"] == 3
        store = pr.open_store(cache)
        assert list(store.ids) == [2, 5, 9]

    def test_rebuild_same_fingerprint(self, tmp_path, capsys):
        raw = tmp_path / "records.bin"
        _write_records(raw, [1, 2], np.ones((2, 4), dtype=np.float32))
        _, s1 = _run_cli(capsys, "build-cache", "--embeddings", str(raw), "--cache", str(tmp_path / "a.bin"))
        _, s2 = _run_cli(capsys, "build-cache", "--embeddings", str(raw), "--cache", str(tmp_path / "b.bin"))
        assert s1["fingerprint"] == s2["fingerprint"]
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()

    def test_corrupt_input_fails_with_bad_magic(self, tmp_path, capsys):
        raw = tmp_path / "bad.bin"
        raw.write_bytes(b"GARBAGE!" + b"\x00" * 24)
        code = main(["build-cache", "--embeddings", str(raw), "--cache", str(tmp_path / "c.bin")])
        captured = capsys.readouterr()
        assert code == 1
        assert "BadMagic" in captured.err


class TestSynthCommand:
    def test_deterministic_files(self, tmp_path, capsys):
        args = ["--image-count", "200", "--query-count", "5", "--dim", "8",
                "--vocab-size", "10", "--seed", "3"]
        code, _ = _run_cli(capsys, "synth", "--out-dir", str(tmp_path / "x"), *args)
        assert code == 0
        code, _ = _run_cli(capsys, "synth", "--out-dir", str(tmp_path / "y"), *args)
        assert code == 0
        for name in ["cache.bin", "entities.bin", "entities.jsonl", "summaries.bin",
                     "summaries.jsonl", "queries.jsonl", "qrels.txt"]:
            assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()

    def test_invalid_spec_fails(self, tmp_path, capsys):
        code = main(["synth", "--out-dir", str(tmp_path), "--image-count", "0",
                     "--query-count", "1"])
        assert code == 1
        assert "image_count" in capsys.readouterr().err


class TestBatchEvalFlow:
    def test_planted_corpus_perfect_scores(self, corpus_dir, capsys):
        run_path = corpus_dir / "run.txt"
        code, batch = _run_cli(
            capsys, "batch",
            "--cache", str(corpus_dir / "cache.bin"),
            "--index", str(corpus_dir / "index.bin"),
            "--queries", str(corpus_dir / "queries.jsonl"),
            "--summaries-bin", str(corpus_dir / "summaries.bin"),
            "--summaries-sidecar", str(corpus_dir / "summaries.jsonl"),
            "--run-out", str(run_path),
            "--k-query", "1500", "--depth", "100",
        )
        assert code == 0
        assert batch["queries"] == 12
        assert batch["lines_written"] == 1200
        code, scores = _run_cli(
            capsys, "eval", "--run", str(run_path), "--qrels", str(corpus_dir / "qrels.txt"),
            "--recall-k", "100", "--mrr-k", "10",
        )
        assert code == 0
        assert scores["mrr@10"] == 1.0
        assert scores["recall@100"] == 1.0
        assert scores["judged_queries"] == 12

    def test_batch_pool_bound_and_overlap(self, corpus_dir, capsys):
        code, batch = _run_cli(
            capsys, "batch",
            "--cache", str(corpus_dir / "cache.bin"),
            "--index", str(corpus_dir / "index.bin"),
            "--queries", str(corpus_dir / "queries.jsonl"),
            "--summaries-bin", str(corpus_dir / "summaries.bin"),
            "--summaries-sidecar", str(corpus_dir / "summaries.jsonl"),
            "--run-out", str(corpus_dir / "run2.txt"),
            "--k-query", "300", "--depth", "50",
        )
        assert code == 0
        assert batch["mean_pool_size"] <= 2 * 300
        assert 0.0 <= batch["overlap_ratio"] <= 1.0

    def test_batch_modes_agree_with_library(self, corpus_dir, capsys):
        code, _ = _run_cli(
            capsys, "batch",
            "--cache", str(corpus_dir / "cache.bin"),
            "--index", str(corpus_dir / "index.bin"),
            "--queries", str(corpus_dir / "queries.jsonl"),
            "--summaries-bin", str(corpus_dir / "summaries.bin"),
            "--summaries-sidecar", str(corpus_dir / "summaries.jsonl"),
            "--run-out", str(corpus_dir / "run_sr.txt"),
            "--mode", "sr_full", "--depth", "20",
        )
        assert code == 0
        run = pr.RunFile.load(corpus_dir / "run_sr.txt")
        store = pr.open_store(corpus_dir / "cache.bin")
        summaries = pr.load_text_embeddings(
            corpus_dir / "summaries.bin", corpus_dir / "summaries.jsonl"
        )
        queries = pr.read_queries(corpus_dir / "queries.jsonl")
        pr.attach_summary_vectors(queries, summaries)
        for q in queries:
            expect = pr.top_k_scan(q.summary_vector, store, 20)
            expect_pairs = [
                (int(i), float(f"{s:.6f}")) for i, s in zip(expect.ids, expect.scores)
            ]
            assert run.rankings[q.query_id] == expect_pairs

    def test_threads_zero_auto(self, corpus_dir, capsys):
        code, batch = _run_cli(
            capsys, "batch",
            "--cache", str(corpus_dir / "cache.bin"),
            "--index", str(corpus_dir / "index.bin"),
            "--queries", str(corpus_dir / "queries.jsonl"),
            "--summaries-bin", str(corpus_dir / "summaries.bin"),
            "--summaries-sidecar", str(corpus_dir / "summaries.jsonl"),
            "--run-out", str(corpus_dir / "run3.txt"),
            "--threads", "0", "--mode", "er_only", "--k-query", "100", "--depth", "10",
        )
        assert code == 0
        assert batch["threads"] >= 1

    def test_k_query_above_k_build_fails(self, corpus_dir, capsys):
        code = main([
            "batch",
            "--cache", str(corpus_dir / "cache.bin"),
            "--index", str(corpus_dir / "index.bin"),
            "--queries", str(corpus_dir / "queries.jsonl"),
            "--run-out", str(corpus_dir / "never.txt"),
            "--k-query", "99999",
        ])
        assert code == 1
        assert "k_query" in capsys.readouterr().err


class TestQueryCommand:
    def test_single_query_json(self, corpus_dir, capsys):
        queries = pr.read_queries(corpus_dir / "queries.jsonl")
        q = queries[0]
        code, summary = _run_cli(
            capsys, "query",
            "--cache", str(corpus_dir / "cache.bin"),
            "--index", str(corpus_dir / "index.bin"),
            "--query-id", str(q.query_id),
            *[part for e in q.entities for part in ("--entity", e)],
            "--summary-id", str(q.summary_embedding_id),
            "--summaries-bin", str(corpus_dir / "summaries.bin"),
            "--summaries-sidecar", str(corpus_dir / "summaries.jsonl"),
            "--k-query", "1500", "--depth", "5",
        )
        assert code == 0
        assert summary["entities_found"] == len(q.entities)
        assert len(summary["results"]) == 5
        assert summary["results"][0]["rank"] == 1
        qrels = pr.load_qrels(corpus_dir / "qrels.txt")
        assert summary["results"][0]["id"] in qrels[q.query_id]

    def test_query_run_out(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "single.run"
        code, _ = _run_cli(
            capsys, "query",
            "--cache", str(corpus_dir / "cache.bin"),
            "--index", str(corpus_dir / "index.bin"),
            "--query-id", "0",
            "--entity", "topic 00001",
            "--summary-id", "0",
            "--summaries-bin", str(corpus_dir / "summaries.bin"),
            "--summaries-sidecar", str(corpus_dir / "summaries.jsonl"),
            "--k-query", "100", "--depth", "3", "--tag", "single",
        )
        assert code == 0
        loaded = pr.RunFile.load(out) if out.exists() else None
        assert loaded is None  # no --run-out passed

        code, _ = _run_cli(
            capsys, "query",
            "--cache", str(corpus_dir / "cache.bin"),
            "--index", str(corpus_dir / "index.bin"),
            "--query-id", "0",
            "--entity", "topic 00001",
            "--summary-id", "0",
            "--summaries-bin", str(corpus_dir / "summaries.bin"),
            "--summaries-sidecar", str(corpus_dir / "summaries.jsonl"),
            "--k-query", "100", "--depth", "3", "--tag", "single",
            "--run-out", str(out),
        )
        assert code == 0
        loaded = pr.RunFile.load(out)
        assert loaded.tag == "single" and len(loaded.rankings[0]) == 3

    def test_mock_encoder_summary_text(self, corpus_dir, capsys):
        code, summary = _run_cli(
            capsys, "query",
            "--cache", str(corpus_dir / "cache.bin"),
            "--index", str(corpus_dir / "index.bin"),
            "--entity", "topic 00002",
            "--summary-text", "some words", "--mock-encoder", "--seed", "21",
            "--k-query", "200", "--depth", "4",
        )
        assert code == 0
        assert len(summary["results"]) == 4

    def test_both_summary_fields_rejected(self, corpus_dir, capsys):
        code = main([
            "query",
            "--cache", str(corpus_dir / "cache.bin"),
            "--index", str(corpus_dir / "index.bin"),
            "--entity", "topic 00001",
            "--summary-text", "x", "--summary-id", "0",
        ])
        assert code == 1


class TestExtendIndexCommand:
    def test_extend_appends_and_skips(self, tmp_path, capsys):
        out = tmp_path / "c"
        _run_cli(capsys, "synth", "--out-dir", str(out), "--image-count", "300",
                 "--query-count", "3", "--vocab-size", "8", "--dim", "8", "--seed", "2")
        config = pr.MockEncoderConfig(dimension=8, seed=2)
        first = [(i, f"topic {i:05d}", pr.mock_encode_text(f"topic {i:05d}", config)) for i in range(4)]
        pr.write_text_embeddings(first, out / "first.bin", out / "first.jsonl", dimension=8)
        code, built = _run_cli(
            capsys, "build-index", "--cache", str(out / "cache.bin"),
            "--entities-bin", str(out / "first.bin"),
            "--entities-sidecar", str(out / "first.jsonl"),
            "--k-build", "50", "--index", str(out / "index.bin"),
        )
        assert code == 0 and built["entities_indexed"] == 4
        code, extended = _run_cli(
            capsys, "extend-index", "--cache", str(out / "cache.bin"),
            "--index", str(out / "index.bin"),
            "--entities-bin", str(out / "entities.bin"),
            "--entities-sidecar", str(out / "entities.jsonl"),
            "--index-out", str(out / "index2.bin"),
        )
        assert code == 0
        assert extended["existing_skipped"] == 4
        assert extended["entities_indexed"] == 4
        assert extended["total_entities"] == 8
        index = pr.open_index(out / "index2.bin")
        assert index.lookup("topic 00007") is not None

    def test_extend_wrong_cache_fails(self, tmp_path, capsys):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out, seed in ((out_a, 1), (out_b, 9)):
            _run_cli(capsys, "synth", "--out-dir", str(out), "--image-count", "100",
                     "--query-count", "2", "--vocab-size", "4", "--dim", "8",
                     "--seed", str(seed))
        _run_cli(capsys, "build-index", "--cache", str(out_a / "cache.bin"),
                 "--entities-bin", str(out_a / "entities.bin"),
                 "--entities-sidecar", str(out_a / "entities.jsonl"),
                 "--k-build", "10", "--index", str(out_a / "index.bin"))
        code = main([
            "extend-index", "--cache", str(out_b / "cache.bin"),
            "--index", str(out_a / "index.bin"),
            "--entities-bin", str(out_b / "entities.bin"),
            "--entities-sidecar", str(out_b / "entities.jsonl"),
        ])
        assert code == 1
        assert "FingerprintMismatch" in capsys.readouterr().err


class TestEvalCommand:
    def test_first_hit_run_scores_perfectly(self, tmp_path, capsys):
        qrels = tmp_path / "qrels.txt"
        qrels.write_text("1 0 11 1\n2 0 22 1\n")
        run = tmp_path / "run.txt"
        run.write_text(
            "1 Q0 11 1 2.000000 t\n1 Q0 99 2 1.000000 t\n"
            "2 Q0 22 1 2.000000 t\n2 Q0 98 2 1.000000 t\n"
        )
        code, scores = _run_cli(capsys, "eval", "--run", str(run), "--qrels", str(qrels))
        assert code == 0
        assert scores["mrr@10"] == 1.0 and scores["recall@1000"] == 1.0

    def test_missing_file_fails(self, tmp_path, capsys):
        code = main(["eval", "--run", str(tmp_path / "nope.txt"), "--qrels", str(tmp_path / "also_nope")])
        assert code == 1


class TestBenchCommand:
    def test_report_fields(self, corpus_dir, capsys):
        code, report = _run_cli(
            capsys, "bench",
            "--cache", str(corpus_dir / "cache.bin"),
            "--index", str(corpus_dir / "index.bin"),
            "--queries", str(corpus_dir / "queries.jsonl"),
            "--summaries-bin", str(corpus_dir / "summaries.bin"),
            "--summaries-sidecar", str(corpus_dir / "summaries.jsonl"),
            "--k-query", "300", "--depth", "50",
        )
        assert code == 0
        for key in ("sr_full_mean_ms", "two_stage_mean_ms", "speedup", "mean_pool_size"):
            assert key in report and np.isfinite(report[key])
        assert report["mean_pool_size"] <= 2 * 300  # entities x k_query bound
        assert report["queries"] == 12
