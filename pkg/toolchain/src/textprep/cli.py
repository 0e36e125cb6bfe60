"""Command-line interface for the preprocessing toolchain."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .documents import (
    DEVICES,
    ENCODER_MODELS,
    NER_MODELS,
    SUMMARIZER_MODELS,
    ToolchainConfig,
    read_documents,
)
from .emit import process_documents
from .encode import encode_texts
from .errors import MalformedLine, TextprepError
from .ner import extract_entities
from .summarize import summarize

log = logging.getLogger("textprep.cli")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ner", default="rule", choices=NER_MODELS)
    parser.add_argument("--summarizer", default="lead", choices=SUMMARIZER_MODELS)
    parser.add_argument("--encoder", default="hashed", choices=ENCODER_MODELS)
    parser.add_argument("--max-summary-tokens", type=int, default=64)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--device", default="cpu", choices=DEVICES)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--no-truncate", action="store_true",
                        help="error on over-limit documents instead of truncating")


def _config(args: argparse.Namespace) -> ToolchainConfig:
    return ToolchainConfig(
        ner_model=args.ner,
        summarizer_model=args.summarizer,
        encoder_model=args.encoder,
        max_summary_tokens=args.max_summary_tokens,
        batch_size=args.batch_size,
        device=args.device,
        dimension=args.dim,
        seed=args.seed,
        truncate_long_inputs=not args.no_truncate,
    )


def cmd_process(args: argparse.Namespace) -> dict:
    documents = read_documents(args.documents)
    summary = process_documents(documents, _config(args), args.out_dir)
    summary["command"] = "process"
    return summary


def cmd_entities(args: argparse.Namespace) -> dict:
    documents = read_documents(args.documents)
    config = _config(args)
    with open(args.out, "w", encoding="utf-8") as handle:
        for doc in documents:
            handle.write(json.dumps(
                {"query_id": doc.query_id, "entities": extract_entities(doc, config)},
                ensure_ascii=False,
            ) + "\n")
    return {"command": "entities", "documents": len(documents), "out": args.out}


def cmd_summarize(args: argparse.Namespace) -> dict:
    documents = read_documents(args.documents)
    config = _config(args)
    with open(args.out, "w", encoding="utf-8") as handle:
        for doc in documents:
            handle.write(json.dumps(
                {"query_id": doc.query_id, "summary": summarize(doc, config)},
                ensure_ascii=False,
            ) + "\n")
    return {"command": "summarize", "documents": len(documents), "out": args.out}


def _read_texts(source: str) -> list[tuple[int, str]]:
    entries: list[tuple[int, str]] = []
    with open(source, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                payload = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_number, f"invalid JSON: {exc}") from exc
            if (not isinstance(payload, dict) or set(payload) != {"id", "text"}
                    or not isinstance(payload["id"], int) or isinstance(payload["id"], bool)
                    or payload["id"] < 0 or not isinstance(payload["text"], str)):
                raise MalformedLine(line_number, 'expected {"id": <int>, "text": <str>}')
            entries.append((payload["id"], payload["text"]))
    return entries


def cmd_encode(args: argparse.Namespace) -> dict:
    entries = _read_texts(args.texts)
    count = encode_texts(entries, args.binary, args.sidecar, _config(args))
    return {
        "command": "encode", "texts": count,
        "binary": args.binary, "sidecar": args.sidecar,
    }


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textprep",
        description="Turn long documents into retrieval-engine input files.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    process = commands.add_parser(
        "process", help="documents JSONL to a full engine input directory"
    )
    process.add_argument("--documents", required=True)
    process.add_argument("--out-dir", required=True)
    _add_config_flags(process)
    process.set_defaults(handler=cmd_process)

    entities = commands.add_parser("entities", help="extract entities per document")
    entities.add_argument("--documents", required=True)
    entities.add_argument("--out", required=True)
    _add_config_flags(entities)
    entities.set_defaults(handler=cmd_entities)

    summarize_cmd = commands.add_parser("summarize", help="summarize each document")
    summarize_cmd.add_argument("--documents", required=True)
    summarize_cmd.add_argument("--out", required=True)
    _add_config_flags(summarize_cmd)
    summarize_cmd.set_defaults(handler=cmd_summarize)

    encode = commands.add_parser(
        "encode", help='embed {"id", "text"} JSONL into binary + sidecar'
    )
    encode.add_argument("--texts", required=True)
    encode.add_argument("--binary", required=True)
    encode.add_argument("--sidecar", required=True)
    _add_config_flags(encode)
    encode.set_defaults(handler=cmd_encode)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s %(message)s",
    )
    try:
        summary = args.handler(args)
    except (TextprepError, ValueError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
