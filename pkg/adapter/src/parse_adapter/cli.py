"""Command-line front end: pairsent-adapt RAW.jsonl OUT.conllu [--parser P]."""

from __future__ import annotations

import argparse
import logging
import sys

from pairsent.corpus import CorpusError

from .backends import BACKENDS, AdapterError
from .convert import adapt


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pairsent-adapt",
        description="dependency-parse a raw-text JSONL corpus into CoNLL-U")
    ap.add_argument("corpus", help="JSON-lines with {'id', 'text', ...} records")
    ap.add_argument("out", help="CoNLL-U file to write")
    ap.add_argument("--parser", default="spacy", choices=sorted(BACKENDS))
    ap.add_argument("--model", help="model name for backends that load one")
    return ap


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    kwargs = {"model": args.model} if args.model else {}
    try:
        report = adapt(args.corpus, args.out, parser_name=args.parser, **kwargs)
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CorpusError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {args.out}: {report.line()}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
