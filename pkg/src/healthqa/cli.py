"""Single entry point wiring all stages: ingest, index, citations, answer, eval.

Structured logs go to stderr, data to stdout, so output is pipeable.
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, INDEX_FORMAT_VERSION
from .config import AppConfig, ConfigError
from .corpus import CorpusStore, ingest
from .evaluation import (QAInstance, emit_report, load_dataset, run_sweep)
from .filters import FilterSpec, fetch_citations
from .index import Index
from .pipeline import QAPipeline
from .reader import LABEL_TO_STR, RetrievalConfig

logger = logging.getLogger("healthqa")

VERSION_LINE = f"healthqa {__version__} (index format EQIDX1 v{INDEX_FORMAT_VERSION})"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="healthqa", description=__doc__)
    parser.add_argument("--version", action="version", version=VERSION_LINE)
    sub = parser.add_subparsers(dest="command")

    p_ingest = sub.add_parser("ingest", help="ingest MEDLINE XML / JSONL into a corpus store")
    p_ingest.add_argument("--input", nargs="+", required=True)
    p_ingest.add_argument("--store", required=True)

    p_index = sub.add_parser("index", help="build or query the BM25 index")
    index_sub = p_index.add_subparsers(dest="index_command")
    p_build = index_sub.add_parser("build")
    p_build.add_argument("--corpus", required=True)
    p_build.add_argument("--out", required=True)
    p_build.add_argument("--fields", default=None,
                         choices=["title_abstract", "abstract"])
    p_build.add_argument("--config", default=None)
    p_build.add_argument("--set", dest="overrides", action="append", default=[])
    p_search = index_sub.add_parser("search")
    p_search.add_argument("--query", required=True)
    p_search.add_argument("--k", type=int, required=True)
    p_search.add_argument("--config", default=None)
    p_search.add_argument("--set", dest="overrides", action="append", default=[])

    p_cit = sub.add_parser("citations", help="fetch citation counts by PMID")
    cit_sub = p_cit.add_subparsers(dest="citations_command")
    p_fetch = cit_sub.add_parser("fetch")
    p_fetch.add_argument("--pmids", required=True, help="file with one PMID per line")
    p_fetch.add_argument("--cache", required=True)
    p_fetch.add_argument("--rate", type=float, default=1.0)
    p_fetch.add_argument("--api-key", default=None)

    p_answer = sub.add_parser("answer", help="answer one question")
    p_answer.add_argument("--question", required=True)
    p_answer.add_argument("--config", default=None)
    p_answer.add_argument("--set", dest="overrides", action="append", default=[])

    p_eval = sub.add_parser("eval", help="evaluate a dataset or run a sweep")
    eval_sub = p_eval.add_subparsers(dest="eval_command")
    p_run = eval_sub.add_parser("run")
    p_run.add_argument("--dataset", required=True)
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--set", dest="overrides", action="append", default=[])
    p_run.add_argument("--answers", default=None)
    p_run.add_argument("--out", default=None, help="CSV report path")
    p_run.add_argument("--md", default=None, help="markdown report path")
    p_run.add_argument("--jobs", type=int, default=None)
    p_sweep = eval_sub.add_parser("sweep")
    p_sweep.add_argument("--dataset", required=True)
    p_sweep.add_argument("--grid", required=True)
    p_sweep.add_argument("--config", default=None)
    p_sweep.add_argument("--set", dest="overrides", action="append", default=[])
    p_sweep.add_argument("--answers", default=None)
    p_sweep.add_argument("--out", default=None, help="CSV report path")
    p_sweep.add_argument("--md", default=None, help="markdown report path")
    p_sweep.add_argument("--jobs", type=int, default=None)

    return parser


def _load_config(path: str | None, overrides: list[str]) -> AppConfig:
    config = AppConfig.load(path) if path else AppConfig()
    if overrides:
        config = config.with_overrides(overrides)
    return config


def _grid_from_file(path: str, base: RetrievalConfig) -> tuple[list[RetrievalConfig], str | None]:
    """Build grid cells from a JSON grid file.

    Either {"param": "top_k", "values": [1, 5, ...]} over the base config,
    or {"cells": [{...RetrievalConfig overrides...}, ...]}.
    """
    spec = json.loads(Path(path).read_text(encoding="utf-8"))
    if "cells" in spec:
        return [_config_with(base, overrides) for overrides in spec["cells"]], spec.get("param")
    param = spec["param"]
    return [_config_with(base, {param: v}) for v in spec["values"]], param


def _config_with(base: RetrievalConfig, overrides: dict) -> RetrievalConfig:
    fields = base.as_dict()
    unknown = set(overrides) - set(fields)
    if unknown:
        raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
    fields.update(overrides)
    return RetrievalConfig(
        mode=fields["mode"], top_k=fields["top_k"], top_j=fields["top_j"],
        pool_size=fields["pool_size"],
        filter=FilterSpec(min_year=fields["min_year"],
                          min_citations=fields["min_citations"]),
        vote_scheme=fields["vote_scheme"],
        filter_placement=fields["filter_placement"])


def _cmd_ingest(args) -> int:
    stats = ingest(args.input, args.store)
    print(json.dumps(stats.as_dict()))
    return 0


def _cmd_index(args) -> int:
    if args.index_command == "build":
        config = _load_config(args.config, args.overrides)
        store = CorpusStore(args.corpus)
        index = Index.build(store, fields=args.fields or config["index.fields"])
        index.save(args.out)
        print(json.dumps({"doc_count": index.doc_count,
                          "avg_doc_len": index.avg_doc_len,
                          "terms": len(index.stats().df),
                          "out": args.out}))
        return 0
    if args.index_command == "search":
        config = _load_config(args.config, args.overrides)
        store = CorpusStore(config["corpus.path"])
        index = Index.load(config["index.path"], store=store,
                           k1=config["bm25.k1"], b=config["bm25.b"])
        for hit in index.search(args.query, args.k):
            doc = store.get(hit.pmid)
            print(json.dumps({"rank": hit.rank, "pmid": hit.pmid,
                              "score": hit.score, "title": doc.title},
                             ensure_ascii=False))
        return 0
    raise UsageError("index requires a subcommand: build | search")


def _cmd_citations(args) -> int:
    if args.citations_command != "fetch":
        raise UsageError("citations requires the fetch subcommand")
    pmids = [line.strip() for line in Path(args.pmids).read_text().splitlines()
             if line.strip()]
    records = fetch_citations(pmids, args.cache, rate_limit=args.rate,
                              api_key=args.api_key)
    for record in records:
        print(record.to_json())
    return 0


def _cmd_answer(args) -> int:
    config = _load_config(args.config, args.overrides)
    pipeline = QAPipeline.from_config(config)
    instance = QAInstance(id="cli", question=args.question)
    record = pipeline.answer_instance(instance, config.retrieval_config())
    print(json.dumps({
        "question": args.question,
        "verdict": LABEL_TO_STR[record.verdict],
        "vote_counts": record.vote_counts,
        "vote_note": record.vote_note,
        "config_fingerprint": record.config_fingerprint,
        "evidence": [e.as_dict() for e in record.evidence],
    }, ensure_ascii=False, indent=2))
    return 0


def _cmd_eval(args) -> int:
    if args.eval_command not in ("run", "sweep"):
        raise UsageError("eval requires a subcommand: run | sweep")
    config = _load_config(args.config, args.overrides)
    dataset = load_dataset(args.dataset)

    base = config.retrieval_config()
    if base.vote_scheme != dataset.scheme:
        logger.info("vote scheme %s -> %s to match dataset", base.vote_scheme,
                    dataset.scheme)
        base = _config_with(base, {"vote_scheme": dataset.scheme})

    if args.eval_command == "run":
        grid, param = [base], None
    else:
        grid, param = _grid_from_file(args.grid, base)

    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    pipeline = QAPipeline.from_config(config)
    report = run_sweep(dataset, grid, pipeline, param=param, jobs=jobs,
                       answers_path=args.answers)
    sys.stdout.write(report.to_csv())
    if args.out:
        emit_report(report, "csv", args.out)
    if args.md:
        emit_report(report, "markdown", args.md)
    failed = [cell for cell in report.cells if cell.status != "ok"]
    if failed:
        logger.error("%d sweep cell(s) failed", len(failed))
        return 2
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        handler = {
            "ingest": _cmd_ingest,
            "index": _cmd_index,
            "citations": _cmd_citations,
            "answer": _cmd_answer,
            "eval": _cmd_eval,
        }[args.command]
        return handler(args)
    except SystemExit as e:  # --help / --version
        return 0 if e.code in (0, None) else 1
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except Exception as e:
        logger.error("%s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
