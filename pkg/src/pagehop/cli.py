"""Command-line surface: build-index, retrieve, eval, export-train, serve, summary.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Every writing
command drops a RunManifest next to its output so a run can be reproduced.
Config precedence is flags > config file > defaults.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .corpus import CorpusError, PassageStore, ingest_corpus
from .evaluation import (
    ANSWER_BOOLEAN,
    DatasetError,
    HeuristicAnswerer,
    MetricReport,
    ScorerAnswerer,
    benchmark_table,
    boolean_accuracy,
    canonical_dataset_name,
    filter_yes_no,
    load_dataset,
    recall_at_k,
    render_report,
)
from .index import Bm25Params, IndexError_, InvertedIndex, TokenizerConfig, build_index
from .pipeline import Components, PipelineConfig, retrieve_batch, serve, write_traces
from .providers import LexicalLinkTransport, ProviderSuite
from .rerank import (
    LexicalScorer,
    RemoteScorer,
    export_hotpot_pairs,
    export_nq_pairs,
    load_hard_negative_records,
    load_support_records,
    write_pairs_tsv,
)
from .wire import HttpTransport, ProviderError, ReplayTransport, SubprocessTransport


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_path: Path, command: str, config: dict,
                   inputs: list[Path], seed: int, components: dict | None = None) -> Path:
    manifest = {
        "tool": f"pagehop {__version__}",
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs if p.is_file()},
        "components": components or {},
        "seed": seed,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    path = out_path.with_name(out_path.name + ".manifest.json")
    path.write_text(json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return path


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _build_transport(spec: dict, titles: list[str]):
    kind = spec.get("transport", "lexical")
    if kind == "lexical":
        return LexicalLinkTransport(titles)
    if kind == "http":
        return HttpTransport(spec["url"], timeout=spec.get("timeout", 10.0),
                             retries=spec.get("retries", 2))
    if kind == "subprocess":
        return SubprocessTransport(spec["cmd"], timeout=spec.get("timeout", 10.0))
    if kind == "replay":
        return ReplayTransport(spec["path"])
    raise ValueError(f"unknown transport {kind!r}")


def _build_suite(config_path: str | None, titles: list[str]) -> ProviderSuite:
    config = _load_config_file(config_path)
    if "transport" in config:  # one spec for every op
        config = {op: config for op in ("entity", "event", "decompose", "correct")}
    default = {"transport": "lexical"}
    entity = _build_transport(config.get("entity", default), titles)
    event = _build_transport(config.get("event", default), titles)
    decomposer = _build_transport(config["decompose"], titles) if "decompose" in config else None
    corrector = _build_transport(config["correct"], titles) if "correct" in config else None
    return ProviderSuite(entity=entity, event=event, decomposer=decomposer, corrector=corrector)


def _build_scorer(config_path: str | None, titles: list[str]):
    config = _load_config_file(config_path)
    if not config or config.get("transport") == "lexical":
        return LexicalScorer()
    return RemoteScorer(_build_transport(config, titles))


def _load_artifacts(index_dir: str) -> tuple[PassageStore, InvertedIndex]:
    root = Path(index_dir)
    store_path = root / "store.jsonl"
    if not store_path.is_file():
        raise CorpusError(f"no passage store at {store_path}; run build-index first")
    return PassageStore.load(store_path), InvertedIndex.load(root / "index")


def _pipeline_config(args, file_config: dict) -> PipelineConfig:
    def pick(flag, key, default):
        if flag is not None:
            return flag
        return file_config.get(key, default)

    return PipelineConfig(
        n_coarse=pick(args.n_coarse, "n_coarse", 200),
        k_final=pick(args.k, "k_final", 20),
        corrector_enabled=bool(args.correct or file_config.get("corrector_enabled", False)),
        seed=pick(args.seed, "seed", 0),
        jobs=pick(args.jobs, "jobs", 1),
        n_entity=file_config.get("n_entity", 10),
        n_event=file_config.get("n_event", 5),
        n_sets=file_config.get("n_sets", 5),
        n_sentences=file_config.get("n_sentences", 3),
    )


def cmd_build_index(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store = ingest_corpus(args.corpus)
    store.save(out / "store.jsonl")
    params = Bm25Params(k1=args.k1, b=args.b)
    index = build_index(store, params,
                        TokenizerConfig(remove_stopwords=args.stopwords, stem=args.stem))
    index.save(out / "index")
    write_manifest(out / "store.jsonl", "build-index",
                   {"bm25": asdict(params), "stopwords": args.stopwords, "stem": args.stem},
                   [Path(args.corpus)], seed=0)
    print(f"ingested {store.stats.docs} pages, {store.stats.passages} passages, "
          f"{store.stats.words} words -> {out}")
    return 0


def _read_queries(args) -> list[tuple[str | None, str]]:
    if args.query:
        return [(None, args.query)]
    queries: list[tuple[str | None, str]] = []
    with Path(args.query_file).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("{"):
                rec = json.loads(line)
                queries.append((rec.get("qid"), rec["query"]))
            else:
                queries.append((None, line))
    return queries


def cmd_retrieve(args) -> int:
    store, index = _load_artifacts(args.index)
    config = _pipeline_config(args, _load_config_file(args.config))
    suite = _build_suite(args.providers, store.titles)
    scorer = _build_scorer(args.scorer, store.titles)
    components = Components(store=store, index=index, providers=suite, scorer=scorer)
    queries = _read_queries(args)
    traces = retrieve_batch(queries, config, components, parallelism=config.jobs)
    out = Path(args.out)
    write_traces(traces, out)
    write_manifest(out, "retrieve", asdict(config),
                   [Path(args.index) / "store.jsonl"] + ([Path(args.query_file)] if args.query_file else []),
                   seed=config.seed,
                   components={"providers": suite.describe(), "scorer": scorer.describe()})
    hits = sum(1 for t in traces if t.final)
    print(f"retrieved {len(traces)} queries ({hits} non-empty) -> {out}")
    return 0


def cmd_eval(args) -> int:
    dataset = canonical_dataset_name(args.dataset)
    questions = load_dataset(dataset, args.data)
    ks = [int(k) for k in args.ks.split(",") if k]
    if any(q.answer_type == ANSWER_BOOLEAN for q in questions) and dataset in ("boolq", "strategyqa"):
        answerer = (HeuristicAnswerer() if args.answerer == "heuristic"
                    else ScorerAnswerer(_build_scorer(args.scorer, [])))
        report = boolean_accuracy(args.trace, questions, answerer,
                                  k=max(ks) if ks else 5, dataset=dataset)
    else:
        warnings: list[str] = []
        questions = filter_yes_no(questions, warnings)
        report = recall_at_k(args.trace, questions, ks, dataset=dataset)
        report.warnings = warnings + report.warnings
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
        write_manifest(Path(args.out), "eval",
                       {"dataset": dataset, "ks": ks, "answerer": args.answerer},
                       [Path(args.trace), Path(args.data)], seed=0)
    print(render_report(report) if args.format == "table" else report.to_json())
    return 0


def cmd_export_train(args) -> int:
    warnings: list[str] = []
    if args.recipe == "hotpot":
        pairs = export_hotpot_pairs(load_support_records(args.data),
                                    seed=args.seed, warnings=warnings)
    else:
        if args.size is None:
            raise ValueError("--size is required for the nq recipe")
        pairs = export_nq_pairs(load_hard_negative_records(args.data), args.size,
                                seed=args.seed, warnings=warnings)
    out = Path(args.out)
    write_pairs_tsv(pairs, out, seed=args.seed)
    write_manifest(out, "export-train",
                   {"recipe": args.recipe, "size": args.size}, [Path(args.data)],
                   seed=args.seed)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"exported {len(pairs)} pairs -> {out}")
    return 0


def cmd_serve(args) -> int:
    store, index = _load_artifacts(args.index)
    config = _pipeline_config(args, _load_config_file(args.config))
    suite = _build_suite(args.providers, store.titles)
    scorer = _build_scorer(args.scorer, store.titles)
    components = Components(store=store, index=index, providers=suite, scorer=scorer)
    server = serve(config, components, host=args.host, port=args.port)
    print(f"serving on http://{args.host}:{server.server_address[1]} "
          f"(POST /retrieve, GET /health)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def cmd_summary(args) -> int:
    reports = {}
    for item in args.report:
        name, _, path = item.partition("=")
        if not path:
            raise ValueError(f"--report expects dataset=path, got {item!r}")
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        reports[canonical_dataset_name(name)] = MetricReport.from_dict(data)
    print(benchmark_table(reports, system=args.system))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pagehop",
        description="Interpretable passage retrieval: link and decompose queries "
                    "into page titles, then BM25-filter and rerank their passages.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="chunk a corpus and build the BM25 index")
    p.add_argument("--corpus", required=True, help="JSONL corpus: {id, title, text} per line")
    p.add_argument("--out", required=True, help="output directory (store + index)")
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.add_argument("--stopwords", action="store_true", help="drop stopwords at indexing time")
    p.add_argument("--stem", action="store_true", help="fold plural/possessive suffixes")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("retrieve", help="run the retrieval funnel for queries")
    p.add_argument("--index", required=True, help="build-index output directory")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--query", help="a single query")
    group.add_argument("--query-file", help='one query per line, or JSONL {"qid","query"}')
    p.add_argument("--out", required=True, help="trace output file (one JSON per line)")
    p.add_argument("--providers", help="provider transport config (JSON file)")
    p.add_argument("--scorer", help="scorer transport config (JSON file)")
    p.add_argument("--config", help="pipeline config defaults (JSON file)")
    p.add_argument("--k", type=int, default=None, help="final passages per query")
    p.add_argument("--n-coarse", type=int, default=None, help="coarse candidate pool size")
    p.add_argument("--correct", action="store_true", help="enable decomposition correction")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None, help="concurrent queries")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("eval", help="score a trace file against a dataset")
    p.add_argument("--trace", required=True, help="trace file from retrieve")
    p.add_argument("--dataset", required=True, help="nq|triviaqa|hotpotqa|boolq|strategyqa")
    p.add_argument("--data", required=True, help="official dataset file")
    p.add_argument("--ks", default="5,20", help="comma-separated K values")
    p.add_argument("--answerer", choices=("heuristic", "scorer"), default="heuristic")
    p.add_argument("--scorer", help="scorer config for --answerer scorer")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.add_argument("--out", help="write the report JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-train", help="export balanced question/context pairs")
    p.add_argument("--recipe", choices=("hotpot", "nq"), required=True)
    p.add_argument("--data", required=True, help="source dataset file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=None, help="target pair count (nq recipe)")
    p.add_argument("--out", required=True, help="TSV output path")
    p.set_defaults(func=cmd_export_train)

    p = sub.add_parser("serve", help="expose retrieval over HTTP")
    p.add_argument("--index", required=True)
    p.add_argument("--providers")
    p.add_argument("--scorer")
    p.add_argument("--config")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n-coarse", type=int, default=None)
    p.add_argument("--correct", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("summary", help="merge eval reports into one benchmark row")
    p.add_argument("--report", action="append", required=True, metavar="DATASET=PATH")
    p.add_argument("--system", default="pagehop")
    p.set_defaults(func=cmd_summary)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, IndexError_, DatasetError, ProviderError, ValueError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
