"""Query orchestration: titles -> page passages -> coarse BM25 -> rerank.

Every retrieval produces a QueryTrace that records the decompositions, the
joint title set with provenance, both candidate lists with their scores,
warnings, and per-stage timings, so any result can be audited or replayed.
"""
from __future__ import annotations

import json
import threading
import time
from dataclasses import asdict, dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Sequence

from .corpus import PassageStore
from .index import InvertedIndex, ScoredPassage
from .providers import (
    Decomposition,
    ProviderConfig,
    ProviderSuite,
    TitleCandidate,
    TitleSet,
    generate_titles,
)
from .rerank import RankedPassage, rerank
from .wire import canonical_json


@dataclass(frozen=True)
class PipelineConfig:
    n_entity: int = 10
    n_event: int = 5
    n_sets: int = 5
    n_sentences: int = 3
    n_coarse: int = 200
    k_final: int = 20
    corrector_enabled: bool = False
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if not 1 <= self.k_final <= self.n_coarse:
            raise ValueError("k_final must satisfy 1 <= k_final <= n_coarse")

    def provider_config(self) -> ProviderConfig:
        return ProviderConfig(n_entity=self.n_entity, n_event=self.n_event,
                              n_sets=self.n_sets, n_sentences=self.n_sentences,
                              jobs=self.jobs)


@dataclass
class Components:
    store: PassageStore
    index: InvertedIndex
    providers: ProviderSuite
    scorer: object

    def __post_init__(self):
        if self.index.corpus_checksum != self.store.checksum():
            raise ValueError("index was built from a different corpus than the store")


@dataclass
class QueryTrace:
    query: str
    qid: str | None
    decompositions: list[Decomposition]
    corrected_decompositions: list[Decomposition]
    title_set: TitleSet
    coarse: list[ScoredPassage]
    final: list[RankedPassage]
    warnings: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "qid": self.qid,
            "decompositions": {
                "raw": [list(d.sentences) for d in self.decompositions],
                "corrected": [list(d.sentences) for d in self.corrected_decompositions],
            },
            "titles": {
                "unique": list(self.title_set.unique_titles),
                "candidates": [asdict(c) for c in self.title_set.candidates],
            },
            "coarse": [{"pid": s.passage_id, "bm25": s.bm25_score} for s in self.coarse],
            "final": [
                {
                    "pid": r.passage_id, "title": r.page_title, "text": r.text,
                    "bm25": r.bm25_score, "relevance": r.relevance_score,
                    "provenance": [asdict(c) for c in r.title_provenance],
                }
                for r in self.final
            ],
            "warnings": list(self.warnings),
            "timings": dict(self.timings),
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def content_dict(self) -> dict:
        """Trace minus wall-clock timings: the part that is deterministic
        given deterministic components."""
        d = self.to_dict()
        d.pop("timings")
        return d


def retrieve(query: str, config: PipelineConfig, components: Components,
             qid: str | None = None) -> QueryTrace:
    """Full funnel for one query; empty title sets yield valid empty traces."""
    t_start = time.perf_counter()
    generation = generate_titles(
        query, components.providers, config.provider_config(),
        correct=config.corrector_enabled,
    )
    t_titles = time.perf_counter()

    warnings = list(generation.warnings)
    titles = set(generation.title_set.unique_titles)
    unknown = sorted(t for t in titles if t not in components.store)
    if unknown:
        warnings.append(f"{len(unknown)} linked titles not in corpus: "
                        f"{', '.join(unknown[:5])}{'...' if len(unknown) > 5 else ''}")
    coarse = components.index.top_k(query, config.n_coarse, restrict_titles=titles)
    t_coarse = time.perf_counter()

    final = rerank(query, coarse, components.store, components.scorer,
                   config.k_final, warnings=warnings)
    by_title: dict[str, list[TitleCandidate]] = {}
    for candidate in generation.title_set.candidates:
        by_title.setdefault(candidate.title, []).append(candidate)
    final = [
        RankedPassage(
            passage_id=r.passage_id, page_title=r.page_title, text=r.text,
            bm25_score=r.bm25_score, relevance_score=r.relevance_score,
            title_provenance=tuple(by_title.get(r.page_title, [])),
        )
        for r in final
    ]
    t_end = time.perf_counter()

    return QueryTrace(
        query=query,
        qid=qid,
        decompositions=generation.decompositions,
        corrected_decompositions=generation.corrected_decompositions,
        title_set=generation.title_set,
        coarse=coarse,
        final=final,
        warnings=warnings,
        timings={
            "titles": t_titles - t_start,
            "coarse": t_coarse - t_titles,
            "rerank": t_end - t_coarse,
            "total": t_end - t_start,
        },
    )


def retrieve_batch(queries: Sequence[str | tuple[str | None, str]],
                   config: PipelineConfig, components: Components,
                   parallelism: int = 1) -> list[QueryTrace]:
    """Independent per-query retrieval; output order matches input order.

    Items are either query strings or (qid, query) tuples.
    """
    normalized = [(None, q) if isinstance(q, str) else q for q in queries]

    def one(item: tuple[str | None, str]) -> QueryTrace:
        qid, query = item
        return retrieve(query, config, components, qid=qid)

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(one, normalized))
    return [one(item) for item in normalized]


def write_traces(traces: Iterable[QueryTrace], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(trace.to_json() + "\n")


class _RetrievalHandler(BaseHTTPRequestHandler):
    server_version = "pagehop"

    def _send(self, status: int, body: dict) -> None:
        payload = canonical_json(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):  # noqa: N802
        if self.path != "/health":
            self._send(404, {"error": "not found"})
            return
        components: Components = self.server.components  # type: ignore[attr-defined]
        suite = components.providers
        liveness = {}
        for name, transport in (("entity", suite.entity), ("event", suite.event),
                                ("decomposer", suite.decomposer), ("corrector", suite.corrector)):
            if transport is None:
                liveness[name] = None
            else:
                liveness[name] = {"endpoint": transport.describe(),
                                  "last_error": getattr(transport, "last_error", None)}
        self._send(200, {
            "status": "ok",
            "index_checksum": components.index.corpus_checksum,
            "passages": len(components.index),
            "providers": liveness,
        })

    def do_POST(self):  # noqa: N802
        if self.path != "/retrieve":
            self._send(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length) or b"{}")
            query = body["query"]
            if not isinstance(query, str) or not query.strip():
                raise ValueError("query must be a non-empty string")
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            self._send(400, {"error": f"bad request: {exc}"})
            return
        config: PipelineConfig = self.server.config  # type: ignore[attr-defined]
        if "k" in body:
            try:
                k = int(body["k"])
                config = PipelineConfig(**{**asdict(config), "k_final": min(k, config.n_coarse)})
            except (ValueError, TypeError) as exc:
                self._send(400, {"error": f"bad k: {exc}"})
                return
        try:
            trace = retrieve(query, config, self.server.components)  # type: ignore[attr-defined]
        except Exception as exc:  # surface pipeline faults as 500, keep serving
            self._send(500, {"error": str(exc)})
            return
        self._send(200, trace.to_dict())

    def log_message(self, fmt, *args):  # quiet by default
        pass


def serve(config: PipelineConfig, components: Components,
          host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    """Build the retrieval endpoint (POST /retrieve, GET /health).

    The caller owns the lifecycle: run `serve_forever()` or drive it from a
    thread; `shutdown()` stops it.
    """
    server = ThreadingHTTPServer((host, port), _RetrievalHandler)
    server.config = config  # type: ignore[attr-defined]
    server.components = components  # type: ignore[attr-defined]
    return server


def serve_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
