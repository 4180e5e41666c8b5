import json
import random
from collections import Counter

import pytest

from pagehop.corpus import PassageStore, ingest_corpus
from pagehop.index import Bm25Params, IndexStats, bm25_score, build_index, tokenize

WORD_POOL = [
    "river", "mountain", "treaty", "election", "harbor", "festival", "comet",
    "bridge", "museum", "vote", "signal", "winter", "garden", "archive",
    "council", "border", "census", "eclipse", "harvest", "union", "railway",
    "summit", "flood", "colony", "market", "statue", "canal", "orchard",
]


def corpus_lines(docs):
    """[(doc_id, title, text)] -> JSONL corpus lines."""
    return [json.dumps({"id": d, "title": t, "text": x}) for d, t, x in docs]


def make_store(docs) -> PassageStore:
    return ingest_corpus(corpus_lines(docs))


def random_store(rng: random.Random, n_docs: int, vocab: list[str],
                 max_words: int = 250) -> PassageStore:
    docs = []
    for i in range(n_docs):
        n_words = rng.randint(0, max_words)
        text = " ".join(rng.choice(vocab) for _ in range(n_words))
        docs.append((f"d{i}", f"Page {i}", text))
    return make_store(docs)


class ExhaustiveBm25:
    """Independent exhaustive BM25 oracle: score every eligible passage with
    the pure formula over full-corpus statistics, sort by (-score, ascending id).
    Statistics are precomputed once so many queries stay cheap."""

    def __init__(self, store: PassageStore, params: Bm25Params):
        self.params = params
        self.entries = []  # (pid, title, Counter, length)
        df: Counter = Counter()
        total = 0
        for p in store.passages():
            tokens = tokenize(p.text)
            self.entries.append((p.passage_id, p.page_title, Counter(tokens), len(tokens)))
            df.update(set(tokens))
            total += len(tokens)
        n = len(self.entries)
        self.stats = IndexStats(passage_count=n, avgdl=(total / n) if n else 0.0, df=dict(df))

    def top_k(self, query: str, k: int, restrict_titles=None):
        query_terms = tokenize(query)
        scored = []
        for pid, title, freqs, length in self.entries:
            if restrict_titles is not None and title not in restrict_titles:
                continue
            scored.append((pid, bm25_score(query_terms, freqs, length, self.stats, self.params)))
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:k]


def oracle_top_k(store: PassageStore, query: str, k: int, params: Bm25Params,
                 restrict_titles=None):
    return ExhaustiveBm25(store, params).top_k(query, k, restrict_titles)


class StaticTransport:
    """Wire transport answering every op from a fixed response table."""

    def __init__(self, responses: dict):
        self.responses = responses
        self.requests: list[dict] = []
        self.last_error = None

    def describe(self) -> str:
        return "static"

    def call(self, request: dict) -> dict:
        self.requests.append(request)
        op = request["op"]
        if op not in self.responses:
            return {"error": f"no canned response for {op}"}
        response = self.responses[op]
        return response(request) if callable(response) else response


class FailingTransport:
    """Always unreachable."""

    last_error = "down"

    def describe(self) -> str:
        return "failing"

    def call(self, request: dict) -> dict:
        from pagehop.wire import ProviderError

        raise ProviderError("provider down")


class RecordingTransport:
    """Wraps a transport and records request/response pairs for later replay."""

    def __init__(self, inner):
        self.inner = inner
        self.records: list[dict] = []
        self.last_error = None

    def describe(self) -> str:
        return f"recording({self.inner.describe()})"

    def call(self, request: dict) -> dict:
        response = self.inner.call(request)
        self.records.append({"request": request, "response": response})
        return response

    def dump(self, path) -> None:
        from pagehop.wire import canonical_json

        seen = set()
        with open(path, "a", encoding="utf-8") as fh:
            for record in self.records:
                key = canonical_json(record["request"])
                if key in seen:
                    continue
                seen.add(key)
                fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


@pytest.fixture
def tiny_store() -> PassageStore:
    return make_store([
        ("d1", "Alpha River", "the alpha river floods every spring near the old mill " * 12),
        ("d2", "Beta Treaty", "the beta treaty was signed after the border dispute " * 10),
        ("d3", "Gamma Comet", "gamma comet appears every seventy years over the harbor " * 11),
        ("d4", "Empty Page", ""),
    ])


@pytest.fixture
def tiny_index(tiny_store):
    return build_index(tiny_store)
