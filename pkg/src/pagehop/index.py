"""Persistent inverted index with BM25 scoring and restricted top-k retrieval.

Corpus statistics (N, df, avgdl) are always computed over the full corpus;
a title restriction only limits which passages are *eligible*, it never
changes the statistics.
"""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import PassageStore

INDEX_FORMAT = "pagehop-index/1"

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)  # alphanumeric runs, underscore excluded

# Light suffix stripper, off by default. Not a full stemmer; enough to fold
# plurals when the flag is on (possessive 's is already split by tokenize).
_STEM_SUFFIXES = ("ies", "sses", "es", "s")


class IndexError_(RuntimeError):
    """Index persistence failure or store/index mismatch."""


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0 <= self.b <= 1:
            raise ValueError("b must be in [0, 1]")


@dataclass(frozen=True)
class TokenizerConfig:
    remove_stopwords: bool = False
    stem: bool = False


@dataclass
class IndexStats:
    passage_count: int
    avgdl: float
    df: Mapping[str, int]


@dataclass(frozen=True)
class ScoredPassage:
    passage_id: str
    bm25_score: float


def _stem(token: str) -> str:
    for suffix in _STEM_SUFFIXES:
        if token.endswith(suffix) and len(token) > len(suffix) + 1:
            if suffix == "ies":
                return token[:-3] + "i"
            if suffix == "sses":
                return token[:-2]
            return token[: -len(suffix)]
    return token


def tokenize(text: str, config: TokenizerConfig | None = None) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop empty tokens."""
    tokens = _TOKEN_RE.findall(text.lower())
    if config is None:
        return tokens
    if config.remove_stopwords:
        from .rerank import STOPWORDS

        tokens = [t for t in tokens if t not in STOPWORDS]
    if config.stem:
        tokens = [_stem(t) for t in tokens]
    return tokens


def idf(term: str, stats: IndexStats) -> float:
    """ln(1 + (N - df + 0.5) / (df + 0.5)); positive for every indexed term."""
    df = stats.df.get(term, 0)
    if df == 0:
        return 0.0
    return math.log(1.0 + (stats.passage_count - df + 0.5) / (df + 0.5))


def bm25_score(
    query_terms: Iterable[str],
    term_freqs: Mapping[str, int],
    length: int,
    stats: IndexStats,
    params: Bm25Params,
) -> float:
    """Score one passage: sum over query terms of idf * tf*(k1+1) / (tf + k1*norm).

    `term_freqs` and `length` describe the passage; terms absent from the
    passage (or the corpus) contribute 0. A term repeated in the query
    contributes once per occurrence.
    """
    score = 0.0
    norm = 1.0 - params.b
    if stats.avgdl > 0:
        norm += params.b * length / stats.avgdl
    for term in query_terms:
        tf = term_freqs.get(term, 0)
        if tf == 0:
            continue
        score += idf(term, stats) * tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
    return score


class InvertedIndex:
    """Postings of (passage, term frequency) per term, plus corpus statistics.

    Immutable once built; concurrent `top_k` calls are safe.
    """

    def __init__(
        self,
        pids: list[str],
        titles: list[str],
        lengths: list[int],
        postings: dict[str, list[tuple[int, int]]],
        params: Bm25Params,
        tokenizer: TokenizerConfig,
        corpus_checksum: str,
    ):
        self.pids = pids
        self.titles = titles
        self.lengths = lengths
        self.postings = postings
        self.params = params
        self.tokenizer = tokenizer
        self.corpus_checksum = corpus_checksum
        total = sum(lengths)
        self.stats = IndexStats(
            passage_count=len(pids),
            avgdl=(total / len(pids)) if pids else 0.0,
            df={t: len(plist) for t, plist in postings.items()},
        )

    def __len__(self) -> int:
        return len(self.pids)

    def top_k(
        self,
        query: str,
        k: int,
        restrict_titles: set[str] | None = None,
    ) -> list[ScoredPassage]:
        """Top-k by BM25, descending; ties broken by ascending passage id.

        With `restrict_titles` only passages of those pages are eligible
        (an empty set means nothing is eligible). When fewer than k eligible
        passages match any query term, the remaining slots are padded with
        zero-score passages in ascending passage-id order, so the result
        always has min(k, eligible) entries.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if restrict_titles is None:
            eligible = None
        else:
            eligible = {i for i, t in enumerate(self.titles) if t in restrict_titles}
            if not eligible:
                return []

        query_terms = tokenize(query, self.tokenizer)
        scores: dict[int, float] = {}
        k1 = self.params.k1
        b = self.params.b
        avgdl = self.stats.avgdl
        # repeated query terms contribute once per occurrence, in query order,
        # so scores accumulate exactly like an exhaustive per-passage scorer
        for term in query_terms:
            plist = self.postings.get(term)
            if not plist:
                continue
            term_idf = idf(term, self.stats)
            for i, tf in plist:
                if eligible is not None and i not in eligible:
                    continue
                norm = 1.0 - b + (b * self.lengths[i] / avgdl if avgdl > 0 else 0.0)
                scores[i] = scores.get(i, 0.0) + term_idf * tf * (k1 + 1.0) / (tf + k1 * norm)

        ranked = sorted(scores.items(), key=lambda item: (-item[1], self.pids[item[0]]))
        out = [ScoredPassage(self.pids[i], s) for i, s in ranked[:k]]
        if len(out) < k:
            pool = eligible if eligible is not None else range(len(self.pids))
            padding = sorted(self.pids[i] for i in pool if i not in scores)
            out.extend(ScoredPassage(pid, 0.0) for pid in padding[: k - len(out)])
        return out

    def save(self, directory: str | Path) -> None:
        """Write manifest + passages + postings; byte-identical for identical input."""
        directory = Path(directory)
        try:
            directory.mkdir(parents=True, exist_ok=True)
            manifest = {
                "format": INDEX_FORMAT,
                "bm25": {"k1": self.params.k1, "b": self.params.b},
                "tokenizer": {"remove_stopwords": self.tokenizer.remove_stopwords,
                              "stem": self.tokenizer.stem},
                "corpus_checksum": self.corpus_checksum,
                "passage_count": self.stats.passage_count,
                "avgdl": self.stats.avgdl,
                "term_count": len(self.postings),
            }
            (directory / "manifest.json").write_text(
                json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
                encoding="utf-8",
            )
            with (directory / "passages.jsonl").open("w", encoding="utf-8") as fh:
                for pid, title, dl in zip(self.pids, self.titles, self.lengths):
                    fh.write(json.dumps({"pid": pid, "title": title, "dl": dl},
                                        ensure_ascii=False, sort_keys=True,
                                        separators=(",", ":")) + "\n")
            with (directory / "postings.jsonl").open("w", encoding="utf-8") as fh:
                for term in sorted(self.postings):
                    plist = self.postings[term]
                    fh.write(json.dumps({"t": term, "df": len(plist),
                                         "p": [[i, tf] for i, tf in plist]},
                                        ensure_ascii=False, sort_keys=True,
                                        separators=(",", ":")) + "\n")
        except OSError as exc:
            raise IndexError_(f"cannot write index to {directory}: {exc}") from exc

    @classmethod
    def load(cls, directory: str | Path) -> "InvertedIndex":
        directory = Path(directory)
        try:
            manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
        except OSError as exc:
            raise IndexError_(f"cannot read index manifest in {directory}: {exc}") from exc
        if manifest.get("format") != INDEX_FORMAT:
            raise IndexError_(f"{directory}: unsupported index format {manifest.get('format')!r}")
        pids, titles, lengths = [], [], []
        with (directory / "passages.jsonl").open("r", encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                pids.append(rec["pid"])
                titles.append(rec["title"])
                lengths.append(rec["dl"])
        postings: dict[str, list[tuple[int, int]]] = {}
        with (directory / "postings.jsonl").open("r", encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                postings[rec["t"]] = [(i, tf) for i, tf in rec["p"]]
        index = cls(
            pids=pids,
            titles=titles,
            lengths=lengths,
            postings=postings,
            params=Bm25Params(k1=manifest["bm25"]["k1"], b=manifest["bm25"]["b"]),
            tokenizer=TokenizerConfig(
                remove_stopwords=manifest["tokenizer"]["remove_stopwords"],
                stem=manifest["tokenizer"]["stem"],
            ),
            corpus_checksum=manifest["corpus_checksum"],
        )
        if index.stats.passage_count != manifest["passage_count"]:
            raise IndexError_(f"{directory}: passage count mismatch with manifest")
        return index


def build_index(
    store: PassageStore,
    params: Bm25Params | None = None,
    tokenizer: TokenizerConfig | None = None,
) -> InvertedIndex:
    """Index every passage of the store, in (title, block) order."""
    params = params or Bm25Params()
    tokenizer = tokenizer or TokenizerConfig()
    pids, titles, lengths = [], [], []
    postings: dict[str, list[tuple[int, int]]] = {}
    for i, passage in enumerate(store.passages()):
        tokens = tokenize(passage.text, tokenizer)
        pids.append(passage.passage_id)
        titles.append(passage.page_title)
        lengths.append(len(tokens))
        for term, tf in sorted(Counter(tokens).items()):
            postings.setdefault(term, []).append((i, tf))
    return InvertedIndex(
        pids=pids, titles=titles, lengths=lengths, postings=postings,
        params=params, tokenizer=tokenizer, corpus_checksum=store.checksum(),
    )


def top_k(
    index: InvertedIndex,
    query: str,
    k: int,
    restrict_titles: set[str] | None = None,
) -> list[ScoredPassage]:
    return index.top_k(query, k, restrict_titles)
