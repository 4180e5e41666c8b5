"""Fine-grained passage ranking and training-pair export.

A relevance scorer maps (question, context) pairs to a probability of the
positive label in [0, 1]. The built-in lexical scorer keeps the pipeline
model-free; a remote scorer speaks the wire protocol and degrades to a
configured fallback. Export recipes produce exactly label-balanced,
seed-deterministic question/context training pairs.
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .corpus import PassageStore
from .index import ScoredPassage, tokenize
from .providers import TitleCandidate
from .wire import ProviderError

LABEL_POS = "pos"
LABEL_NEG = "neg"
PAIRS_FORMAT = "pagehop-pairs/1"

STOPWORDS = frozenset(
    resources.files("pagehop").joinpath("data/stopwords.txt").read_text("utf-8").split()
)

_FIELD_WS_RE = re.compile(r"[\t\r\n]+")


@dataclass(frozen=True)
class RankedPassage:
    passage_id: str
    page_title: str
    text: str
    bm25_score: float
    relevance_score: float
    title_provenance: tuple[TitleCandidate, ...] = ()


@dataclass(frozen=True)
class TrainingPair:
    question: str
    context: str
    label: str  # pos | neg
    source: str  # hotpotqa | nq


def content_tokens(text: str) -> set[str]:
    return {t for t in tokenize(text) if t not in STOPWORDS}


class LexicalScorer:
    """Content-token overlap: |Q ∩ C| / |Q|, 0 when the question has none."""

    def describe(self) -> str:
        return "lexical"

    def score_pairs(self, pairs: Sequence[tuple[str, str]],
                    warnings: list[str] | None = None) -> list[float]:
        scores = []
        for question, context in pairs:
            q = content_tokens(question)
            scores.append(len(q & content_tokens(context)) / len(q) if q else 0.0)
        return scores


class RemoteScorer:
    """Wire-protocol scorer; a failed batch is rescored by the fallback scorer."""

    def __init__(self, transport, fallback=None):
        self.transport = transport
        self.fallback = fallback or LexicalScorer()

    def describe(self) -> str:
        return f"remote({self.transport.describe()}, fallback={self.fallback.describe()})"

    def score_pairs(self, pairs: Sequence[tuple[str, str]],
                    warnings: list[str] | None = None) -> list[float]:
        sink = warnings if warnings is not None else []
        if not pairs:
            return []
        try:
            response = self.transport.call(
                {"op": "score", "pairs": [{"q": q, "c": c} for q, c in pairs]}
            )
            scores = response.get("scores")
            if (not isinstance(scores, list) or len(scores) != len(pairs)
                    or not all(isinstance(s, (int, float)) for s in scores)):
                raise ProviderError(f"malformed scores payload: {scores!r}")
        except ProviderError as exc:
            sink.append(f"score degraded to {self.fallback.describe()}: {exc}")
            return self.fallback.score_pairs(pairs, warnings=sink)
        out = []
        for s in scores:
            if not 0.0 <= s <= 1.0:
                sink.append(f"score {s} outside [0,1], clamped")
                s = min(1.0, max(0.0, float(s)))
            out.append(float(s))
        return out


def score_pair(question: str, context: str, scorer,
               warnings: list[str] | None = None) -> float:
    if not question.strip() or not context.strip():
        raise ValueError("question and context must be non-empty")
    return scorer.score_pairs([(question, context)], warnings=warnings)[0]


def rerank(question: str, candidates: Sequence[ScoredPassage], store: PassageStore,
           scorer, top_k: int, warnings: list[str] | None = None) -> list[RankedPassage]:
    """Re-sort coarse candidates by relevance, keeping the top_k.

    Order: relevance desc, then BM25 desc, then ascending passage id. The
    output is always a permutation of a prefix decision over the input;
    nothing is invented or duplicated.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    if not candidates:
        return []
    passages = [store.passage(c.passage_id) for c in candidates]
    scores = scorer.score_pairs([(question, p.text) for p in passages], warnings=warnings)
    ranked = [
        RankedPassage(
            passage_id=p.passage_id, page_title=p.page_title, text=p.text,
            bm25_score=c.bm25_score, relevance_score=s,
        )
        for c, p, s in zip(candidates, passages, scores)
    ]
    ranked.sort(key=lambda r: (-r.relevance_score, -r.bm25_score, r.passage_id))
    return ranked[:top_k]


# --- training-pair export -------------------------------------------------

@dataclass(frozen=True)
class SupportRecord:
    """One question with its evidence-annotated sentences (hotpot recipe input)."""

    question: str
    supporting: tuple[str, ...]
    other: tuple[str, ...]


@dataclass(frozen=True)
class HardNegativeRecord:
    """One question with a gold context and mined hard negatives (nq recipe input)."""

    question: str
    positive: str
    hard_negatives: tuple[str, ...]


def load_support_records(path: str | Path) -> list[SupportRecord]:
    """Adapter for the multi-hop dataset layout: context [[title,[sent,..]],..]
    plus supporting_facts [[title, sent_idx],..]."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    records = []
    for rec in data:
        sentences = {title: sents for title, sents in rec["context"]}
        gold = set()
        for title, idx in rec.get("supporting_facts", []):
            if title in sentences and 0 <= idx < len(sentences[title]):
                gold.add((title, idx))
        supporting, other = [], []
        for title, sents in rec["context"]:
            for idx, sent in enumerate(sents):
                (supporting if (title, idx) in gold else other).append(sent)
        records.append(SupportRecord(rec["question"], tuple(supporting), tuple(other)))
    return records


def load_hard_negative_records(path: str | Path) -> list[HardNegativeRecord]:
    """Adapter for the bi-encoder training layout: positive_ctxs / hard_negative_ctxs."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    records = []
    for rec in data:
        positives = rec.get("positive_ctxs") or []
        if not positives:
            continue
        records.append(HardNegativeRecord(
            question=rec["question"],
            positive=positives[0]["text"],
            hard_negatives=tuple(ctx["text"] for ctx in rec.get("hard_negative_ctxs", [])),
        ))
    return records


def export_hotpot_pairs(records: Sequence[SupportRecord], seed: int = 0,
                        warnings: list[str] | None = None) -> list[TrainingPair]:
    """Every supporting sentence becomes a positive; an equal number of
    negatives is sampled (seeded) from the record's own non-supporting
    sentences, topping up from the global pool when a record runs short.
    """
    sink = warnings if warnings is not None else []
    rng = random.Random(seed)
    pairs: list[TrainingPair] = []
    shortfalls: list[tuple[int, int]] = []
    for i, rec in enumerate(records):
        for sent in rec.supporting:
            pairs.append(TrainingPair(rec.question, sent, LABEL_POS, "hotpotqa"))
        need = len(rec.supporting)
        own = min(need, len(rec.other))
        for sent in (rng.sample(list(rec.other), own) if own else []):
            pairs.append(TrainingPair(rec.question, sent, LABEL_NEG, "hotpotqa"))
        if own < need:
            shortfalls.append((i, need - own))
            sink.append(f"record {i}: negative pool exhausted, "
                        f"{need - own} negatives taken from global pool")
    for i, missing in shortfalls:
        pool = [s for j, rec in enumerate(records) if j != i for s in rec.other]
        take = min(missing, len(pool))
        for sent in (rng.sample(pool, take) if take else []):
            pairs.append(TrainingPair(records[i].question, sent, LABEL_NEG, "hotpotqa"))
        if take < missing:
            # nothing left anywhere: trim this record's last positives to stay balanced
            sink.append(f"record {i}: global pool exhausted, dropping {missing - take} positives")
            dropped = 0
            kept = []
            for pair in reversed(pairs):
                if (dropped < missing - take and pair.label == LABEL_POS
                        and pair.question == records[i].question):
                    dropped += 1
                    continue
                kept.append(pair)
            pairs = list(reversed(kept))
    return pairs


def export_nq_pairs(records: Sequence[HardNegativeRecord], target_size: int,
                    seed: int = 0, warnings: list[str] | None = None) -> list[TrainingPair]:
    """Balanced positive/hard-negative pairs, down-sampled to exactly target_size.

    target_size counts pairs and must be even (an odd count cannot stay
    label-balanced); when it exceeds the available balanced pool, everything
    is exported with a warning.
    """
    sink = warnings if warnings is not None else []
    if target_size < 0:
        raise ValueError("target_size must be >= 0")
    if target_size % 2:
        raise ValueError("target_size must be even to keep labels balanced")
    rng = random.Random(seed)
    pos_pool = [(r.question, r.positive) for r in records]
    neg_pool = [(r.question, hn) for r in records for hn in r.hard_negatives]
    half = target_size // 2
    available = min(len(pos_pool), len(neg_pool))
    if half > available:
        sink.append(f"target_size {target_size} exceeds available balanced pool "
                    f"{2 * available}, exporting all")
        half = available
    pairs = [TrainingPair(q, c, LABEL_POS, "nq") for q, c in rng.sample(pos_pool, half)]
    pairs += [TrainingPair(q, c, LABEL_NEG, "nq") for q, c in rng.sample(neg_pool, half)]
    return pairs


def _tsv_field(value: str) -> str:
    return _FIELD_WS_RE.sub(" ", value)


def write_pairs_tsv(pairs: Sequence[TrainingPair], path: str | Path, seed: int) -> None:
    """Tab-separated export: one header line with seed and counts, then
    question/context/label/source rows (internal tabs/newlines folded to spaces)."""
    n_pos = sum(1 for p in pairs if p.label == LABEL_POS)
    n_neg = len(pairs) - n_pos
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"#{PAIRS_FORMAT}\tseed={seed}\tpositives={n_pos}\tnegatives={n_neg}\n")
        for p in pairs:
            fh.write("\t".join(_tsv_field(v) for v in (p.question, p.context, p.label, p.source)) + "\n")


def read_pairs_tsv(path: str | Path) -> tuple[list[TrainingPair], dict[str, str]]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header_line = fh.readline().rstrip("\n")
        if not header_line.startswith(f"#{PAIRS_FORMAT}"):
            raise ValueError(f"{path}: not a {PAIRS_FORMAT} file")
        header = dict(part.split("=", 1) for part in header_line.split("\t")[1:])
        pairs = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4 or fields[2] not in (LABEL_POS, LABEL_NEG):
                raise ValueError(f"{path}:{lineno}: malformed pair row")
            pairs.append(TrainingPair(*fields))
    return pairs, header
