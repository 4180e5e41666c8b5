"""Dataset adapters, answer-containment recall@K, and boolean accuracy.

A question counts as a hit at K when any of its normalized gold answers
appears as a contiguous token run inside any of the top-K retrieved texts.
Boolean datasets are scored by a pluggable yes/no answerer instead.
"""
from __future__ import annotations

import hashlib
import json
import string
import unicodedata
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .rerank import content_tokens, score_pair
from .wire import canonical_json

ANSWER_SPAN = "span"
ANSWER_BOOLEAN = "boolean"

_ARTICLES = frozenset({"a", "an", "the"})
_NORMALIZATION_VERSION = "fold-case/strip-punct/drop-articles/v1"


class DatasetError(ValueError):
    """Unknown dataset or a record that does not match the official layout."""


@dataclass(frozen=True)
class EvalQuestion:
    qid: str
    question: str
    answers: tuple[str, ...]
    answer_type: str = ANSWER_SPAN
    gold_bool: str | None = None  # "yes" | "no" for boolean questions

    def __post_init__(self):
        if self.answer_type == ANSWER_BOOLEAN and self.gold_bool not in ("yes", "no"):
            raise DatasetError(f"{self.qid}: boolean question without yes/no gold")
        if self.answer_type == ANSWER_SPAN and not self.answers:
            raise DatasetError(f"{self.qid}: span question without answer strings")


@dataclass
class MetricReport:
    dataset: str
    n_questions: int
    recall_at: dict[int, float]
    accuracy: float | None
    per_question: list[dict]
    fingerprint: str
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "n_questions": self.n_questions,
            "recall_at": {str(k): v for k, v in sorted(self.recall_at.items())},
            "accuracy": self.accuracy,
            "per_question": self.per_question,
            "fingerprint": self.fingerprint,
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping) -> "MetricReport":
        return cls(
            dataset=data["dataset"],
            n_questions=data["n_questions"],
            recall_at={int(k): v for k, v in data.get("recall_at", {}).items()},
            accuracy=data.get("accuracy"),
            per_question=list(data.get("per_question", [])),
            fingerprint=data.get("fingerprint", ""),
            warnings=list(data.get("warnings", [])),
        )


# --- answer normalization and containment ----------------------------------

def _strip_punct(text: str) -> str:
    return "".join(
        " " if ch in string.punctuation or unicodedata.category(ch).startswith("P") else ch
        for ch in text
    )


def normalize_answer(s: str) -> str:
    """Lowercase, punctuation to spaces, collapse whitespace, drop a/an/the."""
    tokens = [t for t in _strip_punct(s.lower()).split() if t not in _ARTICLES]
    return " ".join(tokens)


def _is_token_run(needle: Sequence[str], haystack: Sequence[str]) -> bool:
    n = len(needle)
    if n == 0 or n > len(haystack):
        return False
    return any(haystack[i : i + n] == list(needle) for i in range(len(haystack) - n + 1))


def contains_answer(passages: Iterable[str], answers: Iterable[str]) -> bool:
    """True iff any normalized answer occurs as a contiguous token run in any passage."""
    needles = [normalize_answer(a).split() for a in answers]
    needles = [n for n in needles if n]
    if not needles:
        return False
    for passage in passages:
        tokens = normalize_answer(passage).split()
        if any(_is_token_run(needle, tokens) for needle in needles):
            return True
    return False


# --- dataset adapters -------------------------------------------------------

def _load_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"{path}: {exc}") from exc


def _iter_jsonl(path: Path):
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc


def _load_nq(path: Path) -> list[EvalQuestion]:
    # one object per line: {"question": str, "answer": [str, ...]}
    questions = []
    for lineno, rec in _iter_jsonl(path):
        try:
            questions.append(EvalQuestion(
                qid=f"nq-{lineno}", question=rec["question"],
                answers=tuple(rec["answer"]),
            ))
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"{path}:{lineno}: bad record {rec!r}") from exc
    return questions


def _load_triviaqa(path: Path) -> list[EvalQuestion]:
    # {"Data": [{"QuestionId", "Question", "Answer": {"Value", "Aliases": [...]}}]}
    data = _load_json(path)
    questions = []
    for i, rec in enumerate(data.get("Data", [])):
        try:
            answer = rec["Answer"]
            aliases = answer.get("Aliases") or [answer["Value"]]
            questions.append(EvalQuestion(
                qid=str(rec.get("QuestionId", f"tqa-{i}")), question=rec["Question"],
                answers=tuple(aliases),
            ))
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"{path}: bad record {i}: {rec!r}") from exc
    return questions


def _load_hotpotqa(path: Path) -> list[EvalQuestion]:
    # array of {"_id", "question", "answer", ...}; yes/no answers are boolean questions
    data = _load_json(path)
    questions = []
    for i, rec in enumerate(data):
        try:
            answer = rec["answer"]
            norm = normalize_answer(answer)
            if norm in ("yes", "no"):
                questions.append(EvalQuestion(
                    qid=str(rec["_id"]), question=rec["question"],
                    answers=(answer,), answer_type=ANSWER_BOOLEAN, gold_bool=norm,
                ))
            else:
                questions.append(EvalQuestion(
                    qid=str(rec["_id"]), question=rec["question"], answers=(answer,),
                ))
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"{path}: bad record {i}: {rec!r}") from exc
    return questions


def _load_boolq(path: Path) -> list[EvalQuestion]:
    # one object per line: {"question", "answer": true|false, "passage", ...}
    questions = []
    for lineno, rec in _iter_jsonl(path):
        try:
            gold = "yes" if bool(rec["answer"]) else "no"
            questions.append(EvalQuestion(
                qid=f"boolq-{lineno}", question=rec["question"], answers=(),
                answer_type=ANSWER_BOOLEAN, gold_bool=gold,
            ))
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"{path}:{lineno}: bad record {rec!r}") from exc
    return questions


def _load_strategyqa(path: Path) -> list[EvalQuestion]:
    # array of {"qid", "question", "answer": true|false, ...}
    data = _load_json(path)
    questions = []
    for i, rec in enumerate(data):
        try:
            gold = "yes" if bool(rec["answer"]) else "no"
            questions.append(EvalQuestion(
                qid=str(rec.get("qid", f"stqa-{i}")), question=rec["question"], answers=(),
                answer_type=ANSWER_BOOLEAN, gold_bool=gold,
            ))
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"{path}: bad record {i}: {rec!r}") from exc
    return questions


_ADAPTERS: dict[str, Callable[[Path], list[EvalQuestion]]] = {
    "nq": _load_nq,
    "triviaqa": _load_triviaqa,
    "hotpotqa": _load_hotpotqa,
    "boolq": _load_boolq,
    "strategyqa": _load_strategyqa,
}

_ALIASES = {
    "nq-open": "nq", "naturalquestions": "nq",
    "tqa": "triviaqa", "hotpot": "hotpotqa", "stqa": "strategyqa",
}

DATASET_NAMES = tuple(_ADAPTERS)


def canonical_dataset_name(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in _ADAPTERS:
        raise DatasetError(f"unknown dataset {name!r}; known: {', '.join(sorted(_ADAPTERS))}")
    return key


def load_dataset(name: str, path: str | Path) -> list[EvalQuestion]:
    return _ADAPTERS[canonical_dataset_name(name)](Path(path))


def filter_yes_no(questions: Sequence[EvalQuestion],
                  warnings: list[str] | None = None) -> list[EvalQuestion]:
    """Drop questions whose gold answer is exactly yes/no (for recall datasets)."""
    kept = [q for q in questions if q.answer_type != ANSWER_BOOLEAN]
    removed = len(questions) - len(kept)
    if warnings is not None and removed:
        warnings.append(f"removed {removed} yes/no questions")
    if warnings is not None and not kept:
        warnings.append("no questions left after yes/no filtering")
    return kept


# --- run files and metrics ---------------------------------------------------

def load_run(path: str | Path) -> list[dict]:
    """One QueryTrace JSON object per line, as written by the pipeline."""
    traces = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                traces.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad trace line: {exc}") from exc
    return traces


def _resolve_run(run: str | Path | Sequence[dict]) -> list[dict]:
    if isinstance(run, (str, Path)):
        return load_run(run)
    return list(run)


def _run_checksum(traces: Sequence[dict]) -> str:
    digest = hashlib.sha256()
    for trace in traces:
        digest.update(canonical_json(trace).encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


def _match_traces(questions: Sequence[EvalQuestion], traces: Sequence[dict],
                  warnings: list[str]) -> list[dict | None]:
    """Pair each question with its trace: by qid when traces carry them,
    otherwise by exact query text (duplicates consumed in file order)."""
    by_qid = {t["qid"]: t for t in traces if t.get("qid")}
    if by_qid and all(q.qid in by_qid for q in questions):
        return [by_qid[q.qid] for q in questions]
    by_query: dict[str, deque] = {}
    for trace in traces:
        by_query.setdefault(trace.get("query", ""), deque()).append(trace)
    matched: list[dict | None] = []
    for q in questions:
        bucket = by_query.get(q.question)
        if bucket:
            matched.append(bucket.popleft())
        else:
            warnings.append(f"no trace for question {q.qid}")
            matched.append(None)
    return matched


def _final_texts(trace: dict | None) -> list[str]:
    if not trace:
        return []
    return [entry["text"] for entry in trace.get("final", [])]


def _fingerprint(dataset: str, ks: Sequence[int], traces: Sequence[dict],
                 extra: Mapping[str, object] | None = None) -> str:
    payload = {
        "dataset": dataset,
        "ks": sorted(ks),
        "normalization": _NORMALIZATION_VERSION,
        "run_checksum": _run_checksum(traces),
    }
    if extra:
        payload.update(extra)
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def recall_at_k(run: str | Path | Sequence[dict], questions: Sequence[EvalQuestion],
                ks: Sequence[int], dataset: str = "run") -> MetricReport:
    """Fraction of questions whose top-K texts contain a gold answer, per K."""
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ValueError("every K must be >= 1")
    traces = _resolve_run(run)
    warnings: list[str] = []
    matched = _match_traces(questions, traces, warnings)
    per_question = []
    for q, trace in zip(questions, matched):
        texts = _final_texts(trace)
        first_hit = None
        for rank, text in enumerate(texts, start=1):
            if contains_answer([text], q.answers):
                first_hit = rank
                break
        per_question.append({"qid": q.qid, "first_hit_rank": first_hit})
    n = len(questions)
    recall = {
        k: (sum(1 for pq in per_question
                if pq["first_hit_rank"] is not None and pq["first_hit_rank"] <= k) / n
            if n else 0.0)
        for k in ks
    }
    return MetricReport(
        dataset=dataset, n_questions=n, recall_at=recall, accuracy=None,
        per_question=per_question,
        fingerprint=_fingerprint(dataset, ks, traces, {"metric": "recall"}),
        warnings=warnings,
    )


class HeuristicAnswerer:
    """Model-free yes/no baseline: yes when the retrieved texts cover at
    least `threshold` of the question's content tokens."""

    def __init__(self, threshold: float = 0.5):
        self.threshold = threshold

    def describe(self) -> str:
        return f"heuristic(threshold={self.threshold})"

    def __call__(self, question: str, texts: Sequence[str]) -> str:
        q = content_tokens(question)
        if not q or not texts:
            return "no"
        covered = set().union(*(content_tokens(t) for t in texts))
        return "yes" if len(q & covered) / len(q) >= self.threshold else "no"


class ScorerAnswerer:
    """Adapter: any relevance scorer becomes a yes/no answerer via a threshold."""

    def __init__(self, scorer, threshold: float = 0.5, max_texts: int = 5):
        self.scorer = scorer
        self.threshold = threshold
        self.max_texts = max_texts

    def describe(self) -> str:
        return f"scorer({self.scorer.describe()}, threshold={self.threshold})"

    def __call__(self, question: str, texts: Sequence[str]) -> str:
        context = " ".join(texts[: self.max_texts]).strip()
        if not context:
            return "no"
        return "yes" if score_pair(question, context, self.scorer) >= self.threshold else "no"


def boolean_accuracy(run: str | Path | Sequence[dict], questions: Sequence[EvalQuestion],
                     answerer: Callable[[str, Sequence[str]], str],
                     k: int = 5, dataset: str = "run") -> MetricReport:
    """Accuracy of the answerer's yes/no over top-k texts against gold labels.

    An answerer failure (exception or non-yes/no output) counts as incorrect.
    """
    traces = _resolve_run(run)
    warnings: list[str] = []
    matched = _match_traces(questions, traces, warnings)
    per_question = []
    correct = 0
    for q, trace in zip(questions, matched):
        texts = _final_texts(trace)[:k]
        try:
            predicted = answerer(q.question, texts)
            if predicted not in ("yes", "no"):
                raise ValueError(f"answerer returned {predicted!r}")
        except Exception as exc:
            warnings.append(f"answerer failed on {q.qid}: {exc}")
            predicted = None
        ok = predicted == q.gold_bool
        correct += ok
        per_question.append({"qid": q.qid, "predicted": predicted,
                             "gold": q.gold_bool, "correct": ok})
    n = len(questions)
    return MetricReport(
        dataset=dataset, n_questions=n, recall_at={},
        accuracy=(correct / n) if n else 0.0,
        per_question=per_question,
        fingerprint=_fingerprint(dataset, [k], traces, {"metric": "accuracy"}),
        warnings=warnings,
    )


# --- report rendering --------------------------------------------------------

_DISPLAY = {"nq": "NQ", "triviaqa": "TQA", "hotpotqa": "Hotpot",
            "boolq": "BoolQ", "strategyqa": "STQA"}
_BENCH_ORDER = ("nq", "triviaqa", "hotpotqa", "boolq", "strategyqa")


def _align(rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                     for row in rows)


def render_report(report: MetricReport) -> str:
    rows = [["metric", "value"]]
    for k, v in sorted(report.recall_at.items()):
        rows.append([f"{_DISPLAY.get(report.dataset, report.dataset)}@{k}", f"{100 * v:.1f}"])
    if report.accuracy is not None:
        rows.append([f"{_DISPLAY.get(report.dataset, report.dataset)} Acc.", f"{100 * report.accuracy:.1f}"])
    rows.append(["questions", str(report.n_questions)])
    return _align(rows)


def benchmark_table(reports: Mapping[str, MetricReport], system: str = "pagehop") -> str:
    """One aligned row of recall@K and accuracy columns across the benchmark
    suite: recall datasets first (each at every evaluated K), boolean
    accuracies last."""
    header = ["System"]
    values = [system]
    for name in _BENCH_ORDER:
        key = canonical_dataset_name(name)
        if key not in reports:
            continue
        report = reports[key]
        disp = _DISPLAY[key]
        for k, v in sorted(report.recall_at.items()):
            header.append(f"{disp}@{k}")
            values.append(f"{100 * v:.1f}")
        if report.accuracy is not None:
            header.append(f"{disp} Acc.")
            values.append(f"{100 * report.accuracy:.1f}")
    return _align([header, values])
