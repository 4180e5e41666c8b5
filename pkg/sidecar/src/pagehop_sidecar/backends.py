"""Model backends behind the wire ops.

The reference backends are deterministic and model-free so the service can
run (and its golden fixtures stay stable) without any model weights. Model-
backed implementations register under new names and slot in per op through
the config file.
"""
from __future__ import annotations

import re
from pathlib import Path

from . import SidecarError
from .training import load_artifact, score_with_artifact

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class LexicalLinkBackend:
    """Rank known page titles by token overlap with the text.

    Overlap is |tokens(title) ∩ tokens(text)| / |tokens(title)|; only titles
    with positive overlap are returned, ties break on ascending title.
    """

    def __init__(self, options: dict):
        path = options.get("titles")
        if not path:
            raise SidecarError("lexical-link backend needs a 'titles' file")
        try:
            raw = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise SidecarError(f"cannot load titles file {path}: {exc}") from exc
        self.titles = sorted({line.strip() for line in raw.splitlines() if line.strip()})

    def link(self, text: str, k: int) -> list[str]:
        text_tokens = set(tokens(text))
        scored = []
        for title in self.titles:
            title_tokens = set(tokens(title))
            if not title_tokens:
                continue
            overlap = len(title_tokens & text_tokens) / len(title_tokens)
            if overlap > 0:
                scored.append((title, overlap))
        scored.sort(key=lambda item: (-item[1], item[0]))
        return [title for title, _ in scored[:k]]


class TemplateDecomposeBackend:
    """Expand a query into numbered hypothesis sentences, deterministically."""

    def __init__(self, options: dict):
        self.template = options.get("template", "Supporting event {i}.{j}: {query}.")

    def decompose(self, text: str, sets: int, sentences_per_set: int) -> list[list[str]]:
        base = text.strip().rstrip("?!. ")
        return [
            [self.template.format(i=i, j=j, query=base)
             for j in range(1, sentences_per_set + 1)]
            for i in range(1, sets + 1)
        ]


class WhitespaceCorrectBackend:
    """Shape-preserving correction: normalize whitespace inside every sentence."""

    def __init__(self, options: dict):
        pass

    def correct(self, decompositions: list[list[str]]) -> list[list[str]]:
        return [[" ".join(sentence.split()) for sentence in group]
                for group in decompositions]


class OverlapScoreBackend:
    """Relevance as question-token coverage: |q ∩ c| / |q|, in [0, 1]."""

    def __init__(self, options: dict):
        pass

    def score(self, pairs: list[tuple[str, str]]) -> list[float]:
        out = []
        for question, context in pairs:
            q = set(tokens(question))
            out.append(len(q & set(tokens(context))) / len(q) if q else 0.0)
        return out


class TrainedRerankerBackend:
    """Scores pairs with a trained bag-of-words reranker artifact."""

    def __init__(self, options: dict):
        path = options.get("artifact")
        if not path:
            raise SidecarError("trained-reranker backend needs an 'artifact' path")
        self.artifact = load_artifact(path)

    def score(self, pairs: list[tuple[str, str]]) -> list[float]:
        return score_with_artifact(self.artifact, pairs)


REGISTRY = {
    "lexical-link": LexicalLinkBackend,
    "template-decompose": TemplateDecomposeBackend,
    "whitespace-correct": WhitespaceCorrectBackend,
    "overlap-score": OverlapScoreBackend,
    "trained-reranker": TrainedRerankerBackend,
}


def build_backend(name: str, options: dict):
    if name not in REGISTRY:
        raise SidecarError(f"unknown backend {name!r}; known: {', '.join(sorted(REGISTRY))}")
    return REGISTRY[name](options)
