"""Title generation: entity/event linking and query decomposition.

For a query we collect page titles from three routes: entity linking on the
query (10 titles), event linking on the query (5), and event linking on each
sentence of five generated 3-sentence decompositions (5 titles each). The
joint, first-occurrence-ordered set of titles feeds passage selection.

Every provider sits behind a wire transport; any provider failure degrades
to an empty result with a recorded warning, never a crash.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .index import tokenize
from .wire import ProviderError

SOURCE_ENTITY_QUERY = "entity_link_query"
SOURCE_EVENT_QUERY = "event_link_query"
SOURCE_EVENT_DECOMPOSITION = "event_link_decomposition"


@dataclass(frozen=True)
class TitleCandidate:
    title: str
    source: str
    rank: int
    origin_sentence: str | None = None

    def __post_init__(self):
        if (self.source == SOURCE_EVENT_DECOMPOSITION) != (self.origin_sentence is not None):
            raise ValueError("origin_sentence is set iff source is event_link_decomposition")


@dataclass(frozen=True)
class Decomposition:
    set_index: int
    sentences: tuple[str, str, str]


@dataclass
class TitleSet:
    candidates: list[TitleCandidate]
    unique_titles: list[str]

    @classmethod
    def from_candidates(cls, candidates: Sequence[TitleCandidate]) -> "TitleSet":
        return cls(list(candidates), list(dict.fromkeys(c.title for c in candidates)))


@dataclass(frozen=True)
class ProviderConfig:
    n_entity: int = 10
    n_event: int = 5
    n_sets: int = 5
    n_sentences: int = 3
    jobs: int = 1

    def __post_init__(self):
        if min(self.n_entity, self.n_event, self.n_sets, self.n_sentences, self.jobs) < 1:
            raise ValueError("provider counts must be positive")

    @property
    def max_titles(self) -> int:
        return self.n_entity + self.n_event + self.n_sets * self.n_sentences * self.n_event


@dataclass
class ProviderSuite:
    """Transports per op; decomposer/corrector optional (None = disabled/identity)."""

    entity: object
    event: object
    decomposer: object | None = None
    corrector: object | None = None

    def describe(self) -> dict[str, str | None]:
        return {
            "entity": self.entity.describe() if self.entity else None,
            "event": self.event.describe() if self.event else None,
            "decomposer": self.decomposer.describe() if self.decomposer else None,
            "corrector": self.corrector.describe() if self.corrector else None,
        }


@dataclass
class TitleGeneration:
    title_set: TitleSet
    decompositions: list[Decomposition]
    corrected_decompositions: list[Decomposition]
    warnings: list[str] = field(default_factory=list)


def _clean_titles(raw, op: str, k: int, warnings: list[str]) -> list[str]:
    titles = []
    if not isinstance(raw, list):
        warnings.append(f"{op}: malformed titles payload, ignoring")
        return titles
    for item in raw:
        if isinstance(item, str) and item.strip():
            titles.append(item)
        else:
            warnings.append(f"{op}: dropped non-string or empty title {item!r}")
    if len(titles) > k:
        warnings.append(f"{op}: provider returned {len(titles)} titles, truncated to {k}")
        titles = titles[:k]
    return titles


def _link(transport, op: str, text: str, k: int, source: str,
          origin_sentence: str | None, warnings: list[str]) -> list[TitleCandidate]:
    if not text or not text.strip():
        raise ValueError(f"{op}: text must be non-empty")
    try:
        response = transport.call({"op": op, "text": text, "k": k})
    except ProviderError as exc:
        warnings.append(f"{op} degraded: {exc}")
        return []
    titles = _clean_titles(response.get("titles"), op, k, warnings)
    return [
        TitleCandidate(title=t, source=source, rank=r, origin_sentence=origin_sentence)
        for r, t in enumerate(titles, start=1)
    ]


def entity_link(transport, query: str, k: int = 10,
                warnings: list[str] | None = None) -> list[TitleCandidate]:
    """Link explicit entities of the query to page titles (at most k)."""
    sink = warnings if warnings is not None else []
    return _link(transport, "entity_link", query, k, SOURCE_ENTITY_QUERY, None, sink)


def event_link(transport, text: str, k: int = 5, source: str = SOURCE_EVENT_QUERY,
               origin_sentence: str | None = None,
               warnings: list[str] | None = None) -> list[TitleCandidate]:
    """Link the event described by `text` to page titles (at most k)."""
    sink = warnings if warnings is not None else []
    return _link(transport, "event_link", text, k, source, origin_sentence, sink)


def _clean_sets(raw, op: str, n_sets: int, n_sentences: int,
                warnings: list[str]) -> list[list[str]]:
    if not isinstance(raw, list):
        warnings.append(f"{op}: malformed decompositions payload, ignoring")
        return []
    sets = []
    for i, sentences in enumerate(raw):
        if (not isinstance(sentences, list)
                or len(sentences) != n_sentences
                or not all(isinstance(s, str) and s.strip() for s in sentences)):
            warnings.append(f"{op}: dropped malformed set {i} (expected {n_sentences} non-empty sentences)")
            continue
        sets.append(list(sentences))
    if len(sets) > n_sets:
        warnings.append(f"{op}: provider returned {len(sets)} sets, truncated to {n_sets}")
        sets = sets[:n_sets]
    return sets


def decompose(transport, query: str, n_sets: int = 5, n_sentences: int = 3,
              warnings: list[str] | None = None) -> list[Decomposition]:
    """Generate hypothesis-sentence sets for the query (n_sets sets of n_sentences)."""
    if not query or not query.strip():
        raise ValueError("decompose: query must be non-empty")
    sink = warnings if warnings is not None else []
    try:
        response = transport.call({"op": "decompose", "text": query,
                                   "sets": n_sets, "sentences_per_set": n_sentences})
    except ProviderError as exc:
        sink.append(f"decompose degraded: {exc}")
        return []
    sets = _clean_sets(response.get("decompositions"), "decompose", n_sets, n_sentences, sink)
    if len(sets) < n_sets:
        sink.append(f"decompose: provider returned {len(sets)} usable sets (expected {n_sets})")
    return [Decomposition(set_index=i, sentences=tuple(s)) for i, s in enumerate(sets)]


def correct_decompositions(transport, decompositions: Sequence[Decomposition],
                           query: str = "",
                           warnings: list[str] | None = None) -> list[Decomposition]:
    """Ask the corrector to fix factual errors; shape is always preserved.

    A malformed corrected set (wrong sentence count, empty sentence) keeps
    the original set; a degraded provider returns the input unchanged.
    """
    sink = warnings if warnings is not None else []
    if transport is None or not decompositions:
        return list(decompositions)
    payload = [list(d.sentences) for d in decompositions]
    try:
        response = transport.call({"op": "correct", "text": query, "decompositions": payload})
    except ProviderError as exc:
        sink.append(f"correct degraded, keeping original decompositions: {exc}")
        return list(decompositions)
    raw = response.get("decompositions")
    if not isinstance(raw, list):
        sink.append("correct: malformed payload, keeping original decompositions")
        return list(decompositions)
    if len(raw) != len(decompositions):
        sink.append(f"correct: provider returned {len(raw)} sets for {len(decompositions)} inputs")
    corrected = []
    for i, original in enumerate(decompositions):
        n = len(original.sentences)
        candidate = raw[i] if i < len(raw) else None
        if (isinstance(candidate, list) and len(candidate) == n
                and all(isinstance(s, str) and s.strip() for s in candidate)):
            corrected.append(Decomposition(set_index=original.set_index,
                                           sentences=tuple(candidate)))
        else:
            if candidate is not None:
                sink.append(f"correct: set {i} malformed, original retained")
            corrected.append(original)
    return corrected


def generate_titles(query: str, suite: ProviderSuite,
                    config: ProviderConfig | None = None,
                    correct: bool = False) -> TitleGeneration:
    """Run the full linking -> decomposition -> linking flow and join the titles.

    Candidate order is deterministic: entity links, query event links, then
    decomposition-sentence event links in set/sentence/rank order; unique
    titles keep first occurrence. Sentence-level link calls may run
    concurrently (config.jobs) but merge in that same order.
    """
    if not query or not query.strip():
        raise ValueError("generate_titles: query must be non-empty")
    config = config or ProviderConfig()
    warnings: list[str] = []
    candidates: list[TitleCandidate] = []

    candidates.extend(entity_link(suite.entity, query, config.n_entity, warnings))
    candidates.extend(event_link(suite.event, query, config.n_event,
                                 source=SOURCE_EVENT_QUERY, warnings=warnings))

    decompositions: list[Decomposition] = []
    if suite.decomposer is not None:
        decompositions = decompose(suite.decomposer, query,
                                   config.n_sets, config.n_sentences, warnings)
    corrected = decompositions
    if correct and decompositions:
        if suite.corrector is None:
            warnings.append("correct requested but no corrector configured")
        else:
            corrected = correct_decompositions(suite.corrector, decompositions,
                                               query=query, warnings=warnings)

    sentences = [s for d in corrected for s in d.sentences]
    if sentences:
        def link_sentence(sentence: str) -> tuple[list[TitleCandidate], list[str]]:
            local: list[str] = []
            found = event_link(suite.event, sentence, config.n_event,
                               source=SOURCE_EVENT_DECOMPOSITION,
                               origin_sentence=sentence, warnings=local)
            return found, local

        if config.jobs > 1:
            with ThreadPoolExecutor(max_workers=config.jobs) as pool:
                results = list(pool.map(link_sentence, sentences))
        else:
            results = [link_sentence(s) for s in sentences]
        for found, local in results:  # merged in sentence order, not completion order
            candidates.extend(found)
            warnings.extend(local)

    title_set = TitleSet.from_candidates(candidates)
    if not title_set.unique_titles:
        warnings.append("no titles: all providers returned empty results")
    return TitleGeneration(
        title_set=title_set,
        decompositions=decompositions,
        corrected_decompositions=corrected,
        warnings=warnings,
    )


def lexical_overlap(text_tokens: set[str], title: str) -> float:
    """|tokens(title) ∩ tokens(text)| / |tokens(title)|; 0 for untokenizable titles."""
    title_tokens = set(tokenize(title))
    if not title_tokens:
        return 0.0
    return len(title_tokens & text_tokens) / len(title_tokens)


def rank_titles_lexically(text: str, titles: Iterable[str], k: int) -> list[str]:
    text_tokens = set(tokenize(text))
    scored = [(t, lexical_overlap(text_tokens, t)) for t in titles]
    scored = [(t, s) for t, s in scored if s > 0]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return [t for t, _ in scored[:k]]


def fallback_lexical_linker(text: str, k: int, title_dictionary: Iterable[str],
                            source: str = SOURCE_ENTITY_QUERY,
                            origin_sentence: str | None = None) -> list[TitleCandidate]:
    """Deterministic model-free linker: rank titles by normalized token overlap.

    Ties break by ascending title; zero-overlap titles are never returned.
    """
    ranked = rank_titles_lexically(text, title_dictionary, k)
    return [TitleCandidate(title=t, source=source, rank=r, origin_sentence=origin_sentence)
            for r, t in enumerate(ranked, start=1)]


class LexicalLinkTransport:
    """Built-in fallback provider over the corpus's own titles.

    Speaks the wire protocol in-process: link ops rank titles by token
    overlap, decompose yields zero sets, correct is the identity.
    """

    def __init__(self, titles: Iterable[str]):
        self.titles = sorted(set(titles))
        self.last_error: str | None = None

    def describe(self) -> str:
        return f"lexical:{len(self.titles)} titles"

    def call(self, request: dict) -> dict:
        op = request.get("op")
        if op in ("entity_link", "event_link"):
            k = int(request.get("k", 10))
            return {"titles": rank_titles_lexically(request.get("text", ""), self.titles, k)}
        if op == "decompose":
            return {"decompositions": []}
        if op == "correct":
            return {"decompositions": request.get("decompositions", [])}
        return {"error": f"unsupported op {op!r}"}
