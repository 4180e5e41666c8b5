"""Titled-page corpus: ingest, 100-word block chunking, and passage lookup.

Pages are addressed by title (the linking key). Each page body is split
into fixed-size word blocks; the block is the retrieval unit everywhere
downstream. A "word" is a maximal run of non-whitespace characters.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator
from urllib.parse import quote, unquote

BLOCK_WORDS = 100
STORE_FORMAT = "pagehop-store/1"


class CorpusError(ValueError):
    """Malformed corpus input: bad record, duplicate id/title, corrupt store file."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    text: str


@dataclass(frozen=True)
class Passage:
    passage_id: str
    page_title: str
    block_index: int
    text: str
    word_count: int


@dataclass(frozen=True)
class IngestStats:
    docs: int
    passages: int
    words: int


def make_passage_id(title: str, block_index: int) -> str:
    """Deterministic id: percent-encoded title + block index."""
    return f"{quote(title, safe='')}#{block_index}"


def title_of_passage_id(pid: str) -> str:
    encoded, _, _ = pid.rpartition("#")
    return unquote(encoded)


def chunk_document(doc: Document, block_words: int = BLOCK_WORDS) -> list[Passage]:
    """Split a page into blocks of exactly `block_words` words (last may be short).

    Inter-word whitespace is normalized to single spaces; joining the blocks'
    word sequences in order reproduces the page's word sequence.
    """
    words = doc.text.split()
    passages = []
    for block_index, start in enumerate(range(0, len(words), block_words)):
        block = words[start : start + block_words]
        passages.append(
            Passage(
                passage_id=make_passage_id(doc.title, block_index),
                page_title=doc.title,
                block_index=block_index,
                text=" ".join(block),
                word_count=len(block),
            )
        )
    return passages


class PassageStore:
    """Immutable collection of passages keyed by page title.

    Titles with empty/whitespace-only pages stay resolvable (mapped to an
    empty passage list) so title-hit accounting stays honest.
    """

    def __init__(self, by_title: dict[str, list[Passage]], stats: IngestStats | None = None):
        self._by_title = {title: list(passages) for title, passages in by_title.items()}
        self.stats = stats or IngestStats(
            docs=len(self._by_title),
            passages=sum(len(p) for p in self._by_title.values()),
            words=sum(p.word_count for ps in self._by_title.values() for p in ps),
        )

    @property
    def titles(self) -> list[str]:
        return sorted(self._by_title)

    def get(self, title: str) -> list[Passage]:
        return list(self._by_title.get(title, []))

    def __contains__(self, title: str) -> bool:
        return title in self._by_title

    def __len__(self) -> int:
        return sum(len(p) for p in self._by_title.values())

    def passages(self) -> Iterator[Passage]:
        """All passages in (title, block_index) order."""
        for title in self.titles:
            yield from self._by_title[title]

    def passage(self, passage_id: str) -> Passage:
        title = title_of_passage_id(passage_id)
        for p in self._by_title.get(title, []):
            if p.passage_id == passage_id:
                return p
        raise KeyError(passage_id)

    def select(self, titles: Iterable[str]) -> tuple[list[Passage], list[str]]:
        """Union of passages of matching titles plus the list of unknown titles.

        Unknown titles are skipped, never fatal. Result ordered by
        (title, block_index) for determinism.
        """
        known, missing = [], []
        for title in titles:
            if title in self._by_title:
                known.append(title)
            else:
                missing.append(title)
        selected = [p for title in sorted(set(known)) for p in self._by_title[title]]
        return selected, sorted(set(missing))

    def checksum(self) -> str:
        """Content checksum over the canonical serialized passage lines."""
        digest = hashlib.sha256()
        for line in self._body_lines():
            digest.update(line.encode("utf-8"))
            digest.update(b"\n")
        return digest.hexdigest()

    def _body_lines(self) -> Iterator[str]:
        for p in self.passages():
            yield json.dumps(
                {"pid": p.passage_id, "title": p.page_title, "block": p.block_index,
                 "text": p.text, "wc": p.word_count},
                ensure_ascii=False, sort_keys=True, separators=(",", ":"),
            )

    def save(self, path: str | Path) -> None:
        """One JSON object per line, sorted by (title, block); header line first."""
        path = Path(path)
        body = list(self._body_lines())
        empty_titles = sorted(t for t, ps in self._by_title.items() if not ps)
        header = json.dumps(
            {"format": STORE_FORMAT, "corpus_checksum": self.checksum(),
             "pages": len(self._by_title), "passages": len(body),
             "empty_titles": empty_titles},
            ensure_ascii=False, sort_keys=True, separators=(",", ":"),
        )
        with path.open("w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for line in body:
                fh.write(line + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "PassageStore":
        path = Path(path)
        with path.open("r", encoding="utf-8") as fh:
            header_line = fh.readline()
            try:
                header = json.loads(header_line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: bad store header: {exc}") from exc
            if header.get("format") != STORE_FORMAT:
                raise CorpusError(f"{path}: unsupported store format {header.get('format')!r}")
            by_title: dict[str, list[Passage]] = {t: [] for t in header.get("empty_titles", [])}
            for lineno, line in enumerate(fh, start=2):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    passage = Passage(
                        passage_id=rec["pid"], page_title=rec["title"],
                        block_index=rec["block"], text=rec["text"], word_count=rec["wc"],
                    )
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise CorpusError(f"{path}:{lineno}: bad passage record: {exc}") from exc
                by_title.setdefault(passage.page_title, []).append(passage)
        store = cls(by_title)
        expected = header.get("corpus_checksum")
        if expected and store.checksum() != expected:
            raise CorpusError(f"{path}: checksum mismatch (file corrupted or edited)")
        return store


def ingest_corpus(source: str | Path | IO[str] | Iterable[str]) -> PassageStore:
    """Chunk a line-delimited corpus ({"id","title","text"} per line) into a store.

    Single pass; malformed records and duplicate ids/titles are fatal with
    the offending line number or title.
    """
    if isinstance(source, (str, Path)):
        with Path(source).open("r", encoding="utf-8") as fh:
            return ingest_corpus(fh)

    by_title: dict[str, list[Passage]] = {}
    seen_ids: set[str] = set()
    docs = passages = words = 0
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: invalid JSON: {exc}") from exc
        try:
            doc = Document(doc_id=str(rec["id"]), title=rec["title"], text=rec["text"])
        except (KeyError, TypeError) as exc:
            raise CorpusError(f"line {lineno}: record must have id/title/text fields") from exc
        if not doc.title:
            raise CorpusError(f"line {lineno}: empty title")
        if doc.title in by_title:
            raise CorpusError(f"line {lineno}: duplicate title {doc.title!r}")
        if doc.doc_id in seen_ids:
            raise CorpusError(f"line {lineno}: duplicate doc id {doc.doc_id!r}")
        seen_ids.add(doc.doc_id)
        chunks = chunk_document(doc)
        by_title[doc.title] = chunks
        docs += 1
        passages += len(chunks)
        words += sum(p.word_count for p in chunks)
    return PassageStore(by_title, stats=IngestStats(docs=docs, passages=passages, words=words))


def passages_for_titles(store: PassageStore, titles: Iterable[str]) -> list[Passage]:
    """Union of passages of the given titles; unknown titles silently skipped."""
    selected, _ = store.select(titles)
    return selected
