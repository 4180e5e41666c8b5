"""Interpretable passage retrieval over titled page collections.

Queries are linked (entities, events) and decomposed into hypothesis
sentences whose events are linked again; passages of the joint title set
are coarse-filtered with BM25 and re-ranked by a binary relevance scorer.
"""

__version__ = "0.1.0"

from .corpus import Document, Passage, PassageStore, chunk_document, ingest_corpus
from .index import Bm25Params, InvertedIndex, ScoredPassage, build_index, tokenize, top_k
from .pipeline import Components, PipelineConfig, QueryTrace, retrieve, retrieve_batch
from .providers import (
    Decomposition,
    ProviderConfig,
    ProviderSuite,
    TitleCandidate,
    TitleSet,
    generate_titles,
)
from .rerank import LexicalScorer, RankedPassage, RemoteScorer, TrainingPair, rerank

__all__ = [
    "Bm25Params",
    "Components",
    "Decomposition",
    "Document",
    "InvertedIndex",
    "LexicalScorer",
    "Passage",
    "PassageStore",
    "PipelineConfig",
    "ProviderConfig",
    "ProviderSuite",
    "QueryTrace",
    "RankedPassage",
    "RemoteScorer",
    "ScoredPassage",
    "TitleCandidate",
    "TitleSet",
    "TrainingPair",
    "build_index",
    "chunk_document",
    "generate_titles",
    "ingest_corpus",
    "rerank",
    "retrieve",
    "retrieve_batch",
    "tokenize",
    "top_k",
]
