"""End-to-end QA pipeline: store + index + provider + scorer, with caching.

The pipeline memoizes two things, neither of which may change results:

  * answers, keyed by (question id, config fingerprint);
  * ranked retrieval lists, keyed by (question text, pre-filter); a
    cached list serves any shallower depth because BM25 top-k is a
    prefix of top-K for k <= K under the fixed tie-break.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

from .config import AppConfig
from .corpus import CorpusStore
from .evaluation import QAInstance
from .filters import read_citation_cache
from .index import Index, ScoredDocument
from .reader import (AnswerRecord, FallbackEntailmentScorer, RetrievalConfig,
                     answer)
from .remote import RemoteEmbeddingProvider, RemoteEntailmentScorer, ServiceClient
from .sentences import EmbeddingProvider


class QAPipeline:
    def __init__(self, store: CorpusStore, index: Index,
                 scorer=None, provider: EmbeddingProvider | None = None,
                 citations: Mapping[str, int | None] | None = None,
                 min_confidence: float = 0.0):
        self.store = store
        self.index = index
        self.scorer = scorer if scorer is not None else FallbackEntailmentScorer()
        self.provider = provider  # None = per-question TF-IDF fallback
        self.citations = citations
        self.min_confidence = min_confidence
        self._answers: dict[tuple[str, str], AnswerRecord] = {}
        self._retrievals: dict[tuple[str, str | None], tuple[int, list[ScoredDocument]]] = {}

    @classmethod
    def from_config(cls, config: AppConfig) -> "QAPipeline":
        store = CorpusStore(config["corpus.path"])
        index = Index.load(config["index.path"], store=store,
                           k1=config["bm25.k1"], b=config["bm25.b"])
        citations = None
        cache_path = Path(config["citations.cache"])
        if cache_path.exists():
            citations = {pmid: rec.citation_count
                         for pmid, rec in read_citation_cache(cache_path).items()}
        if config["reader.backend"] == "service":
            client = ServiceClient(config["service.url"], config["service.timeout_ms"])
            scorer = RemoteEntailmentScorer(client)
            provider = RemoteEmbeddingProvider(client)
        else:
            scorer = FallbackEntailmentScorer()
            provider = None
        return cls(store=store, index=index, scorer=scorer, provider=provider,
                   citations=citations,
                   min_confidence=config["reader.min_confidence"])

    def _retrieve(self, question_text: str, depth: int, prefilter,
                  prefilter_key: str | None) -> list[ScoredDocument]:
        key = (question_text, prefilter_key)
        cached = self._retrievals.get(key)
        if cached is not None:
            cached_depth, results = cached
            # a short list means retrieval was exhausted at cached_depth
            if cached_depth >= depth or len(results) < cached_depth:
                return results[:depth]
        results = self.index.search(question_text, depth, candidate_filter=prefilter)
        self._retrievals[key] = (depth, results)
        return results

    def answer_instance(self, instance: QAInstance,
                        config: RetrievalConfig) -> AnswerRecord:
        key = (instance.id, config.fingerprint())
        record = self._answers.get(key)
        if record is not None:
            return record

        prefilter_key = None
        if config.filter.active and config.filter_placement == "pre":
            prefilter_key = json.dumps(config.filter.as_dict(), sort_keys=True)

        record = answer(
            instance, config, self.index, self.store, self.provider, self.scorer,
            citations=self.citations, min_confidence=self.min_confidence,
            retrieve=lambda text, depth, pre: self._retrieve(text, depth, pre,
                                                             prefilter_key),
        )
        self._answers[key] = record
        return record

    def annotate_citations(self, counts: Mapping[str, int | None]) -> None:
        merged = dict(self.citations or {})
        merged.update(counts)
        self.citations = merged
