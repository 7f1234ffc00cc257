"""Sentence-level evidence selection: split, embed, rank by cosine.

The splitter is rule-based and dependency-free: a sentence ends at '.', '!'
or '?' followed by whitespace and an uppercase letter or digit, except
after a blocklisted abbreviation or anywhere inside parentheses. Joining
the output with single spaces preserves every non-whitespace character of
the input.

Embedding goes through the EmbeddingProvider protocol. The built-in
provider computes log-tf * idf vectors over a fixed fitting collection
(the pooled sentences plus the question), so it is fully deterministic and
batch-size invariant; neural embeddings arrive via the remote provider.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .corpus import CorpusStore
from .index import ScoredDocument, tokenize

# Words whose trailing period must not end a sentence.
ABBREVIATIONS = frozenset({"vs.", "approx.", "e.g.", "i.e.", "fig.", "et al.",
                           "dr.", "no."})
_TERMINATORS = ".!?"


def split_sentences(abstract: str) -> list[str]:
    """Split an abstract into trimmed, non-empty sentences."""
    text = abstract
    boundaries = []
    depth = 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
            continue
        if ch == ")":
            depth = max(0, depth - 1)
            continue
        if ch not in _TERMINATORS or depth > 0:
            continue
        j = i + 1
        if j >= len(text) or not text[j].isspace():
            continue
        while j < len(text) and text[j].isspace():
            j += 1
        if j >= len(text) or not (text[j].isupper() or text[j].isdigit()):
            continue
        if ch == "." and _ends_with_abbreviation(text, i):
            continue
        boundaries.append(i + 1)

    sentences = []
    start = 0
    for boundary in boundaries + [len(text)]:
        piece = text[start:boundary].strip()
        if piece:
            sentences.append(piece)
        start = boundary
    return sentences


def _ends_with_abbreviation(text: str, dot_index: int) -> bool:
    start = dot_index
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    word = text[start:dot_index + 1].lower()
    if word in ABBREVIATIONS:
        return True
    if word == "al.":  # the two-word entry "et al."
        prefix = text[:start].rstrip().lower()
        return prefix.endswith("et") and (len(prefix) == 2 or prefix[-3].isspace())
    return False


@dataclass(frozen=True)
class EvidenceSentence:
    text: str
    source_pmid: str
    doc_rank: int
    sent_index: int
    similarity: float


class EmbeddingProvider(Protocol):
    def embed(self, texts: list[str]) -> np.ndarray:
        """Return an array of shape (len(texts), dim); deterministic per text."""
        ...


class TfidfEmbeddingProvider:
    """Deterministic log-tf * idf embeddings over a fixed fitting collection.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1 over the collection's texts, so
    every known term has positive weight; unseen terms embed to nothing.
    """

    def __init__(self, collection: Sequence[str]):
        if not collection:
            raise ValueError("fitting collection must be non-empty")
        df: Counter = Counter()
        for text in collection:
            df.update(set(tokenize(text)))
        self._vocab = {term: i for i, term in enumerate(sorted(df))}
        n = len(collection)
        self._idf = np.zeros(len(self._vocab))
        for term, i in self._vocab.items():
            self._idf[i] = math.log((1 + n) / (1 + df[term])) + 1.0
        self.dim = len(self._vocab)

    def embed(self, texts: list[str]) -> np.ndarray:
        vectors = np.zeros((len(texts), self.dim))
        for row, text in enumerate(texts):
            for term, tf in Counter(tokenize(text)).items():
                col = self._vocab.get(term)
                if col is not None:
                    vectors[row, col] = (1.0 + math.log(tf)) * self._idf[col]
        return vectors


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; zero vectors compare as 0."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def pool_sentences(documents: Sequence[ScoredDocument],
                   store: CorpusStore) -> list[EvidenceSentence]:
    """All sentences of the given documents, in (doc_rank, sent_index) order."""
    pool = []
    for sd in documents:
        doc = store.get(sd.pmid)
        for sent_index, text in enumerate(split_sentences(doc.abstract)):
            pool.append(EvidenceSentence(text=text, source_pmid=sd.pmid,
                                         doc_rank=sd.rank, sent_index=sent_index,
                                         similarity=0.0))
    return pool


def select_top_j(question: str, documents: Sequence[ScoredDocument], j: int,
                 provider: EmbeddingProvider, store: CorpusStore,
                 ) -> list[EvidenceSentence]:
    """Top-j pooled sentences by cosine similarity to the question.

    Ties break by (doc_rank, sent_index); several sentences may come from
    the same abstract. Provider failures propagate to the caller.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    pool = pool_sentences(documents, store)
    if not pool:
        return []

    vectors = provider.embed([question] + [s.text for s in pool])
    question_vec = vectors[0]
    scored = [
        EvidenceSentence(text=s.text, source_pmid=s.source_pmid,
                         doc_rank=s.doc_rank, sent_index=s.sent_index,
                         similarity=cosine(question_vec, vectors[i + 1]))
        for i, s in enumerate(pool)
    ]
    scored.sort(key=lambda s: (-s.similarity, s.doc_rank, s.sent_index))
    return scored[:j]
