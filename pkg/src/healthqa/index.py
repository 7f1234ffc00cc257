"""Inverted index with Okapi BM25 ranking over the corpus store.

Scoring follows the Okapi formula with the +1-inside-log IDF variant, which
keeps every IDF strictly positive:

    score(q, d) = sum_t IDF(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
    IDF(t)      = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))

Query tokens are scored in the order given; a token occurring twice in the
query contributes twice. Ties in ranked output break by ascending pmid
(zero-padded numeric order).

On-disk format (index.bin), all integers little-endian:

    bytes 0-5    magic "EQIDX1"
    bytes 6-9    uint32: header length H
    next H bytes header JSON (UTF-8) with keys
                 format_version, fields, doc_count, total_len,
                 docs:  [[pmid, doc_len], ...]        in ordinal order
                 terms: [[term, df, offset, nbytes], ...]  sorted by term,
                        offset relative to the start of the postings blob
    rest         postings blob; per term, df pairs of LEB128 varints
                 (ordinal delta, tf), first delta = absolute ordinal

Doc ordinals are assigned in sorted-pmid order, so building from the same
store always produces a byte-identical file. The built index is immutable;
queries are safe from any number of concurrent callers.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .corpus import CorpusStore, Document

MAGIC = b"EQIDX1"

_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str, *, stopwords: frozenset[str] | None = None,
             stem: Callable[[str], str] | None = None) -> list[str]:
    """Lowercased alphanumeric tokens; any non-alphanumeric character separates.

    No stemming or stopword removal by default; both are opt-in hooks.
    """
    tokens = _TOKEN_RE.findall(text.lower())
    if stopwords:
        tokens = [t for t in tokens if t not in stopwords]
    if stem:
        tokens = [stem(t) for t in tokens]
    return tokens


def pmid_sort_key(pmid: str) -> tuple[int, str]:
    # (length, text) orders digit strings like their zero-padded numeric value
    return (len(pmid), pmid)


@dataclass(frozen=True)
class ScoredDocument:
    pmid: str
    score: float
    rank: int


@dataclass(frozen=True)
class IndexStats:
    doc_count: int
    avg_doc_len: float
    df: dict[str, int]


class IndexError_(RuntimeError):
    """Raised for unknown pmids and malformed index files."""


class Index:
    """BM25 inverted index; build from a store or load from index.bin."""

    def __init__(self, k1: float = 1.2, b: float = 0.75,
                 fields: str = "title_abstract"):
        if fields not in ("title_abstract", "abstract"):
            raise ValueError(f"unknown fields mode: {fields!r}")
        self.k1 = k1
        self.b = b
        self.fields = fields
        self.store: CorpusStore | None = None
        self._pmids: list[str] = []
        self._ordinals: dict[str, int] = {}
        self._doc_lens: list[int] = []
        self._total_len = 0
        self._postings: dict[str, list[tuple[int, int]]] = {}

    # -- construction ------------------------------------------------------

    def _doc_text(self, doc: Document) -> str:
        if self.fields == "abstract":
            return doc.abstract
        return doc.title + " " + doc.abstract

    @classmethod
    def build(cls, store: CorpusStore, k1: float = 1.2, b: float = 0.75,
              fields: str = "title_abstract") -> "Index":
        index = cls(k1=k1, b=b, fields=fields)
        index.store = store
        index._pmids = sorted(store.pmids(), key=pmid_sort_key)
        index._ordinals = {p: i for i, p in enumerate(index._pmids)}
        index._doc_lens = [0] * len(index._pmids)

        postings: dict[str, list[tuple[int, int]]] = {}
        for pmid in index._pmids:
            ordinal = index._ordinals[pmid]
            tokens = tokenize(index._doc_text(store.get(pmid)))
            index._doc_lens[ordinal] = len(tokens)
            index._total_len += len(tokens)
            for term, tf in sorted(Counter(tokens).items()):
                postings.setdefault(term, []).append((ordinal, tf))
        index._postings = postings
        return index

    # -- stats -------------------------------------------------------------

    @property
    def doc_count(self) -> int:
        return len(self._pmids)

    @property
    def avg_doc_len(self) -> float:
        return self._total_len / self.doc_count if self.doc_count else 0.0

    def stats(self) -> IndexStats:
        return IndexStats(
            doc_count=self.doc_count,
            avg_doc_len=self.avg_doc_len,
            df={term: len(plist) for term, plist in self._postings.items()},
        )

    # -- scoring -----------------------------------------------------------

    def idf(self, term: str) -> float:
        df = len(self._postings.get(term, ()))
        if df == 0:
            return 0.0
        n = self.doc_count
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def _contribution(self, idf: float, tf: int, doc_len: int) -> float:
        # evaluated exactly as the formula reads, so independent direct
        # evaluations produce bit-identical floats (stable tie-breaking)
        return idf * tf * (self.k1 + 1.0) / (
            tf + self.k1 * (1.0 - self.b + self.b * doc_len / self.avg_doc_len))

    def score(self, query_terms: Iterable[str], pmid: str) -> float:
        """BM25 score of one document; absent terms contribute 0."""
        try:
            ordinal = self._ordinals[pmid]
        except KeyError:
            raise IndexError_(f"pmid not in index: {pmid}") from None
        doc_len = self._doc_lens[ordinal]
        total = 0.0
        for term in query_terms:
            plist = self._postings.get(term)
            if not plist:
                continue
            tf = _tf_for(plist, ordinal)
            if tf:
                total += self._contribution(self.idf(term), tf, doc_len)
        return total

    def search(self, question_text: str, k: int,
               candidate_filter: Callable[[Document], bool] | None = None,
               ) -> list[ScoredDocument]:
        """Top-k documents by BM25 among those passing candidate_filter.

        Zero-scoring documents are excluded, so fewer than k may return.
        The filter is a predicate on Document metadata and requires an
        attached store.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if candidate_filter is not None and self.store is None:
            raise IndexError_("candidate_filter requires an attached store")

        query = tokenize(question_text)
        scores: dict[int, float] = {}
        for term in query:
            plist = self._postings.get(term)
            if not plist:
                continue
            idf = self.idf(term)
            for ordinal, tf in plist:
                w = self._contribution(idf, tf, self._doc_lens[ordinal])
                scores[ordinal] = scores.get(ordinal, 0.0) + w

        candidates = []
        for ordinal, score in scores.items():
            if score <= 0.0:
                continue
            pmid = self._pmids[ordinal]
            if candidate_filter is not None and not candidate_filter(self.store.get(pmid)):
                continue
            candidates.append((pmid, score))

        candidates.sort(key=lambda c: (-c[1], pmid_sort_key(c[0])))
        return [ScoredDocument(pmid=p, score=s, rank=i + 1)
                for i, (p, s) in enumerate(candidates[:k])]

    # -- persistence -------------------------------------------------------

    def save(self, path: str | Path) -> None:
        terms_meta = []
        blob = bytearray()
        for term in sorted(self._postings):
            start = len(blob)
            prev = 0
            for ordinal, tf in self._postings[term]:
                _write_varint(blob, ordinal - prev)
                _write_varint(blob, tf)
                prev = ordinal
            terms_meta.append([term, len(self._postings[term]), start, len(blob) - start])

        header = json.dumps(
            {
                "format_version": 1,
                "fields": self.fields,
                "doc_count": self.doc_count,
                "total_len": self._total_len,
                "docs": [[p, self._doc_lens[i]] for i, p in enumerate(self._pmids)],
                "terms": terms_meta,
            },
            ensure_ascii=False, separators=(",", ":"),
        ).encode("utf-8")

        with Path(path).open("wb") as f:
            f.write(MAGIC)
            f.write(len(header).to_bytes(4, "little"))
            f.write(header)
            f.write(bytes(blob))

    @classmethod
    def load(cls, path: str | Path, store: CorpusStore | None = None,
             k1: float = 1.2, b: float = 0.75) -> "Index":
        data = Path(path).read_bytes()
        if data[:6] != MAGIC:
            raise IndexError_(f"not an index file (bad magic): {path}")
        header_len = int.from_bytes(data[6:10], "little")
        header = json.loads(data[10:10 + header_len].decode("utf-8"))
        if header.get("format_version") != 1:
            raise IndexError_(f"unsupported index version: {header.get('format_version')}")

        index = cls(k1=k1, b=b, fields=header["fields"])
        index.store = store
        index._pmids = [p for p, _ in header["docs"]]
        index._ordinals = {p: i for i, p in enumerate(index._pmids)}
        index._doc_lens = [length for _, length in header["docs"]]
        index._total_len = header["total_len"]

        blob = memoryview(data)[10 + header_len:]
        for term, df, offset, nbytes in header["terms"]:
            plist = []
            pos = offset
            prev = 0
            end = offset + nbytes
            for _ in range(df):
                delta, pos = _read_varint(blob, pos)
                tf, pos = _read_varint(blob, pos)
                prev += delta
                plist.append((prev, tf))
            if pos != end:
                raise IndexError_(f"postings length mismatch for term {term!r}")
            index._postings[term] = plist
        return index


def _tf_for(plist: list[tuple[int, int]], ordinal: int) -> int:
    # postings are small at desk scale; linear scan keeps this simple
    for o, tf in plist:
        if o == ordinal:
            return tf
        if o > ordinal:
            break
    return 0


def _write_varint(out: bytearray, value: int) -> None:
    if value < 0:
        raise ValueError("varints are unsigned")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _read_varint(buf, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
