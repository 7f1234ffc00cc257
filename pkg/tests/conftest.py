"""Shared test fixtures and the in-memory store used by retrieval tests."""

from __future__ import annotations

import json

import pytest

from healthqa.corpus import Document, CorpusStore, ingest


class MemoryStore:
    """Duck-typed stand-in for CorpusStore backed by a dict."""

    def __init__(self, docs: dict[str, Document]):
        self._docs = dict(docs)

    def pmids(self) -> list[str]:
        return sorted(self._docs)

    def get(self, pmid: str) -> Document:
        return self._docs[pmid]

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, pmid: str) -> bool:
        return pmid in self._docs


def make_documents(texts: dict[str, str]) -> dict[str, Document]:
    """Documents with empty titles so the indexed text equals the abstract."""
    return {
        pmid: Document(pmid=pmid, title="", abstract=abstract, language="en",
                       year=2020)
        for pmid, abstract in texts.items()
    }


@pytest.fixture
def memory_store():
    def _make(texts: dict[str, str], years: dict[str, int | None] | None = None,
              citations: dict[str, int | None] | None = None) -> MemoryStore:
        docs = {}
        for pmid, abstract in texts.items():
            docs[pmid] = Document(
                pmid=pmid, title="", abstract=abstract, language="en",
                year=(years or {}).get(pmid, 2020),
                citation_count=(citations or {}).get(pmid))
        return MemoryStore(docs)
    return _make


@pytest.fixture
def ingested_store(tmp_path):
    """Write records as JSONL, ingest them, and open the resulting store."""

    def _make(records: list[dict], name: str = "corpus") -> CorpusStore:
        source = tmp_path / f"{name}_source.jsonl"
        source.write_text("\n".join(json.dumps(r) for r in records) + "\n",
                          encoding="utf-8")
        store_path = tmp_path / f"{name}.jsonl"
        ingest([source], store_path)
        return CorpusStore(store_path)

    return _make


def jsonl_record(pmid: str, abstract: str, title: str = "", language: str = "en",
                 year: int | None = 2020) -> dict:
    return {"pmid": pmid, "title": title, "abstract": abstract,
            "language": language, "year": year}
