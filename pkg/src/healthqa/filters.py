"""Evidence-quality constraints and the Semantic Scholar citation client.

apply() is a pure subsequence filter over retrieval candidates: a document
survives only when every active constraint is met by *known* metadata, so
a missing year or citation count fails the corresponding active filter.

fetch_citations() resolves citation counts by PMID through the Semantic
Scholar graph API with a local JSONL cache; warm-cache runs perform zero
network calls. All network traffic is serialized through one rate-limited
loop.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Sequence

import httpx

from .corpus import CorpusStore
from .index import ScoredDocument

logger = logging.getLogger(__name__)

API_URL = "https://api.semanticscholar.org/graph/v1/paper/PMID:{pmid}"
MAX_ATTEMPTS = 5


@dataclass(frozen=True)
class FilterSpec:
    """Evidence constraints; None means the constraint is inactive."""

    min_year: int | None = None
    min_citations: int | None = None

    def __post_init__(self):
        if self.min_citations is not None and self.min_citations < 0:
            raise ValueError("min_citations must be non-negative")

    @property
    def active(self) -> bool:
        return self.min_year is not None or self.min_citations is not None

    def as_dict(self) -> dict:
        return {"min_year": self.min_year, "min_citations": self.min_citations}


@dataclass(frozen=True)
class CitationRecord:
    pmid: str
    citation_count: int | None  # None = Unknown
    fetched_at: str  # UTC ISO-8601

    def to_json(self) -> str:
        return json.dumps(
            {"pmid": self.pmid, "citation_count": self.citation_count,
             "fetched_at": self.fetched_at},
            ensure_ascii=False,
        )


def apply(candidates: Sequence[ScoredDocument], spec: FilterSpec,
          store: CorpusStore,
          citations: Mapping[str, int | None] | None = None,
          ) -> list[ScoredDocument]:
    """Keep the candidates meeting every active constraint, order preserved.

    Citation counts come from the citations mapping when given, else from
    the store document's citation_count annotation.
    """
    if not spec.active:
        return list(candidates)

    kept = []
    for cand in candidates:
        doc = store.get(cand.pmid)
        if spec.min_year is not None:
            if doc.year is None or doc.year < spec.min_year:
                continue
        if spec.min_citations is not None:
            if citations is not None and cand.pmid in citations:
                count = citations[cand.pmid]
            else:
                count = doc.citation_count
            if count is None or count < spec.min_citations:
                continue
        kept.append(cand)
    return kept


def read_citation_cache(cache_path: str | Path) -> dict[str, CitationRecord]:
    """Load the append-only cache; the last record per pmid wins."""
    records: dict[str, CitationRecord] = {}
    path = Path(cache_path)
    if not path.exists():
        return records
    with path.open("r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            raw = json.loads(line)
            records[raw["pmid"]] = CitationRecord(
                pmid=raw["pmid"],
                citation_count=raw.get("citation_count"),
                fetched_at=raw.get("fetched_at", ""),
            )
    return records


def fetch_citations(pmids: Sequence[str], cache_path: str | Path,
                    rate_limit: float = 1.0, *,
                    api_key: str | None = None,
                    client: httpx.Client | None = None,
                    sleep: Callable[[float], None] = time.sleep,
                    ) -> list[CitationRecord]:
    """Resolve a CitationRecord for every pmid, using and extending the cache.

    Network behavior: 404 -> Unknown; 429/5xx -> exponential backoff up to
    MAX_ATTEMPTS then Unknown; transport failure -> Unknown with a logged
    warning. Never raises for per-pmid failures.
    """
    if rate_limit <= 0:
        raise ValueError("rate_limit must be positive")
    cache = read_citation_cache(cache_path)
    interval = 1.0 / rate_limit
    headers = {"x-api-key": api_key} if api_key else {}

    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=30.0)

    results = []
    new_records = []
    first_call = True
    try:
        for pmid in pmids:
            if pmid in cache:
                results.append(cache[pmid])
                continue
            if not first_call:
                sleep(interval)
            first_call = False
            record = CitationRecord(
                pmid=pmid,
                citation_count=_fetch_one(client, pmid, headers, sleep),
                fetched_at=datetime.now(timezone.utc).isoformat(),
            )
            cache[pmid] = record
            results.append(record)
            new_records.append(record)
    finally:
        if own_client:
            client.close()

    if new_records:
        path = Path(cache_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as f:
            for record in new_records:
                f.write(record.to_json() + "\n")
    return results


def _fetch_one(client: httpx.Client, pmid: str, headers: dict,
               sleep: Callable[[float], None]) -> int | None:
    url = API_URL.format(pmid=pmid)
    backoff = 1.0
    for attempt in range(MAX_ATTEMPTS):
        try:
            response = client.get(url, params={"fields": "citationCount"},
                                  headers=headers)
        except httpx.HTTPError as e:
            logger.warning("citation fetch failed for %s: %s", pmid, e)
            return None
        if response.status_code == 200:
            count = response.json().get("citationCount")
            return int(count) if count is not None else None
        if response.status_code == 404:
            return None
        if response.status_code == 429 or response.status_code >= 500:
            if attempt < MAX_ATTEMPTS - 1:
                sleep(backoff)
                backoff *= 2
            continue
        logger.warning("citation fetch for %s: HTTP %d", pmid, response.status_code)
        return None
    logger.warning("citation fetch for %s: gave up after %d attempts", pmid, MAX_ATTEMPTS)
    return None
