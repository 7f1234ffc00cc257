#!/usr/bin/env python3
"""Fetch citation counts and filter evidence by metadata quality.

Citation counts come from the Semantic Scholar API keyed by PMID; this
demo substitutes a canned HTTP transport so it runs offline, which also
shows the cache mechanics: the second fetch performs zero network calls.

Run: python demos/06_citation_filtering.py
"""

import tempfile
from pathlib import Path

import httpx

from healthqa.corpus import Document
from healthqa.filters import FilterSpec, apply, fetch_citations, read_citation_cache
from healthqa.index import ScoredDocument

workdir = Path(tempfile.mkdtemp(prefix="healthqa_demo_"))
cache_path = workdir / "citations.jsonl"

# --- canned Semantic Scholar responses (swap for a real client online) ------
CANNED = {"501": 121, "502": 3}
calls = []

def fake_api(request: httpx.Request) -> httpx.Response:
    calls.append(str(request.url))
    pmid = str(request.url).split("PMID:")[1].split("?")[0]
    if pmid in CANNED:
        return httpx.Response(200, json={"citationCount": CANNED[pmid]})
    return httpx.Response(404, json={"error": "not found"})

client = httpx.Client(transport=httpx.MockTransport(fake_api),
                      base_url="https://api.semanticscholar.org")

records = fetch_citations(["501", "502", "503"], cache_path, rate_limit=1000.0,
                          client=client)
for r in records:
    print(f"pmid {r.pmid}: citations={r.citation_count}")   # 503 -> None (404)
print("network calls:", len(calls))

records = fetch_citations(["501", "502", "503"], cache_path, client=client)
print("network calls after warm-cache refetch:", len(calls), "(unchanged)")

# --- apply metadata constraints to a retrieved candidate list ----------------
docs = {
    "501": Document("501", "", "Stress raises dementia risk over decades.",
                    "en", 2012),
    "502": Document("502", "", "Mechanisms of stress-induced dementia unknown.",
                    "en", 2021),
    "503": Document("503", "", "An unrelated case report.", "en", None),
}

class Mem:
    def __init__(self, d): self._d = d
    def get(self, pmid): return self._d[pmid]

candidates = [ScoredDocument("501", 9.1, 1), ScoredDocument("502", 8.4, 2),
              ScoredDocument("503", 2.2, 3)]
counts = {pmid: rec.citation_count
          for pmid, rec in read_citation_cache(cache_path).items()}

for spec in (FilterSpec(), FilterSpec(min_citations=100),
             FilterSpec(min_year=2015), FilterSpec(min_year=2010, min_citations=5)):
    kept = apply(candidates, spec, Mem(docs), counts)
    print(f"{str(spec.as_dict()):48s} -> {[c.pmid for c in kept]}")
# unknown metadata (pmid 503: no year, no count) fails any active constraint
