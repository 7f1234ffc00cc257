#!/usr/bin/env python3
"""Build the BM25 inverted index and rank documents for a question.

Shows term statistics, the Okapi score of individual documents, top-k
search with its deterministic tie-break, and the binary index file
round-trip.

Run: python demos/02_bm25_search.py
"""

import json
import math
import tempfile
from pathlib import Path

from healthqa.corpus import CorpusStore, ingest
from healthqa.index import Index

workdir = Path(tempfile.mkdtemp(prefix="healthqa_demo_"))

abstracts = {
    "1": "aspirin relieves headache pain quickly",
    "2": "placebo effect in trials",
    "3": "aspirin dosage study",
    "4": "headache prevalence in adults with chronic pain",
}
source = workdir / "in.jsonl"
source.write_text("\n".join(
    json.dumps({"pmid": p, "title": "", "abstract": a, "language": "en",
                "year": 2020})
    for p, a in abstracts.items()) + "\n")
ingest([source], workdir / "corpus.jsonl")
store = CorpusStore(workdir / "corpus.jsonl")

index = Index.build(store, k1=1.2, b=0.75)
stats = index.stats()
print(f"indexed {stats.doc_count} docs, avg length {stats.avg_doc_len:.2f} tokens")
print("document frequency of 'aspirin':", stats.df["aspirin"])
print("IDF('aspirin') = ln(1 + (N - df + 0.5)/(df + 0.5)) =",
      round(index.idf("aspirin"), 4), "= ln", round(math.exp(index.idf("aspirin")), 3))

# --- scoring a single document ---------------------------------------------
query = ["aspirin", "headache"]
for pmid in abstracts:
    print(f"score({query}, doc {pmid}) = {index.score(query, pmid):.4f}")

# --- ranked search; scores strictly non-increasing, zero scores dropped ----
print("\ntop-3 for 'aspirin headache':")
for hit in index.search("aspirin headache", 3):
    print(f"  #{hit.rank} pmid={hit.pmid} score={hit.score:.4f} "
          f"| {store.get(hit.pmid).abstract}")

# --- metadata predicates are pushed into search when asked ------------------
recent_only = index.search("aspirin headache", 3,
                           candidate_filter=lambda d: d.year and d.year >= 2020)
print("\nwith a year>=2020 pushdown filter:", [h.pmid for h in recent_only])

# --- the index persists as a compact binary segment -------------------------
index_path = workdir / "index.bin"
index.save(index_path)
loaded = Index.load(index_path, store=store)
assert loaded.search("aspirin headache", 3) == index.search("aspirin headache", 3)
print(f"\nsaved {index_path.stat().st_size} bytes,",
      "magic =", index_path.read_bytes()[:6])
