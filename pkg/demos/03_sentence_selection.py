#!/usr/bin/env python3
"""Split abstracts into sentences and select the top-j most similar ones.

The splitter is rule-based (terminator + capital/digit, abbreviation
blocklist, no splits inside parentheses). Selection pools all sentences
from the retrieved documents, embeds them together with the question,
and ranks by cosine similarity; several sentences may come from the
same abstract.

Run: python demos/03_sentence_selection.py
"""

from healthqa.corpus import Document
from healthqa.index import ScoredDocument
from healthqa.sentences import (TfidfEmbeddingProvider, select_top_j,
                                split_sentences)

# --- splitting ---------------------------------------------------------------
abstract = ("BACKGROUND: Ginkgo biloba is widely used. METHODS: We reviewed "
            "systematic reviews (n=3. All randomized). RESULTS: Approx. 40% "
            "reported no change. CONCLUSIONS: Ginkgo probably does not reduce "
            "tinnitus severity.")
for i, sentence in enumerate(split_sentences(abstract)):
    print(f"sentence[{i}]: {sentence}")

# --- a small retrieved pool ---------------------------------------------------
class Pool:
    """Minimal in-memory document resolver."""
    def __init__(self, docs): self._docs = docs
    def get(self, pmid): return self._docs[pmid]

docs = {
    "10": Document("10", "", "Ginkgo probably does not reduce tinnitus severity. "
                            "Quality of evidence was moderate.", "en", 2018),
    "11": Document("11", "", "Ginkgo extract improves memory complaints. "
                            "Tinnitus was a secondary outcome.", "en", 1998),
}
retrieved = [ScoredDocument("10", 7.1, 1), ScoredDocument("11", 5.3, 2)]
question = "does ginkgo reduce tinnitus severity"

# The built-in provider fits log-tf*idf vectors on the pooled sentences plus
# the question; the remote neural provider is a drop-in replacement.
pool_sentences = [s for sd in retrieved
                  for s in split_sentences(docs[sd.pmid].abstract)]
provider = TfidfEmbeddingProvider(pool_sentences + [question])

print(f"\ntop sentences for: {question!r}")
for ev in select_top_j(question, retrieved, 3, provider, Pool(docs)):
    print(f"  sim={ev.similarity:.3f} pmid={ev.source_pmid} "
          f"sent#{ev.sent_index}: {ev.text}")
