#!/usr/bin/env python3
"""Ingest MEDLINE-style records into a corpus store.

Walks through the two accepted input formats (PubMed XML and JSONL),
the cleaning rules (English only, abstract present and not truncated),
and random access through the offset index.

Run: python demos/01_corpus_ingestion.py
"""

import json
import tempfile
from pathlib import Path

from healthqa.corpus import CorpusStore, ingest, parse_record

workdir = Path(tempfile.mkdtemp(prefix="healthqa_demo_"))

# --- input format A: a PubMed XML fragment ---------------------------------
xml_record = """<PubmedArticle>
  <MedlineCitation>
    <PMID Version="1">31452104</PMID>
    <Article>
      <ArticleTitle>Aspirin for episodic tension-type headache.</ArticleTitle>
      <Abstract>
        <AbstractText Label="BACKGROUND">Tension-type headache is common.</AbstractText>
        <AbstractText Label="CONCLUSIONS">Aspirin 1000 mg provides relief.</AbstractText>
      </Abstract>
      <Language>eng</Language>
      <Journal><JournalIssue><PubDate><Year>2019</Year></PubDate></JournalIssue></Journal>
    </Article>
  </MedlineCitation>
</PubmedArticle>"""

doc = parse_record(xml_record)
print("parsed XML record:")
print("  pmid     :", doc.pmid)
print("  title    :", doc.title)
print("  abstract :", doc.abstract)        # sections joined, labels kept as text
print("  language :", doc.language)        # "eng" normalized to "en"
print("  year     :", doc.year)

# --- input format B: JSONL, plus records the cleaning rules reject ---------
records = [
    {"pmid": "100", "title": "Exercise and longevity",
     "abstract": "Intense physical activity is associated with longevity.",
     "language": "en", "year": 2019},
    {"pmid": "101", "title": "Ginkgo und Tinnitus",
     "abstract": "Eine Studie über Ginkgo.", "language": "de", "year": 1998},
    {"pmid": "102", "title": "No abstract here",
     "abstract": "", "language": "en", "year": 2001},
    {"pmid": "103", "title": "Cut off",
     "abstract": "The study shows (ABSTRACT TRUNCATED AT 250 WORDS)",
     "language": "en", "year": 1995},
]
source = workdir / "records.jsonl"
source.write_text("\n".join(json.dumps(r) for r in records) + "\n")
xml_source = workdir / "records.xml"
xml_source.write_text(xml_record)

stats = ingest([xml_source, source], workdir / "corpus.jsonl")
print("\ningestion stats (only the clean English abstracts survive):")
for key, value in stats.as_dict().items():
    print(f"  {key:28s} {value}")

# --- keyed access through the offset index ---------------------------------
store = CorpusStore(workdir / "corpus.jsonl")
print("\nstored pmids:", store.pmids())
print("get('100') ->", store.get("100").title)
print("\nstore files:", sorted(p.name for p in workdir.iterdir()))
