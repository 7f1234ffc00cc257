#!/usr/bin/env python3
"""Answer questions end to end: retrieve, label each evidence item, vote.

Demonstrates document mode vs sentence mode, the year filter in both
placements, and what the AnswerRecord captures. Uses the deterministic
fallback scorer, so verdicts here come from token overlap and negation
cues, not a neural model.

Run: python demos/04_answer_pipeline.py
"""

import json
import tempfile
from pathlib import Path

from healthqa.config import AppConfig
from healthqa.corpus import CorpusStore, ingest
from healthqa.evaluation import QAInstance
from healthqa.filters import FilterSpec
from healthqa.index import Index
from healthqa.pipeline import QAPipeline
from healthqa.reader import LABEL_TO_STR, RetrievalConfig

workdir = Path(tempfile.mkdtemp(prefix="healthqa_demo_"))

records = [
    # recent evidence: ginkgo does NOT help tinnitus
    {"pmid": "1", "title": "Ginkgo tinnitus review",
     "abstract": "Ginkgo does not reduce tinnitus severity.",
     "language": "en", "year": 2018},
    # an old enthusiastic study contradicts it
    {"pmid": "2", "title": "Ginkgo tinnitus series",
     "abstract": "Ginkgo does reduce tinnitus severity in early series.",
     "language": "en", "year": 1998},
    {"pmid": "3", "title": "Unrelated",
     "abstract": "Crop rotation notes for barley.", "language": "en", "year": 2010},
]
source = workdir / "in.jsonl"
source.write_text("\n".join(json.dumps(r) for r in records) + "\n")
ingest([source], workdir / "corpus.jsonl")
store = CorpusStore(workdir / "corpus.jsonl")
pipeline = QAPipeline(store=store, index=Index.build(store))

question = QAInstance(id="demo", question="does ginkgo reduce tinnitus severity")

def show(tag, record):
    print(f"{tag:32s} verdict={LABEL_TO_STR[record.verdict]:9s} "
          f"votes={record.vote_counts} note={record.vote_note}")

# --- document mode: the ginkgo studies disagree; a binary tie predicts 0 ----
show("top_k=2, binary", pipeline.answer_instance(
    question, RetrievalConfig(mode="document", top_k=2, vote_scheme="binary")))

# --- a minimum-year filter drops the 1998 study; no tie-break needed now ----
show("top_k=2 + min_year=2010 (post)", pipeline.answer_instance(
    question, RetrievalConfig(mode="document", top_k=2,
                              filter=FilterSpec(min_year=2010))))

# --- the same constraint can be pushed into retrieval itself ----------------
show("top_k=2 + min_year=2010 (pre)", pipeline.answer_instance(
    question, RetrievalConfig(mode="document", top_k=2,
                              filter=FilterSpec(min_year=2010),
                              filter_placement="pre")))

# --- sentence mode pools abstracts and votes over the top-j sentences -------
show("sentence mode, top_j=3", pipeline.answer_instance(
    question, RetrievalConfig(mode="sentence", top_j=3, pool_size=20)))

# --- everything needed to reproduce a verdict is in the record ---------------
record = pipeline.answer_instance(
    question, RetrievalConfig(mode="document", top_k=2))
print("\nAnswerRecord as persisted to answers.jsonl:")
print(json.dumps(json.loads(record.to_json()), indent=2)[:600], "...")

# --- the same wiring is reachable from a TOML config -------------------------
config_path = workdir / "config.toml"
config_path.write_text(
    f'corpus.path = "{workdir / "corpus.jsonl"}"\n'
    f'index.path = "{workdir / "index.bin"}"\n'
    'retrieval.top_k = 2\n')
Index.build(store).save(workdir / "index.bin")
print("\nfrom_config verdict:", LABEL_TO_STR[
    QAPipeline.from_config(AppConfig.load(config_path))
    .answer_instance(question, AppConfig.load(config_path).retrieval_config())
    .verdict])
