"""Entailment labeling and majority-vote verdict aggregation.

Per evidence item the reader produces a probability triple
(refuted, supported, nei); the per-item label is the argmax with the
conservative tie order NEI > Refuted > Supported. Verdicts aggregate by
majority vote: the ternary scheme takes the plurality over all three
labels, the binary scheme discards NEI votes and breaks ties toward
Refuted, so it can never answer NEI.

The built-in FallbackEntailmentScorer is a deterministic token-overlap
heuristic used for tests and offline runs; it makes no claim to NLI
quality. Real NLI arrives via the remote scorer (see remote.py).
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from enum import IntEnum
from typing import TYPE_CHECKING, Callable, Mapping, Protocol, Sequence

from .corpus import CorpusStore
from .filters import FilterSpec, apply as apply_filter
from .index import Index, ScoredDocument, tokenize
from .sentences import EmbeddingProvider, TfidfEmbeddingProvider, pool_sentences, select_top_j

if TYPE_CHECKING:
    from .evaluation import QAInstance


class Label(IntEnum):
    REFUTED = 0
    SUPPORTED = 1
    NOT_ENOUGH_INFO = 2


LABEL_TO_STR = {Label.REFUTED: "refuted", Label.SUPPORTED: "supported",
                Label.NOT_ENOUGH_INFO: "nei"}
STR_TO_LABEL = {v: k for k, v in LABEL_TO_STR.items()}

# Tie preference, most conservative first.
_TIE_ORDER = (Label.NOT_ENOUGH_INFO, Label.REFUTED, Label.SUPPORTED)


@dataclass(frozen=True)
class EntailmentScore:
    p_refuted: float
    p_supported: float
    p_nei: float

    def __post_init__(self):
        total = self.p_refuted + self.p_supported + self.p_nei
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {total}, not 1")
        if min(self.p_refuted, self.p_supported, self.p_nei) < -1e-12:
            raise ValueError("probabilities must be non-negative")

    @classmethod
    def normalized(cls, refuted: float, supported: float, nei: float) -> "EntailmentScore":
        total = refuted + supported + nei
        if total <= 0:
            return cls(0.0, 0.0, 1.0)
        return cls(refuted / total, supported / total, nei / total)

    def as_dict(self) -> dict:
        return {"refuted": self.p_refuted, "supported": self.p_supported,
                "nei": self.p_nei}


def label_of(score: EntailmentScore, min_confidence: float = 0.0) -> Label:
    """Argmax label; exact ties resolve NEI > Refuted > Supported.

    With min_confidence > 0, evidence whose best probability falls below
    it votes NEI.
    """
    probs = {Label.REFUTED: score.p_refuted, Label.SUPPORTED: score.p_supported,
             Label.NOT_ENOUGH_INFO: score.p_nei}
    best = max(probs.values())
    if min_confidence > 0.0 and best < min_confidence:
        return Label.NOT_ENOUGH_INFO
    for label in _TIE_ORDER:
        if probs[label] == best:
            return label
    raise AssertionError("unreachable")


def majority_vote(labels: Sequence[Label], scheme: str) -> Label:
    """Aggregate per-evidence labels into a verdict.

    binary: NEI votes are discarded; a supported/refuted tie and an empty
    effective vote set both yield Refuted. ternary: plurality over all
    three labels, ties and the empty case yield the conservative end of
    NEI > Refuted > Supported.
    """
    if scheme == "binary":
        counts = Counter(l for l in labels if l != Label.NOT_ENOUGH_INFO)
        if counts[Label.SUPPORTED] > counts[Label.REFUTED]:
            return Label.SUPPORTED
        return Label.REFUTED
    if scheme == "ternary":
        if not labels:
            return Label.NOT_ENOUGH_INFO
        counts = Counter(labels)
        best = max(counts.values())
        for label in _TIE_ORDER:
            if counts[label] == best:
                return label
        raise AssertionError("unreachable")
    raise ValueError(f"unknown vote scheme: {scheme!r}")


def vote_note(labels: Sequence[Label], scheme: str) -> str | None:
    """Annotate verdicts that came from a default or tie-break."""
    if not labels:
        return "no_evidence"
    counts = Counter(labels)
    if scheme == "binary":
        effective = counts[Label.SUPPORTED] + counts[Label.REFUTED]
        if effective == 0:
            return "binary_all_nei"
        if counts[Label.SUPPORTED] == counts[Label.REFUTED]:
            return "binary_tie"
        return None
    best = max(counts.values())
    if sum(1 for c in counts.values() if c == best) > 1:
        return "ternary_tie"
    return None


class EntailmentScorer(Protocol):
    def score(self, premise: str, hypothesis: str) -> EntailmentScore:
        """Entailment of hypothesis by premise; deterministic per instance."""
        ...


# Function words excluded from overlap computation (not from negation cues).
FALLBACK_STOPWORDS = frozenset("""
a an the and or but if then than so as that this these those it its is are was
were be been being do does did done can could may might must shall should will
would have has had having of in on at to for with from by about into over
under between through during within i me my we our you your he him his she her
they them their there here what which who whom when where why how all any both
each few more most other some such only own same very just also not no nor
""".split())

NEGATION_CUES = frozenset({"no", "not", "lack", "without", "ineffective"})
NEGATION_WINDOW = 3


def content_tokens(text: str) -> set[str]:
    return {t for t in tokenize(text) if t not in FALLBACK_STOPWORDS}


class FallbackEntailmentScorer:
    """Deterministic token-overlap heuristic (a test oracle, not real NLI).

    Jaccard overlap o between content tokens of question and evidence sets
    the evidence mass; the mass goes to Refuted when a negation cue sits
    within NEGATION_WINDOW tokens of a question keyword in the evidence,
    otherwise to Supported; the remainder is NEI.
    """

    def score(self, premise: str, hypothesis: str) -> EntailmentScore:
        question = content_tokens(hypothesis)
        evidence_tokens = tokenize(premise)
        evidence = {t for t in evidence_tokens if t not in FALLBACK_STOPWORDS}
        union = question | evidence
        overlap = len(question & evidence) / len(union) if union else 0.0

        if self._negated_keyword(evidence_tokens, question):
            return EntailmentScore.normalized(overlap, 0.0, 1.0 - overlap)
        return EntailmentScore.normalized(0.0, overlap, 1.0 - overlap)

    @staticmethod
    def _negated_keyword(evidence_tokens: list[str], question: set[str]) -> bool:
        cue_positions = [i for i, t in enumerate(evidence_tokens) if t in NEGATION_CUES]
        if not cue_positions:
            return False
        keyword_positions = [i for i, t in enumerate(evidence_tokens) if t in question]
        return any(abs(c - k) <= NEGATION_WINDOW
                   for c in cue_positions for k in keyword_positions)


@dataclass(frozen=True)
class RetrievalConfig:
    """Everything that determines how evidence is gathered and aggregated."""

    mode: str = "document"          # document | sentence
    top_k: int = 5
    top_j: int = 5
    pool_size: int = 20
    filter: FilterSpec = FilterSpec()
    vote_scheme: str = "binary"     # binary | ternary
    filter_placement: str = "post"  # post (filter the top-k) | pre (filter the pool)

    def __post_init__(self):
        if self.mode not in ("document", "sentence"):
            raise ValueError(f"unknown mode: {self.mode!r}")
        if self.vote_scheme not in ("binary", "ternary"):
            raise ValueError(f"unknown vote_scheme: {self.vote_scheme!r}")
        if self.filter_placement not in ("post", "pre"):
            raise ValueError(f"unknown filter_placement: {self.filter_placement!r}")
        if self.top_k < 1 or self.top_j < 1 or self.pool_size < 1:
            raise ValueError("top_k, top_j and pool_size must be >= 1")

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "top_k": self.top_k,
            "top_j": self.top_j,
            "pool_size": self.pool_size,
            "min_year": self.filter.min_year,
            "min_citations": self.filter.min_citations,
            "vote_scheme": self.vote_scheme,
            "filter_placement": self.filter_placement,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class EvidenceItem:
    text: str
    pmid: str
    score: EntailmentScore
    label: Label

    def as_dict(self) -> dict:
        return {"text": self.text, "pmid": self.pmid,
                "scores": self.score.as_dict(), "label": LABEL_TO_STR[self.label]}


@dataclass
class AnswerRecord:
    """Per-question pipeline output; enough to reproduce the verdict."""

    question_id: str
    verdict: Label
    vote_counts: dict[str, int]
    evidence: list[EvidenceItem]
    config_fingerprint: str
    vote_note: str | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "question_id": self.question_id,
                "verdict": LABEL_TO_STR[self.verdict],
                "vote_counts": self.vote_counts,
                "vote_note": self.vote_note,
                "config_fingerprint": self.config_fingerprint,
                "evidence": [e.as_dict() for e in self.evidence],
            },
            ensure_ascii=False,
        )


DEFAULT_EVIDENCE_TOKEN_LIMIT = 480  # keeps full documents inside NLI context windows

Retriever = Callable[[str, int, "object"], list[ScoredDocument]]


def _truncate(text: str, limit: int) -> str:
    words = text.split()
    if len(words) <= limit:
        return text
    return " ".join(words[:limit])


def answer(question: "QAInstance", config: RetrievalConfig, index: Index,
           store: CorpusStore, provider: EmbeddingProvider | None,
           scorer: EntailmentScorer, *,
           citations: Mapping[str, int | None] | None = None,
           min_confidence: float = 0.0,
           evidence_token_limit: int = DEFAULT_EVIDENCE_TOKEN_LIMIT,
           retrieve: Retriever | None = None,
           ) -> AnswerRecord:
    """Run retrieve -> (select) -> score -> vote for one question.

    Document mode scores each retrieved title+abstract (truncated to
    evidence_token_limit words); sentence mode pools pool_size documents,
    selects top_j sentences, and scores those. With provider=None in
    sentence mode, a per-question TF-IDF provider is fit on the pooled
    sentences plus the question. Scorer failures propagate, tagged with
    the question id.
    """
    if retrieve is None:
        retrieve = lambda text, depth, pre: index.search(text, depth, candidate_filter=pre)

    prefilter = None
    if config.filter.active and config.filter_placement == "pre":
        spec = config.filter
        cits = citations or {}

        def prefilter(doc):
            if spec.min_year is not None and (doc.year is None or doc.year < spec.min_year):
                return False
            if spec.min_citations is not None:
                count = cits.get(doc.pmid, doc.citation_count)
                if count is None or count < spec.min_citations:
                    return False
            return True

    depth = config.top_k if config.mode == "document" else config.pool_size
    candidates = retrieve(question.question, depth, prefilter)
    if config.filter.active and config.filter_placement == "post":
        candidates = apply_filter(candidates, config.filter, store, citations)

    try:
        if config.mode == "document":
            items = []
            for cand in candidates:
                doc = store.get(cand.pmid)
                text = _truncate(doc.title + " " + doc.abstract, evidence_token_limit)
                score = scorer.score(text, question.question)
                items.append(EvidenceItem(text=text, pmid=cand.pmid, score=score,
                                          label=label_of(score, min_confidence)))
        else:
            if provider is None:
                pool = pool_sentences(candidates, store)
                provider = TfidfEmbeddingProvider([s.text for s in pool] + [question.question]) \
                    if pool else None
            selected = (select_top_j(question.question, candidates, config.top_j,
                                     provider, store) if provider else [])
            items = []
            for sent in selected:
                score = scorer.score(sent.text, question.question)
                items.append(EvidenceItem(text=sent.text, pmid=sent.source_pmid,
                                          score=score,
                                          label=label_of(score, min_confidence)))
    except Exception as e:
        raise RuntimeError(f"scoring failed for question {question.id!r}: {e}") from e

    labels = [item.label for item in items]
    verdict = majority_vote(labels, config.vote_scheme)
    counts = Counter(labels)
    return AnswerRecord(
        question_id=question.id,
        verdict=verdict,
        vote_counts={LABEL_TO_STR[l]: counts.get(l, 0) for l in Label},
        evidence=items,
        config_fingerprint=config.fingerprint(),
        vote_note=vote_note(labels, config.vote_scheme),
    )
