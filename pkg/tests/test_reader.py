"""Labels, voting, the fallback scorer, and the answer() chain."""

import json
import random

import pytest
from hypothesis import given, strategies as st

from healthqa.evaluation import QAInstance
from healthqa.filters import FilterSpec
from healthqa.index import Index
from healthqa.reader import (
    AnswerRecord, EntailmentScore, FallbackEntailmentScorer, Label,
    RetrievalConfig, answer, label_of, majority_vote, vote_note,
)
from tests.test_index import oracle_bm25

REF, SUP, NEI = Label.REFUTED, Label.SUPPORTED, Label.NOT_ENOUGH_INFO


class TestEntailmentScore:
    def test_must_sum_to_one(self):
        with pytest.raises(ValueError):
            EntailmentScore(0.5, 0.5, 0.5)

    def test_must_be_non_negative(self):
        with pytest.raises(ValueError):
            EntailmentScore(-0.2, 1.0, 0.2)

    def test_normalized_handles_zero_mass(self):
        assert EntailmentScore.normalized(0, 0, 0) == EntailmentScore(0.0, 0.0, 1.0)


class TestLabelOf:
    def test_argmax(self):
        assert label_of(EntailmentScore(0.1, 0.8, 0.1)) is SUP

    def test_three_way_tie_prefers_nei(self):
        assert label_of(EntailmentScore(1 / 3, 1 / 3, 1 / 3)) is NEI

    def test_two_way_tie_prefers_refuted_over_supported(self):
        assert label_of(EntailmentScore(0.5, 0.5, 0.0)) is REF

    def test_min_confidence_gates_to_nei(self):
        score = EntailmentScore(0.1, 0.6, 0.3)
        assert label_of(score) is SUP
        assert label_of(score, min_confidence=0.7) is NEI

    @given(st.floats(0.01, 0.98), st.floats(0.01, 0.98),
           st.sampled_from([0.5, 2.0, 4.0, 8.0]))
    def test_scale_invariance(self, a, b, factor):
        """Rescaling all probabilities and renormalizing keeps the argmax."""
        if a + b >= 0.995:
            return
        triple = (a, b, 1.0 - a - b)
        base = label_of(EntailmentScore.normalized(*triple))
        scaled = label_of(EntailmentScore.normalized(*(factor * p for p in triple)))
        assert base is scaled


class TestMajorityVote:
    def test_binary_tie_predicts_refuted(self):
        assert majority_vote([SUP, REF], "binary") is REF

    def test_binary_discards_nei(self):
        assert majority_vote([NEI, NEI, SUP], "binary") is SUP

    def test_ternary_plurality(self):
        assert majority_vote([NEI, NEI, SUP], "ternary") is NEI

    def test_empty_defaults(self):
        assert majority_vote([], "binary") is REF
        assert majority_vote([], "ternary") is NEI

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValueError):
            majority_vote([SUP], "plurality")

    labels_lists = st.lists(st.sampled_from([REF, SUP, NEI]), max_size=30)

    @given(labels_lists, st.randoms(use_true_random=False),
           st.sampled_from(["binary", "ternary"]))
    def test_permutation_invariance(self, labels, rng, scheme):
        shuffled = list(labels)
        rng.shuffle(shuffled)
        assert majority_vote(shuffled, scheme) is majority_vote(labels, scheme)

    @given(st.sampled_from([REF, SUP]), st.integers(1, 20),
           st.sampled_from(["binary", "ternary"]))
    def test_unanimity(self, label, n, scheme):
        assert majority_vote([label] * n, scheme) is label

    @given(labels_lists)
    def test_binary_never_returns_nei(self, labels):
        assert majority_vote(labels, "binary") is not NEI

    def test_vote_note_flags_defaults(self):
        assert vote_note([], "binary") == "no_evidence"
        assert vote_note([NEI, NEI], "binary") == "binary_all_nei"
        assert vote_note([SUP, REF], "binary") == "binary_tie"
        assert vote_note([SUP, SUP, REF], "binary") is None
        assert vote_note([SUP, REF, NEI], "ternary") == "ternary_tie"


class TestFallbackScorer:
    scorer = FallbackEntailmentScorer()

    def test_overlap_mass_goes_to_supported(self):
        score = self.scorer.score("aspirin does stop headache",
                                  "does aspirin stop headache")
        assert score.p_supported > 0.5
        assert score.p_refuted == 0.0

    def test_negation_near_keyword_goes_to_refuted(self):
        score = self.scorer.score("aspirin does not stop headache",
                                  "does aspirin stop headache")
        assert score.p_refuted > 0.5
        assert score.p_supported == 0.0

    def test_far_negation_does_not_flip(self):
        score = self.scorer.score(
            "aspirin reduced headache quickly and cleanly with benefits and "
            "fortunately no side effects at all were reported here",
            "aspirin reduced headache")
        # cue "no" sits more than three tokens from every question keyword
        assert score.p_refuted == 0.0

    def test_disjoint_texts_are_nei(self):
        score = self.scorer.score("unrelated botany field survey",
                                  "aspirin stops headaches")
        assert score.p_nei == 1.0

    def test_deterministic(self):
        a = self.scorer.score("aspirin helps pain", "aspirin pain")
        b = self.scorer.score("aspirin helps pain", "aspirin pain")
        assert a == b


class TestRetrievalConfig:
    def test_fingerprint_is_canonical_sha256(self):
        import hashlib
        config = RetrievalConfig(top_k=3)
        expected = hashlib.sha256(config.canonical_json().encode()).hexdigest()
        assert config.fingerprint() == expected
        assert json.loads(config.canonical_json())["top_k"] == 3

    def test_fingerprint_changes_with_any_field(self):
        base = RetrievalConfig()
        assert base.fingerprint() != RetrievalConfig(top_k=9).fingerprint()
        assert base.fingerprint() != \
            RetrievalConfig(filter=FilterSpec(min_year=2020)).fingerprint()
        assert base.fingerprint() != \
            RetrievalConfig(filter_placement="pre").fingerprint()

    def test_validation(self):
        with pytest.raises(ValueError):
            RetrievalConfig(mode="paragraph")
        with pytest.raises(ValueError):
            RetrievalConfig(top_k=0)
        with pytest.raises(ValueError):
            RetrievalConfig(vote_scheme="unanimous")


def _qa(text, qid="q1"):
    return QAInstance(id=qid, question=text)


class TestAnswer:
    def test_single_supporting_doc(self, memory_store):
        store = memory_store({"1": "aspirin does stop headache"})
        index = Index.build(store)
        record = answer(_qa("does aspirin stop headache"),
                        RetrievalConfig(mode="document", top_k=1),
                        index, store, None, FallbackEntailmentScorer())
        assert record.verdict is SUP
        assert record.vote_counts == {"refuted": 0, "supported": 1, "nei": 0}
        assert len(record.evidence) == 1
        assert record.evidence[0].pmid == "1"

    def test_majority_over_three_docs(self, memory_store):
        store = memory_store({
            "1": "zimelidine does clear migraine",
            "2": "zimelidine does clear migraine",
            "3": "zimelidine does not clear migraine",
        })
        index = Index.build(store)
        record = answer(_qa("does zimelidine clear migraine"),
                        RetrievalConfig(mode="document", top_k=3),
                        index, store, None, FallbackEntailmentScorer())
        assert [e.label for e in record.evidence].count(SUP) == 2
        assert [e.label for e in record.evidence].count(REF) == 1
        assert record.verdict is SUP

    def test_empty_retrieval_defaults(self, memory_store):
        store = memory_store({"1": "completely unrelated text"})
        index = Index.build(store)
        for scheme, expected in (("binary", REF), ("ternary", NEI)):
            record = answer(_qa("xylitol bruxism"),
                            RetrievalConfig(top_k=1, vote_scheme=scheme),
                            index, store, None, FallbackEntailmentScorer())
            assert record.verdict is expected
            assert record.evidence == []
            assert record.vote_note == "no_evidence"

    # The three-document fixture: BM25 puts the diluted survey first, the two
    # short echoes after it; labels come out (NEI, Supported, Supported).
    TEXTS = {
        "1": "aspirin headache aspirin headache aspirin headache cohort registry analysis",
        "2": "aspirin headache relief",
        "3": "aspirin headache help",
    }

    def test_topk_changes_ternary_verdict(self, memory_store):
        """Top-1 answers NEI; widening to top-3 flips the verdict to Supported."""
        store = memory_store(self.TEXTS)
        index = Index.build(store)
        question = "aspirin headache"

        # brute-force confirmation of the retrieval order this test assumes
        assert [p for p, _ in oracle_bm25(
            {p: " " + t for p, t in self.TEXTS.items()}, question, 3)] == ["1", "2", "3"]
        # and of the per-document votes
        scorer = FallbackEntailmentScorer()
        votes = [
            max((("nei", s.p_nei), ("refuted", s.p_refuted), ("supported", s.p_supported)),
                key=lambda kv: kv[1])[0]
            for s in (scorer.score(" " + self.TEXTS[p], question) for p in ("1", "2", "3"))
        ]
        assert votes == ["nei", "supported", "supported"]

        narrow = answer(_qa(question), RetrievalConfig(top_k=1, vote_scheme="ternary"),
                        index, store, None, scorer)
        wide = answer(_qa(question), RetrievalConfig(top_k=3, vote_scheme="ternary"),
                      index, store, None, scorer)
        assert narrow.verdict is NEI
        assert wide.verdict is SUP

    def test_sentence_mode_with_fallback_provider(self, memory_store):
        store = memory_store({
            "1": "Aspirin does stop headache. The cohort was large.",
            "2": "Unrelated agricultural notes. Aspirin does stop headache pain.",
        })
        index = Index.build(store)
        record = answer(_qa("does aspirin stop headache"),
                        RetrievalConfig(mode="sentence", top_j=2, pool_size=2,
                                        vote_scheme="binary"),
                        index, store, None, FallbackEntailmentScorer())
        assert record.verdict is SUP
        assert len(record.evidence) == 2
        assert {e.pmid for e in record.evidence} == {"1", "2"}

    def test_post_filter_drops_old_evidence(self, memory_store):
        store = memory_store(
            {"1": "statin does lower cholesterol",
             "2": "statin does not lower cholesterol"},
            years={"1": 2021, "2": 1999})
        index = Index.build(store)
        config = RetrievalConfig(top_k=2, filter=FilterSpec(min_year=2010),
                                 filter_placement="post")
        record = answer(_qa("does statin lower cholesterol"), config,
                        index, store, None, FallbackEntailmentScorer())
        assert [e.pmid for e in record.evidence] == ["1"]
        assert record.verdict is SUP

    def test_pre_filter_refills_from_pool(self, memory_store):
        """Pushdown keeps k survivors, post-filter of top-k keeps fewer."""
        store = memory_store(
            {"1": "drug works well truly",
             "2": "drug works well really",
             "3": "drug works fine medically"},
            years={"1": 1990, "2": 2021, "3": 2022})
        index = Index.build(store)
        spec = FilterSpec(min_year=2010)
        pre = answer(_qa("drug works"), RetrievalConfig(
            top_k=2, filter=spec, filter_placement="pre"),
            index, store, None, FallbackEntailmentScorer())
        assert len(pre.evidence) == 2  # filtered pool still yields two docs
        post = answer(_qa("drug works"), RetrievalConfig(
            top_k=2, filter=spec, filter_placement="post"),
            index, store, None, FallbackEntailmentScorer())
        assert {e.pmid for e in post.evidence} <= {"1", "2"}

    def test_evidence_truncated_to_token_limit(self, memory_store):
        long_abstract = "aspirin " + " ".join(f"w{i}" for i in range(600))
        store = memory_store({"1": long_abstract})
        index = Index.build(store)
        record = answer(_qa("aspirin"), RetrievalConfig(top_k=1),
                        index, store, None, FallbackEntailmentScorer())
        assert len(record.evidence[0].text.split()) == 480

    def test_scorer_failure_carries_question_id(self, memory_store):
        class Boom:
            def score(self, premise, hypothesis):
                raise ConnectionError("nli backend down")

        store = memory_store({"1": "aspirin text"})
        index = Index.build(store)
        with pytest.raises(RuntimeError, match="q-17"):
            answer(_qa("aspirin", qid="q-17"), RetrievalConfig(top_k=1),
                   index, store, None, Boom())

    def test_byte_identical_reproducibility(self, memory_store):
        store = memory_store(self.TEXTS)
        index = Index.build(store)
        config = RetrievalConfig(top_k=3, vote_scheme="ternary")
        a = answer(_qa("aspirin headache"), config, index, store, None,
                   FallbackEntailmentScorer())
        b = answer(_qa("aspirin headache"), config, index, store, None,
                   FallbackEntailmentScorer())
        assert a.to_json() == b.to_json()

    def test_verdict_consistent_with_vote_counts(self, memory_store):
        rng = random.Random(2024)
        vocab = ["alpha", "beta", "gamma", "delta", "relief", "trial"]
        texts = {str(i): " ".join(rng.choices(vocab + ["not"], k=rng.randint(3, 12)))
                 for i in range(1, 30)}
        store = memory_store(texts)
        index = Index.build(store)
        for scheme in ("binary", "ternary"):
            for k in (1, 3, 10):
                record = answer(_qa("alpha beta relief"),
                                RetrievalConfig(top_k=k, vote_scheme=scheme),
                                index, store, None, FallbackEntailmentScorer())
                labels = [e.label for e in record.evidence]
                assert record.verdict is majority_vote(labels, scheme)
