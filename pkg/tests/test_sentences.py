"""Sentence splitting, TF-IDF embeddings, top-j selection vs a cosine oracle."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from healthqa.index import ScoredDocument
from healthqa.sentences import (TfidfEmbeddingProvider, cosine, select_top_j,
                                split_sentences)
from tests.conftest import MemoryStore, make_documents


class TestSplitSentences:
    def test_terminator_split(self):
        assert split_sentences("It works. It is safe.") == ["It works.", "It is safe."]

    def test_abbreviation_guard(self):
        text = "Approx. 5 mg was given vs. placebo."
        assert split_sentences(text) == [text]

    def test_empty(self):
        assert split_sentences("") == []

    def test_et_al_guard(self):
        text = "Described by Smith et al. Results were positive."
        assert split_sentences(text) == [text]

    def test_no_split_inside_parentheses(self):
        text = "The effect (measured at 5 mg. Higher doses too) was clear. Done."
        assert split_sentences(text) == [
            "The effect (measured at 5 mg. Higher doses too) was clear.", "Done."]

    def test_question_and_exclamation(self):
        assert split_sentences("Does it work? It does! Really.") == \
            ["Does it work?", "It does!", "Really."]

    def test_digit_starts_next_sentence(self):
        assert split_sentences("Groups were compared. 50 subjects enrolled.") == \
            ["Groups were compared.", "50 subjects enrolled."]

    def test_lowercase_continuation_not_split(self):
        text = "Levels rose approx. twofold in the cohort."
        assert split_sentences(text) == [text]

    @given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=300))
    def test_non_whitespace_preserved(self, text):
        joined = " ".join(split_sentences(text))
        assert "".join(joined.split()) == "".join(text.split())

    def test_abstract_like_text(self):
        text = ("BACKGROUND: Aspirin is widely used. METHODS: We ran a trial "
                "(n=50. Controls included). RESULTS: Pain fell by approx. 40%. "
                "CONCLUSIONS: Aspirin helps.")
        parts = split_sentences(text)
        assert parts == [
            "BACKGROUND: Aspirin is widely used.",
            "METHODS: We ran a trial (n=50. Controls included).",
            "RESULTS: Pain fell by approx. 40%.",
            "CONCLUSIONS: Aspirin helps.",
        ]
        assert "".join(" ".join(parts).split()) == "".join(text.split())


class TestTfidfProvider:
    def test_deterministic_per_text(self):
        provider = TfidfEmbeddingProvider(["aspirin helps", "placebo does not"])
        a = provider.embed(["aspirin helps"])
        b = provider.embed(["aspirin helps"])
        np.testing.assert_array_equal(a, b)

    def test_batching_does_not_change_vectors(self):
        provider = TfidfEmbeddingProvider(["one two", "two three", "three four"])
        batched = provider.embed(["one two", "three four"])
        single = np.vstack([provider.embed(["one two"]), provider.embed(["three four"])])
        np.testing.assert_array_equal(batched, single)

    def test_fixed_dimension(self):
        provider = TfidfEmbeddingProvider(["a b c", "c d"])
        vectors = provider.embed(["a", "unseen words only", ""])
        assert vectors.shape == (3, provider.dim)
        assert not vectors[1].any()  # OOV text embeds to the zero vector

    def test_empty_collection_rejected(self):
        with pytest.raises(ValueError):
            TfidfEmbeddingProvider([])


class TestCosine:
    def test_self_similarity_is_one(self):
        v = np.array([0.3, 0.0, 2.5])
        assert cosine(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_zero_vector_is_zero(self):
        assert cosine(np.zeros(3), np.array([1.0, 0, 0])) == 0.0

    def test_bounds_on_random_vectors(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            a, b = rng.normal(size=8), rng.normal(size=8)
            assert -1.0 - 1e-12 <= cosine(a, b) <= 1.0 + 1e-12


def _pool_fixture():
    texts = {
        "1": "Aspirin reduces headache pain. Side effects were rare.",
        "2": "Placebo had no measurable effect. Aspirin outperformed placebo clearly.",
        "3": "The trial enrolled 80 adults. Dropout was minimal.",
    }
    docs = [ScoredDocument("1", 3.0, 1), ScoredDocument("2", 2.0, 2),
            ScoredDocument("3", 1.0, 3)]
    return MemoryStore(make_documents(texts)), docs


class TestSelectTopJ:
    def test_identical_sentence_ranks_first_with_similarity_one(self):
        store, docs = _pool_fixture()
        question = "Aspirin reduces headache pain."
        pool_texts = [s for d in docs for s in
                      split_sentences(store.get(d.pmid).abstract)]
        provider = TfidfEmbeddingProvider(pool_texts + [question])
        top = select_top_j(question, docs, 3, provider, store)
        assert top[0].text == "Aspirin reduces headache pain."
        assert top[0].similarity == pytest.approx(1.0, abs=1e-12)

    def test_j_exceeding_pool_returns_all(self):
        store, docs = _pool_fixture()
        provider = TfidfEmbeddingProvider(["anything at all"])
        top = select_top_j("anything", docs, 20, provider, store)
        assert len(top) == 6  # 2 sentences per abstract

    def test_matches_brute_force_cosine_oracle(self):
        """Selection order equals embedding every sentence and sorting exactly."""
        store, docs = _pool_fixture()
        question = "does aspirin reduce headache pain"
        pool = [(sd.rank, i, s) for sd in docs
                for i, s in enumerate(split_sentences(store.get(sd.pmid).abstract))]
        provider = TfidfEmbeddingProvider([s for _, _, s in pool] + [question])

        def exact_cosine(u, v):
            dot = math.fsum(x * y for x, y in zip(u, v))
            nu = math.sqrt(math.fsum(x * x for x in u))
            nv = math.sqrt(math.fsum(y * y for y in v))
            return dot / (nu * nv) if nu and nv else 0.0

        qvec = provider.embed([question])[0]
        ranked = sorted(
            ((exact_cosine(qvec, provider.embed([s])[0]), rank, idx, s)
             for rank, idx, s in pool),
            key=lambda r: (-r[0], r[1], r[2]))

        got = select_top_j(question, docs, 5, provider, store)
        assert [(g.text, g.doc_rank, g.sent_index) for g in got] == \
            [(s, rank, idx) for _, rank, idx, s in ranked[:5]]
        for g, (sim, *_rest) in zip(got, ranked):
            assert g.similarity == pytest.approx(sim, abs=1e-9)

    def test_multiple_sentences_from_same_abstract(self):
        texts = {"1": "Aspirin cuts pain fast. Aspirin cuts pain slowly.",
                 "2": "Unrelated botanical survey of mosses."}
        store = MemoryStore(make_documents(texts))
        docs = [ScoredDocument("1", 2.0, 1), ScoredDocument("2", 1.0, 2)]
        question = "aspirin cuts pain"
        provider = TfidfEmbeddingProvider(
            [s for d in docs for s in split_sentences(store.get(d.pmid).abstract)]
            + [question])
        top = select_top_j(question, docs, 2, provider, store)
        assert [t.source_pmid for t in top] == ["1", "1"]
        assert [t.sent_index for t in top] == [0, 1]

    def test_pool_completeness_and_provenance(self):
        store, docs = _pool_fixture()
        provider = TfidfEmbeddingProvider(["aspirin"])
        for sent in select_top_j("aspirin", docs, 10, provider, store):
            abstract = store.get(sent.source_pmid).abstract
            assert split_sentences(abstract)[sent.sent_index] == sent.text

    def test_similarities_non_increasing(self):
        store, docs = _pool_fixture()
        question = "aspirin effect on placebo"
        pool_texts = [s for d in docs for s in
                      split_sentences(store.get(d.pmid).abstract)]
        provider = TfidfEmbeddingProvider(pool_texts + [question])
        sims = [s.similarity for s in select_top_j(question, docs, 10, provider, store)]
        assert all(a >= b for a, b in zip(sims, sims[1:]))

    def test_j_must_be_positive(self):
        store, docs = _pool_fixture()
        with pytest.raises(ValueError):
            select_top_j("q", docs, 0, TfidfEmbeddingProvider(["x"]), store)
