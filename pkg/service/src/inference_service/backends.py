"""Model backends: deterministic built-ins plus optional transformer models.

Built-ins need no downloads and are the defaults:

    EMBED_MODEL=hash      hashed token/char-ngram vectors, L2-normalized
    NLI_MODEL=lexical     token-overlap entailment with negation cues

Any other model name is treated as a Hugging Face checkpoint and loaded
through transformers (install the "neural" extra). Every backend is
deterministic per text and safe for concurrent calls.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from typing import Protocol

import numpy as np

_TOKENS = re.compile(r"[^\W_]+")


def _tokenize(text: str) -> list[str]:
    return _TOKENS.findall(text.lower())


class EmbedBackend(Protocol):
    name: str
    dim: int

    def embed(self, texts: list[str]) -> list[list[float]]: ...


class NliBackend(Protocol):
    name: str

    def score(self, premise: str, hypothesis: str) -> dict[str, float]: ...


class HashedNgramEmbedder:
    """Feature-hashed token + character-trigram vectors.

    Hashing uses md5, so vectors are stable across processes and platforms;
    vectors are L2-normalized (the zero vector stays zero for empty text).
    """

    name = "hash"

    def __init__(self, dim: int = 256):
        self.dim = dim

    def _features(self, text: str) -> Counter:
        feats: Counter = Counter()
        for token in _tokenize(text):
            feats[token] += 1.0
            padded = f"#{token}#"
            for i in range(len(padded) - 2):
                feats[padded[i:i + 3]] += 0.5
        return feats

    def _bucket(self, feature: str) -> int:
        return int.from_bytes(hashlib.md5(feature.encode("utf-8")).digest()[:4],
                              "little") % self.dim

    def embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            vec = np.zeros(self.dim)
            for feature, weight in self._features(text).items():
                vec[self._bucket(feature)] += weight
            norm = float(np.linalg.norm(vec))
            if norm > 0.0:
                vec /= norm
            out.append(vec.tolist())
        return out


class LexicalNli:
    """Coverage-based entailment heuristic with negation flipping.

    Coverage is the fraction of hypothesis content tokens present in the
    premise; a negation cue near a hypothesis token in the premise moves the
    mass from supported to refuted. Deterministic, no model weights.
    """

    name = "lexical"

    _STOP = frozenset("""a an the is are was were be been do does did and or
        but of in on at to for with from by it its this that than not no
        nor""".split())
    _CUES = frozenset({"no", "not", "never", "without", "lack", "lacks",
                       "ineffective", "cannot"})
    _WINDOW = 3

    def score(self, premise: str, hypothesis: str) -> dict[str, float]:
        premise_tokens = _tokenize(premise)
        hypo_content = [t for t in _tokenize(hypothesis) if t not in self._STOP]
        if not hypo_content:
            return {"refuted": 0.0, "supported": 0.0, "nei": 1.0}
        present = set(premise_tokens)
        coverage = sum(1 for t in hypo_content if t in present) / len(hypo_content)

        cue_at = [i for i, t in enumerate(premise_tokens) if t in self._CUES]
        hypo_at = [i for i, t in enumerate(premise_tokens) if t in hypo_content]
        negated = any(abs(c - h) <= self._WINDOW for c in cue_at for h in hypo_at)

        refuted = coverage if negated else 0.0
        supported = 0.0 if negated else coverage
        nei = 1.0 - coverage
        total = refuted + supported + nei
        return {"refuted": refuted / total, "supported": supported / total,
                "nei": nei / total}


class TransformersEmbedder:
    """Mean-pooled embeddings from a Hugging Face checkpoint."""

    def __init__(self, model_name: str):
        import torch
        from transformers import AutoModel, AutoTokenizer

        self.name = model_name
        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(model_name)
        self._model = AutoModel.from_pretrained(model_name)
        self._model.eval()
        self.dim = int(self._model.config.hidden_size)

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts:
            return []
        torch = self._torch
        with torch.no_grad():
            enc = self._tokenizer(texts, padding=True, truncation=True,
                                  return_tensors="pt")
            hidden = self._model(**enc).last_hidden_state
            mask = enc["attention_mask"].unsqueeze(-1)
            pooled = (hidden * mask).sum(1) / mask.sum(1).clamp(min=1)
        return [row.tolist() for row in pooled]


class TransformersNli:
    """Three-way NLI from a Hugging Face sequence-classification checkpoint.

    Model labels map entailment -> supported, contradiction -> refuted,
    neutral -> nei.
    """

    def __init__(self, model_name: str):
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self.name = model_name
        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(model_name)
        self._model = AutoModelForSequenceClassification.from_pretrained(model_name)
        self._model.eval()
        id2label = {i: label.lower()
                    for i, label in self._model.config.id2label.items()}
        self._mapping = {}
        for i, label in id2label.items():
            if "entail" in label:
                self._mapping[i] = "supported"
            elif "contra" in label:
                self._mapping[i] = "refuted"
            else:
                self._mapping[i] = "nei"

    def score(self, premise: str, hypothesis: str) -> dict[str, float]:
        torch = self._torch
        with torch.no_grad():
            enc = self._tokenizer(premise, hypothesis, truncation=True,
                                  return_tensors="pt")
            probs = torch.softmax(self._model(**enc).logits[0], dim=-1)
        out = {"refuted": 0.0, "supported": 0.0, "nei": 0.0}
        for i, p in enumerate(probs.tolist()):
            out[self._mapping.get(i, "nei")] += p
        return out


def build_embed_backend(model_name: str) -> EmbedBackend:
    if model_name == "hash":
        return HashedNgramEmbedder()
    return TransformersEmbedder(model_name)


def build_nli_backend(model_name: str) -> NliBackend:
    if model_name == "lexical":
        return LexicalNli()
    return TransformersNli(model_name)
