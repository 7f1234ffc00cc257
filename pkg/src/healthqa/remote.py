"""Client for the inference service (sentence embeddings + NLI scoring).

Wire contract, pinned at /v1:

    POST /v1/embed  {"texts": [...]}            -> {"vectors": [[...]], "dim": d}
    POST /v1/nli    {"pairs": [{"premise", "hypothesis"}, ...]}
                                                -> {"scores": [{"refuted", "supported", "nei"}]}
    GET  /health                                -> {"status": "ok", "models": {...}}

Requests are chunked to max_batch; the service guarantees per-text
determinism, so batch size never changes results.
"""

from __future__ import annotations

import numpy as np
import httpx

from .reader import EntailmentScore

DEFAULT_MAX_BATCH = 64


class ServiceError(RuntimeError):
    pass


class ServiceClient:
    def __init__(self, base_url: str = "", timeout_ms: int = 30000,
                 client: httpx.Client | None = None,
                 max_batch: int = DEFAULT_MAX_BATCH):
        if client is None:
            client = httpx.Client(base_url=base_url, timeout=timeout_ms / 1000.0)
        self._client = client
        self.max_batch = max_batch

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(path, json=payload)
        except httpx.HTTPError as e:
            raise ServiceError(f"inference service unreachable: {e}") from e
        if response.status_code != 200:
            raise ServiceError(f"{path} -> HTTP {response.status_code}: {response.text[:200]}")
        return response.json()

    def health(self) -> dict:
        response = self._client.get("/health")
        return response.json()

    def embed(self, texts: list[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, 0))
        rows = []
        dim = None
        for start in range(0, len(texts), self.max_batch):
            body = self._post("/v1/embed", {"texts": texts[start:start + self.max_batch]})
            rows.extend(body["vectors"])
            dim = body["dim"]
        vectors = np.asarray(rows, dtype=float)
        if vectors.shape != (len(texts), dim):
            raise ServiceError(f"embed shape mismatch: {vectors.shape} != ({len(texts)}, {dim})")
        return vectors

    def nli(self, pairs: list[tuple[str, str]]) -> list[EntailmentScore]:
        scores = []
        for start in range(0, len(pairs), self.max_batch):
            chunk = pairs[start:start + self.max_batch]
            body = self._post("/v1/nli", {
                "pairs": [{"premise": p, "hypothesis": h} for p, h in chunk]})
            for triple in body["scores"]:
                scores.append(EntailmentScore.normalized(
                    triple["refuted"], triple["supported"], triple["nei"]))
        return scores


class RemoteEmbeddingProvider:
    """EmbeddingProvider backed by the service's /v1/embed."""

    def __init__(self, client: ServiceClient):
        self._client = client

    def embed(self, texts: list[str]) -> np.ndarray:
        return self._client.embed(texts)


class RemoteEntailmentScorer:
    """EntailmentScorer backed by the service's /v1/nli."""

    def __init__(self, client: ServiceClient):
        self._client = client

    def score(self, premise: str, hypothesis: str) -> EntailmentScore:
        return self._client.nli([(premise, hypothesis)])[0]

    def score_many(self, pairs: list[tuple[str, str]]) -> list[EntailmentScore]:
        return self._client.nli(pairs)
