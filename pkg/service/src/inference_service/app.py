"""The HTTP service: /v1/embed, /v1/nli, /health.

Wire contract (all JSON):

    POST /v1/embed  {"texts": [...]}                 200 {"vectors": [[...]], "dim": d}
    POST /v1/nli    {"pairs": [{"premise","hypothesis"}]}
                                                     200 {"scores": [{"refuted","supported","nei"}]}
    GET  /health    200 {"status":"ok","models":{"embed":..., "nli":...}}
                    503 while loading or after a load failure

Malformed bodies answer 400; an /embed batch over MAX_BATCH answers 413.
Requests are stateless; backends are deterministic per text, so identical
inputs always produce identical outputs regardless of batching.

Configuration via environment: EMBED_MODEL (default "hash"), NLI_MODEL
(default "lexical"), MAX_BATCH (default 64), PORT (default 8080).
"""

from __future__ import annotations

import logging
import os

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .backends import EmbedBackend, NliBackend, build_embed_backend, build_nli_backend

logger = logging.getLogger("inference_service")

DEFAULT_EMBED_MODEL = "hash"
DEFAULT_NLI_MODEL = "lexical"
DEFAULT_MAX_BATCH = 64


class EmbedRequest(BaseModel):
    texts: list[str]


class NliPair(BaseModel):
    premise: str
    hypothesis: str


class NliRequest(BaseModel):
    pairs: list[NliPair]


class ServiceState:
    """Backend holder with an explicit loading -> ok | error lifecycle."""

    def __init__(self, embed_model: str, nli_model: str):
        self.embed_model = embed_model
        self.nli_model = nli_model
        self.status = "loading"
        self.error: str | None = None
        self.embedder: EmbedBackend | None = None
        self.nli: NliBackend | None = None

    def load(self) -> None:
        try:
            self.embedder = build_embed_backend(self.embed_model)
            self.nli = build_nli_backend(self.nli_model)
            self.status = "ok"
            logger.info("models loaded: embed=%s nli=%s",
                        self.embedder.name, self.nli.name)
        except Exception as e:
            self.status = "error"
            self.error = str(e)
            logger.error("model load failed: %s", e)

    @property
    def ready(self) -> bool:
        return self.status == "ok"


def create_app(embed_model: str | None = None, nli_model: str | None = None,
               max_batch: int | None = None, lazy: bool = False) -> FastAPI:
    """Build the app; backends load eagerly unless lazy=True."""
    state = ServiceState(
        embed_model=embed_model or os.environ.get("EMBED_MODEL", DEFAULT_EMBED_MODEL),
        nli_model=nli_model or os.environ.get("NLI_MODEL", DEFAULT_NLI_MODEL))
    limit = max_batch or int(os.environ.get("MAX_BATCH", DEFAULT_MAX_BATCH))
    if not lazy:
        state.load()

    app = FastAPI(title="healthqa-inference", version=__version__)
    app.state.service = state

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    def unavailable() -> JSONResponse:
        return JSONResponse(status_code=503,
                            content={"status": state.status, "error": state.error})

    @app.get("/health")
    async def health():
        if not state.ready:
            return unavailable()
        return {"status": "ok",
                "models": {"embed": state.embedder.name, "nli": state.nli.name}}

    @app.post("/v1/embed")
    async def embed(request: EmbedRequest):
        if not state.ready:
            return unavailable()
        if len(request.texts) > limit:
            return JSONResponse(
                status_code=413,
                content={"error": f"batch of {len(request.texts)} exceeds "
                                  f"max_batch={limit}"})
        vectors = state.embedder.embed(request.texts)
        return {"vectors": vectors, "dim": state.embedder.dim}

    @app.post("/v1/nli")
    async def nli(request: NliRequest):
        if not state.ready:
            return unavailable()
        scores = [state.nli.score(pair.premise, pair.hypothesis)
                  for pair in request.pairs]
        return {"scores": scores}

    return app
