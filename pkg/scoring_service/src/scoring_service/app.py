"""FastAPI application exposing /embed, /side, and /health.

Stateless between requests. Backend choice comes from the environment:
SCORING_BACKEND=hashing (default) or sbert with SCORING_MODEL naming the
sentence-transformers model. SCORING_TOKEN, when set, requires the same
value in the X-Auth-Token header.
"""

from __future__ import annotations

import os
from typing import Optional

from fastapi import FastAPI, Header, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backends import Backend, HashingBackend, SbertBackend

MAX_TEXTS = 256
MAX_TEXT_CHARS = 8192


class EmbedRequest(BaseModel):
    texts: list[str]


class EmbedResponse(BaseModel):
    vectors: list[list[float]]
    dim: int
    model_id: str


class SideRequest(BaseModel):
    code: str
    sentences: list[str]


class SideResponse(BaseModel):
    scores: list[float]
    model_id: str


def backend_from_env() -> Backend:
    kind = os.environ.get("SCORING_BACKEND", "hashing").lower()
    if kind == "sbert":
        model = os.environ.get("SCORING_MODEL", "sentence-transformers/all-MiniLM-L6-v2")
        return SbertBackend(model)
    dim = int(os.environ.get("SCORING_DIM", "512"))
    return HashingBackend(dim=dim)


def create_app(backend: Optional[Backend] = None) -> FastAPI:
    app = FastAPI(title="scoring-service", version="0.1.0")
    app.state.backend = backend or backend_from_env()
    token = os.environ.get("SCORING_TOKEN", "")

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": "malformed request body"})

    def check_auth(header_token: Optional[str]) -> None:
        if token and header_token != token:
            raise HTTPException(status_code=401, detail="missing or wrong auth token")

    def require_ready() -> Backend:
        be: Backend = app.state.backend
        if not be.ready():
            raise HTTPException(status_code=503, detail="model is loading or unavailable")
        return be

    @app.post("/embed", response_model=EmbedResponse)
    def embed(req: EmbedRequest, x_auth_token: Optional[str] = Header(default=None)):
        check_auth(x_auth_token)
        if not (1 <= len(req.texts) <= MAX_TEXTS):
            raise HTTPException(status_code=400, detail=f"texts must hold 1..{MAX_TEXTS} items")
        for i, text in enumerate(req.texts):
            if not text.strip():
                raise HTTPException(status_code=400, detail=f"texts[{i}] is empty")
            if len(text) > MAX_TEXT_CHARS:
                raise HTTPException(
                    status_code=400, detail=f"texts[{i}] exceeds {MAX_TEXT_CHARS} chars"
                )
        be = require_ready()
        vectors = be.embed(req.texts)
        return EmbedResponse(
            vectors=[row.tolist() for row in vectors],
            dim=int(vectors.shape[1]),
            model_id=be.model_id,
        )

    @app.post("/side", response_model=SideResponse)
    def side(req: SideRequest, x_auth_token: Optional[str] = Header(default=None)):
        check_auth(x_auth_token)
        if not req.code.strip():
            raise HTTPException(status_code=400, detail="code must be nonempty")
        if not req.sentences:
            raise HTTPException(status_code=400, detail="sentences must be nonempty")
        if any(not s.strip() for s in req.sentences):
            raise HTTPException(status_code=400, detail="sentences must not contain empty items")
        be = require_ready()
        return SideResponse(scores=be.side_scores(req.code, req.sentences), model_id=be.model_id)

    @app.get("/health")
    def health():
        be: Backend = app.state.backend
        ready = be.ready()
        return {
            "status": "ok" if ready else "loading",
            "model_ids": {"embedding": be.model_id, "side": be.model_id},
            "dim": be.dim,
        }

    return app


def main() -> None:
    import uvicorn

    uvicorn.run(
        create_app(),
        host=os.environ.get("SCORING_HOST", "127.0.0.1"),
        port=int(os.environ.get("SCORING_PORT", "8230")),
    )


if __name__ == "__main__":
    main()
