"""The scoring service: POST /score and GET /health.

Wire protocol (JSON):

    request:  {"text": str, "labels": [str, ...], "template": str,
               "multi_label": bool}
    response: {"scores": [float, ...], "model_id": str, "latency_ms": float}
              plus "truncated": true when the input was shortened

Multiclass (multi_label=false) responses softmax the per-label entailment
logits across labels, so they sum to 1. Multilabel responses normalize
entailment against contradiction per label, independently.

Errors: 400 malformed request, 413 input beyond the hard size cap,
503 model not ready.
"""

from __future__ import annotations

import math
import os
import time
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backends import build_backend

MODEL_ENV = "SIDECAR_MODEL"
DEFAULT_CHECKPOINT = "facebook/bart-large-mnli"
DEFAULT_TEMPLATE = "This example is about {}."
MAX_INPUT_CHARS = int(os.environ.get("SIDECAR_MAX_INPUT_CHARS", "100000"))


class ScoreWireRequest(BaseModel):
    text: str
    labels: list[str]
    template: str = DEFAULT_TEMPLATE
    multi_label: bool = False


def _softmax(values: list[float]) -> list[float]:
    peak = max(values)
    exps = [math.exp(v - peak) for v in values]
    # fsum keeps the normalization exactly label-order invariant.
    total = math.fsum(exps)
    return [e / total for e in exps]


def _entail_probability(contradiction: float, entailment: float) -> float:
    peak = max(contradiction, entailment)
    e = math.exp(entailment - peak)
    c = math.exp(contradiction - peak)
    return e / (e + c)


def create_app(backend=None, load: bool = True, max_chars: int = MAX_INPUT_CHARS) -> FastAPI:
    """Build the app. Pass a backend directly (tests), or let startup load
    the checkpoint named by the environment."""
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if app.state.backend is None and load:
            checkpoint = os.environ.get(MODEL_ENV, DEFAULT_CHECKPOINT)
            app.state.backend = build_backend(checkpoint)
        yield

    app = FastAPI(title="nli-scorer-sidecar", lifespan=lifespan)
    app.state.backend = backend
    app.state.max_chars = max_chars

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health")
    async def health():
        backend = app.state.backend
        if backend is None:
            return JSONResponse(status_code=503, content={"status": "loading", "model_id": None})
        return {"status": "ready", "model_id": backend.model_id}

    @app.post("/score")
    async def score(request: ScoreWireRequest):
        backend = app.state.backend
        if backend is None:
            raise HTTPException(status_code=503, detail="model not ready")
        if not request.text:
            raise HTTPException(status_code=400, detail="text must be non-empty")
        if len(request.labels) < 2:
            raise HTTPException(status_code=400, detail="need at least 2 labels")
        if any(not label for label in request.labels):
            raise HTTPException(status_code=400, detail="labels must be non-empty strings")
        if request.template.count("{}") != 1:
            raise HTTPException(status_code=400, detail="template needs exactly one {} placeholder")
        if len(request.text) > app.state.max_chars:
            raise HTTPException(
                status_code=413,
                detail=f"text of {len(request.text)} chars exceeds the {app.state.max_chars} cap",
            )
        started = time.perf_counter()
        hypotheses = [request.template.replace("{}", label, 1) for label in request.labels]
        pairs, truncated = backend.score_pairs(request.text, hypotheses)
        if request.multi_label:
            scores = [_entail_probability(c, e) for c, e in pairs]
        else:
            scores = _softmax([e for _, e in pairs])
        payload = {
            "scores": scores,
            "model_id": backend.model_id,
            "latency_ms": (time.perf_counter() - started) * 1000.0,
        }
        if truncated:
            payload["truncated"] = True
        return payload

    return app


def main() -> None:
    import uvicorn

    uvicorn.run(
        create_app(),
        host=os.environ.get("SIDECAR_HOST", "127.0.0.1"),
        port=int(os.environ.get("SIDECAR_PORT", "8737")),
    )


if __name__ == "__main__":
    main()
