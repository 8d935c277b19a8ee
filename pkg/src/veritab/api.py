"""HTTP/JSON surface over the engine.

Endpoints:
    POST /v1/ingest            {"table_path": ..., "lexicon_path": ...}
    POST /v1/ask               {"thread_id"?: ..., "question": ...}
    GET  /v1/threads/{id}
    GET  /v1/chunks/{id}
    GET  /v1/metrics
    GET  /v1/health

Set the VERITAB_TOKEN environment variable to require a bearer token on
every call.
"""

from __future__ import annotations

import os

from fastapi import Body, FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware

from .errors import GatewayError, StoreEmpty, UnknownThread, VeritabError
from .service import Engine

TOKEN_ENV = "VERITAB_TOKEN"


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="veritab", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    def check_auth(request: Request) -> None:
        token = os.environ.get(TOKEN_ENV)
        if not token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or bad bearer token")

    @app.post("/v1/ingest")
    def ingest(request: Request, body: dict = Body(...)):
        check_auth(request)
        table_path = body.get("table_path")
        lexicon_path = body.get("lexicon_path")
        if not table_path or not lexicon_path:
            raise HTTPException(status_code=400, detail="table_path and lexicon_path required")
        try:
            return engine.ingest(table_path, lexicon_path)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except VeritabError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.post("/v1/ask")
    def ask(request: Request, body: dict = Body(...)):
        check_auth(request)
        question = body.get("question")
        if not isinstance(question, str) or not question.strip():
            raise HTTPException(status_code=400, detail="question required")
        thread_id = body.get("thread_id")
        if thread_id is not None and not isinstance(thread_id, str):
            raise HTTPException(status_code=400, detail="thread_id must be a string")
        try:
            return engine.ask(thread_id, question)
        except StoreEmpty as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        except UnknownThread as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except GatewayError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        except VeritabError as exc:
            # e.g. a token limit too small for even one chunk
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/v1/threads/{thread_id}")
    def thread(request: Request, thread_id: str):
        check_auth(request)
        try:
            return engine.thread(thread_id).to_dict()
        except UnknownThread as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/v1/chunks/{chunk_id}")
    def chunk(request: Request, chunk_id: str):
        check_auth(request)
        try:
            found = engine.chunk(chunk_id)
        except StoreEmpty as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        if found is None:
            raise HTTPException(status_code=404, detail=f"unknown chunk: {chunk_id}")
        return found.to_dict()

    @app.get("/v1/metrics")
    def metrics(request: Request):
        check_auth(request)
        return engine.metrics()

    @app.get("/v1/health")
    def health(request: Request):
        check_auth(request)
        return {
            "status": "ok" if engine.store_size() else "empty",
            "store_size": engine.store_size(),
            "provider": engine.config.provider,
        }

    return app
