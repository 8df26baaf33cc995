"""Trainer-facing HTTP API over a running engine.

Endpoints:
  GET  /v1/batch?n=&step=   training batch (id, question, gold_answer,
                            setting, depth) plus the archive's global step
  POST /v1/scores           rollout verdicts as (id, k, successes)
  GET  /v1/archive/stats    per-category counts/means and depth histogram

Handlers share the archive with the evolution loop under its atomicity
contract; the only expected 5xx is 503 on an empty archive.
"""
from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .engine import EmptyArchive, Engine


class BatchProblem(BaseModel):
    id: str
    question: str
    gold_answer: str
    setting: str
    depth: int


class BatchResponse(BaseModel):
    problems: list[BatchProblem]
    global_step: int


class ScoreResult(BaseModel):
    id: str
    k: int = Field(description="rollout count; must be >= 2 to be applied")
    successes: int


class ScoresRequest(BaseModel):
    step: int
    results: list[ScoreResult]


class ScoresAck(BaseModel):
    applied: int
    ignored: int
    rejected: int


class CategoryStats(BaseModel):
    count: int
    mean_score: float


class StatsResponse(BaseModel):
    global_step: int
    total: int
    refresh_misses: int
    per_category: dict[str, CategoryStats]
    depth_histogram: dict[str, int]


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="evoarchive", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/v1/batch", response_model=BatchResponse)
    def fetch_batch(n: int, step: Optional[int] = None):
        if n <= 0:
            raise HTTPException(status_code=400, detail="n must be positive")
        try:
            payload = engine.fetch_batch(n, step)
        except EmptyArchive:
            raise HTTPException(status_code=503, detail="archive is empty")
        return payload

    @app.post("/v1/scores", response_model=ScoresAck)
    def post_scores(body: ScoresRequest):
        try:
            ack = engine.post_scores(
                body.step, [(r.id, r.k, r.successes) for r in body.results]
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return ack

    @app.get("/v1/archive/stats", response_model=StatsResponse)
    def archive_stats():
        return engine.archive.stats()

    return app
