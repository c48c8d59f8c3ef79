"""HTTP query service over the trained pipeline.

Stateless JSON endpoints for the companion UI: POST /api/query runs
retrieve -> classify -> rank, GET /api/article/{id} serves drill-down text,
GET /health reports readiness and the model content hash. All shared state
(models, article store, BM25 index) is immutable after startup, so request
handling is safely concurrent and identical requests return identical bodies
apart from timing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .corpus import ArticleStore, Question, split_sentences
from .pipeline import Bm25Index, CandidateSet, QueryResult, StanceSearchPipeline


class QueryRequest(BaseModel):
    question: str
    pool: list[int] | None = None
    sizes: tuple[int, int, int] | None = None


@dataclass
class ServiceState:
    pipeline: StanceSearchPipeline | None = None
    store: ArticleStore | None = None
    index: Bm25Index | None = None
    model_version: str = ""
    pool_size: int = 100

    @property
    def ready(self) -> bool:
        return self.pipeline is not None and self.store is not None


def _result_payload(result: QueryResult, store: ArticleStore) -> dict:
    def items(ranked) -> list[dict]:
        out = []
        for item in ranked:
            sentences = store[item.article_id].sentences
            out.append(
                {
                    "article_id": item.article_id,
                    "title": sentences[0] if sentences else "",
                    "p": item.p,
                    "rel": item.rel,
                    "beta": item.beta,
                    "key_sentences": [
                        {"text": text, "similarity": sim} for text, sim in item.key_sentences
                    ],
                }
            )
        return out

    return {
        "agree": items(result.agree),
        "disagree": items(result.disagree),
        "discuss": items(result.discuss),
    }


def create_app(state: ServiceState, cors_origin: str = "*") -> FastAPI:
    """Build the app around an externally prepared (possibly empty) state."""
    app = FastAPI(title="agreesearch")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[cors_origin] if cors_origin != "*" else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/health")
    def health():
        if not state.ready:
            raise HTTPException(status_code=503, detail="models not loaded")
        return {"status": "ok", "model_version": state.model_version}

    @app.post("/api/query")
    def query(request: QueryRequest):
        if not state.ready:
            raise HTTPException(status_code=503, detail="models not loaded")
        text = request.question.strip()
        if not text:
            raise HTTPException(status_code=400, detail="question must be non-empty")
        started = time.perf_counter()
        question = Question(text=text)
        pipeline = state.pipeline
        if request.sizes is not None:
            pipeline = StanceSearchPipeline(
                extractor=pipeline.extractor,
                relatedness=pipeline.relatedness,
                agreement=pipeline.agreement,
                embeddings=pipeline.embeddings,
                list_sizes=tuple(request.sizes),
            )
        if request.pool is not None:
            missing = [i for i in request.pool if i not in state.store]
            if missing:
                raise HTTPException(status_code=400, detail=f"unknown article ids {missing}")
            pool = CandidateSet(question=question, article_ids=list(request.pool))
        else:
            pool = state.index.retrieve(question, state.pool_size)
        result = pipeline.rank_candidates(question, pool, state.store)
        payload = _result_payload(result, state.store)
        payload["timing_ms"] = 1000.0 * (time.perf_counter() - started)
        return payload

    @app.get("/api/article/{article_id}")
    def article(article_id: int):
        if not state.ready:
            raise HTTPException(status_code=503, detail="models not loaded")
        if article_id not in state.store:
            raise HTTPException(status_code=404, detail=f"no article {article_id}")
        item = state.store[article_id]
        return {
            "article_id": article_id,
            "text": item.text,
            "sentences": split_sentences(item.text),
        }

    return app
