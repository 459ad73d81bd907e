"""HTTP service exposing the recommendation pipeline for the explorer UI.

The corpus is embedded once at startup (construction fails on a provider /
cache fingerprint mismatch rather than serving stale vectors). The fitted
recommender and dataset are immutable afterwards, so concurrent requests share
them safely.
"""

from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import RunConfig
from .corpus import Dataset, load_dataset
from .embedding import EmbeddingError
from .recommender import PassageRankRecommender
from .reformulate import LLMError, QRMethod, make_llm

logger = logging.getLogger(__name__)


class RecommendRequest(BaseModel):
    query: str = Field(min_length=1)
    method: str = "noqr"
    top_k: int = Field(default=10, ge=1, le=1000)


def build_recommender(config: RunConfig, dataset: Dataset) -> PassageRankRecommender:
    llm = make_llm(config.llm) if config.llm is not None else None
    recommender = PassageRankRecommender(
        encoder_config=config.encoder,
        llm=llm,
        n=config.n,
        eqr_k=config.eqr_k,
        on_parse_failure=config.on_parse_failure,
        cache_dir=config.cache_dir,
        replay_log=config.replay_log,
    )
    return recommender.fit(dataset.items)


def create_app(
    config: RunConfig,
    dataset: Dataset | None = None,
    recommender: PassageRankRecommender | None = None,
) -> FastAPI:
    if dataset is None:
        if config.dataset_dir is None:
            raise ValueError("service requires a dataset directory")
        dataset = load_dataset(config.dataset_dir, name=config.dataset_name)
    if recommender is None:
        recommender = build_recommender(config, dataset)

    app = FastAPI(title="nlrec", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/api/methods")
    def methods() -> list[str]:
        return [method.value for method in QRMethod]

    @app.get("/api/datasets")
    def datasets() -> list[dict]:
        return [
            {
                "name": dataset.name,
                "items": len(dataset.items),
                "queries": len(dataset.queries),
                "passages": dataset.passage_count(),
            }
        ]

    @app.get("/api/items/{item_id}")
    def item(item_id: str) -> dict:
        if not dataset.has_item(item_id):
            raise HTTPException(status_code=404, detail=f"unknown item: {item_id}")
        found = dataset.item(item_id)
        return {
            "item_id": found.item_id,
            "name": found.name,
            "passages": [{"passage_id": p.passage_id, "text": p.text} for p in found.passages],
        }

    @app.post("/api/recommend")
    def recommend(request: RecommendRequest) -> dict:
        try:
            method = QRMethod(request.method)
        except ValueError:
            raise HTTPException(status_code=422, detail=f"unknown method: {request.method}")
        try:
            response = recommender.recommend(request.query, method, top_k=request.top_k)
        except (LLMError, EmbeddingError) as exc:
            logger.error("provider failure serving %r: %s", request.query, exc)
            raise HTTPException(
                status_code=502,
                detail={"error_class": type(exc).__name__, "message": str(exc)},
            )
        return response.to_dict()

    if config.ui_dir is not None and Path(config.ui_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(config.ui_dir), html=True), name="ui")

    return app
