"""Estimator-style wrapper around the retrieval pipeline.

`fit` embeds the corpus into the passage index; `rank`/`recommend` run queries
against it. Follows the scikit-learn estimator contract (constructor params
stored verbatim, fitted state in trailing-underscore attributes, get_params /
set_params inherited) so the recommender composes with that ecosystem.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .corpus import Item, Query
from .embedding import (
    EmbeddingCache,
    EmbeddingProviderConfig,
    build_index,
    make_encoder,
)
from .reformulate import LLMProvider, QRMethod, ReformulatedQuery, Reformulator
from .retrieval import RankedList, rank_from_scores, query_scores


@dataclass(frozen=True)
class PassageEvidence:
    passage_id: str
    text: str
    score: float


@dataclass(frozen=True)
class RecommendedItem:
    rank: int
    item_id: str
    name: str
    score: float
    passages: tuple[PassageEvidence, ...]


@dataclass(frozen=True)
class RecommendResponse:
    query: str
    method: str
    reformulation: dict
    results: tuple[RecommendedItem, ...]

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "method": self.method,
            "reformulation": self.reformulation,
            "results": [
                {
                    "rank": item.rank,
                    "item_id": item.item_id,
                    "name": item.name,
                    "score": item.score,
                    "passages": [
                        {"passage_id": p.passage_id, "text": p.text, "score": p.score}
                        for p in item.passages
                    ],
                }
                for item in self.results
            ],
        }


def _reformulation_payload(rq: ReformulatedQuery) -> dict:
    return {
        "method": rq.method.value,
        "text": rq.text,
        "segments": list(rq.segments),
        "elaborations": [
            {"title": e.subtopic_title, "body": e.body} for e in rq.elaborations
        ],
    }


class PassageRankRecommender(BaseEstimator):
    """Ranks items for natural-language queries by the mean of their top-n passage cosines.

    Parameters
    ----------
    encoder_config : EmbeddingProviderConfig, default deterministic test encoder
    llm : LLMProvider or None; required for every method except "noqr"
    n : top-n passages averaged per item
    eqr_k : requested subtopic count for the elaborative method
    cache_dir : optional on-disk embedding cache location
    """

    def __init__(
        self,
        encoder_config: EmbeddingProviderConfig | None = None,
        llm: LLMProvider | None = None,
        n: int = 50,
        eqr_k: int = 5,
        on_parse_failure: str = "retry-once",
        cache_dir: str | Path | None = None,
        prompt_dir: str | Path | None = None,
        replay_log: str | Path | None = None,
        max_workers: int = 1,
    ) -> None:
        self.encoder_config = encoder_config
        self.llm = llm
        self.n = n
        self.eqr_k = eqr_k
        self.on_parse_failure = on_parse_failure
        self.cache_dir = cache_dir
        self.prompt_dir = prompt_dir
        self.replay_log = replay_log
        self.max_workers = max_workers

    def fit(self, X: Sequence[Item], y=None) -> "PassageRankRecommender":
        """Embed every passage of the corpus `X` (a sequence of Items) into the index."""
        items = list(X)
        if not items:
            raise ValueError("cannot fit on an empty corpus")
        for item in items:
            if not item.passages:
                raise ValueError(f"item {item.item_id} has no passages")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        self.encoder_ = make_encoder(self.encoder_config or EmbeddingProviderConfig())
        cache = EmbeddingCache(self.cache_dir) if self.cache_dir else None
        self.index_ = build_index(items, self.encoder_, cache, max_workers=self.max_workers)
        self.items_ = items
        self.item_names_ = {item.item_id: item.name for item in items}
        self.passage_texts_ = {
            (p.item_id, p.passage_id): p.text for item in items for p in item.passages
        }
        self.passage_rows_ = {
            (self.index_.item_ids[row], self.index_.passage_ids[row]): row
            for row in range(len(self.index_))
        }
        self.reformulator_ = Reformulator(
            llm=self.llm,
            k=self.eqr_k,
            on_parse_failure=self.on_parse_failure,
            prompt_dir=self.prompt_dir,
            replay_log=self.replay_log,
        )
        return self

    def _as_query(self, query: Query | str) -> Query:
        if isinstance(query, Query):
            return query
        return Query(query_id="adhoc", text=query)

    def rank(self, query: Query | str, method: QRMethod | str = QRMethod.NO_QR) -> RankedList:
        """Full descending item ranking for one query."""
        check_is_fitted(self, "index_")
        rq = self.reformulator_.reformulate(self._as_query(query), QRMethod(method))
        scores = query_scores(rq.text, self.index_, self.encoder_)
        return rank_from_scores(rq.original.query_id, scores, self.index_, self.n)

    def recommend(
        self,
        query: Query | str,
        method: QRMethod | str = QRMethod.NO_QR,
        top_k: int = 10,
    ) -> RecommendResponse:
        """Top-k items with their reformulation and contributing passage evidence."""
        check_is_fitted(self, "index_")
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        q = self._as_query(query)
        rq = self.reformulator_.reformulate(q, QRMethod(method))
        scores = query_scores(rq.text, self.index_, self.encoder_)
        ranked = rank_from_scores(q.query_id, scores, self.index_, self.n)

        results = []
        for rank, entry in enumerate(ranked.entries[:top_k], start=1):
            evidence = tuple(
                PassageEvidence(
                    passage_id=passage_id,
                    text=self.passage_texts_[(entry.item_id, passage_id)],
                    score=float(scores[self.passage_rows_[(entry.item_id, passage_id)]]),
                )
                for passage_id in entry.contributing
            )
            results.append(
                RecommendedItem(
                    rank=rank,
                    item_id=entry.item_id,
                    name=self.item_names_.get(entry.item_id, entry.item_id),
                    score=entry.score,
                    passages=evidence,
                )
            )
        return RecommendResponse(
            query=q.text,
            method=QRMethod(method).value,
            reformulation=_reformulation_payload(rq),
            results=tuple(results),
        )
