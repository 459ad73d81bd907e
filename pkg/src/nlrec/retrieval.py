"""Passage scoring, top-n mean aggregation, and item ranking.

The scoring hot path is a single dense matrix-vector product over the passage
index; per-item aggregation uses linear-time top-n selection. Corpora at the
hundreds-of-thousands-of-passages scale are scored exhaustively and exactly,
with no approximate-nearest-neighbor structure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Dataset, Query
from .embedding import Encoder, FingerprintMismatch, PassageIndex
from .reformulate import QRMethod, ReformulatedQuery, Reformulator


@dataclass(frozen=True)
class PassageScore:
    item_id: str
    passage_id: str
    score: float


@dataclass(frozen=True)
class ItemScore:
    item_id: str
    score: float
    contributing: tuple[str, ...]


@dataclass(frozen=True)
class RankedList:
    query_id: str
    entries: tuple[ItemScore, ...]


def _check_fingerprint(index: PassageIndex, provider: Encoder) -> None:
    if index.fingerprint != provider.fingerprint:
        raise FingerprintMismatch(
            f"index built with {index.fingerprint!r}, provider is {provider.fingerprint!r}"
        )


def query_scores(q_text: str, index: PassageIndex, provider: Encoder) -> np.ndarray:
    """Cosine of the embedded query against every index row, aligned with index order."""
    _check_fingerprint(index, provider)
    if len(index) == 0:
        return np.empty(0, dtype=np.float64)
    qvec = provider.encode_batch([q_text])[0]
    return index.vectors @ qvec


def score_passages(q_text: str, index: PassageIndex, provider: Encoder) -> list[PassageScore]:
    scores = query_scores(q_text, index, provider)
    return [
        PassageScore(item_id=index.item_ids[row], passage_id=index.passage_ids[row], score=float(scores[row]))
        for row in range(len(index))
    ]


def top_n_indices(scores: np.ndarray, n: int) -> np.ndarray:
    """Indices of the min(n, m) largest scores, ordered by (-score, index).

    Linear-time selection via argpartition; ties at the selection boundary are
    resolved toward the smallest index so the selected set is deterministic.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    m = scores.shape[0]
    if n >= m:
        selected = np.arange(m)
    else:
        candidates = np.argpartition(-scores, n - 1)[:n]
        boundary = scores[candidates].min()
        above = np.flatnonzero(scores > boundary)
        tied = np.flatnonzero(scores == boundary)
        selected = np.concatenate([above, tied[: n - above.size]])
    order = np.lexsort((selected, -scores[selected]))
    return selected[order]


def aggregate_item(scores: list[PassageScore], n: int) -> ItemScore:
    """Mean of the item's min(n, m) highest passage scores.

    Items with fewer than n passages average everything they have.
    """
    if not scores:
        raise ValueError("cannot aggregate an empty score list")
    item_id = scores[0].item_id
    values = np.asarray([s.score for s in scores], dtype=np.float64)
    top = top_n_indices(values, n)
    return ItemScore(
        item_id=item_id,
        score=float(np.mean(values[top])),
        contributing=tuple(scores[i].passage_id for i in top),
    )


def rank_from_scores(query_id: str, scores: np.ndarray, index: PassageIndex, n: int) -> RankedList:
    """Aggregate per-passage scores into a full descending item ranking.

    Ties are broken by ascending item_id so golden outputs are deterministic.
    """
    entries = []
    for item_id, rows in index.item_rows.items():
        item_scores = scores[rows]
        top = top_n_indices(item_scores, n)
        contributing = tuple(index.passage_ids[rows.start + i] for i in top)
        entries.append(ItemScore(item_id=item_id, score=float(np.mean(item_scores[top])), contributing=contributing))
    entries.sort(key=lambda e: (-e.score, e.item_id))
    return RankedList(query_id=query_id, entries=tuple(entries))


def rank_reformulated(
    rq: ReformulatedQuery,
    index: PassageIndex,
    n: int,
    provider: Encoder,
) -> tuple[RankedList, np.ndarray]:
    """Score and rank an already-reformulated query; also returns the raw score vector."""
    scores = query_scores(rq.text, index, provider)
    return rank_from_scores(rq.original.query_id, scores, index, n), scores


def rank_items(
    query: Query,
    method: QRMethod | str,
    dataset: Dataset,
    index: PassageIndex,
    n: int,
    *,
    encoder: Encoder,
    reformulator: Reformulator,
) -> RankedList:
    """Full pipeline for one query: reformulate, score every passage, aggregate, sort."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(index.item_rows) != len(dataset.items):
        raise ValueError(
            f"index covers {len(index.item_rows)} items, dataset has {len(dataset.items)}"
        )
    rq = reformulator.reformulate(query, method)
    ranked, _ = rank_reformulated(rq, index, n, encoder)
    return ranked


def write_run(ranked: RankedList, path: str | Path) -> None:
    """Persist a ranking as JSONL: one line per item, best first."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for rank, entry in enumerate(ranked.entries, start=1):
            record = {
                "rank": rank,
                "item_id": entry.item_id,
                "score": entry.score,
                "contributing_passages": list(entry.contributing),
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_run(path: str | Path) -> RankedList:
    entries = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            record = json.loads(line)
            entries.append(
                ItemScore(
                    item_id=record["item_id"],
                    score=record["score"],
                    contributing=tuple(record["contributing_passages"]),
                )
            )
    return RankedList(query_id=Path(path).stem, entries=tuple(entries))


def run_path(out_dir: str | Path, dataset: str, method: str, query_id: str) -> Path:
    return Path(out_dir) / "runs" / dataset / method / f"{query_id}.jsonl"
