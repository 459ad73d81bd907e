"""Independent brute-force reference implementations used as test oracles.

These deliberately avoid the library's scoring/aggregation code paths: plain
double loops, full sorts, and math.log2, so they stay an independent check on
the optimized implementations.
"""

from __future__ import annotations

import math

import numpy as np


def reference_rank(items, q_text: str, encoder, n: int) -> list[tuple[str, float]]:
    """Full double loop over items and passages, full sort of each item's scores."""
    qvec = encoder.encode_batch([q_text])[0]
    results = []
    for item in items:
        passage_scores = []
        for passage in item.passages:
            pvec = encoder.encode_batch([passage.text])[0]
            passage_scores.append(float(np.dot(qvec, pvec)))
        top = sorted(passage_scores, reverse=True)[: min(n, len(passage_scores))]
        results.append((item.item_id, sum(top) / len(top)))
    results.sort(key=lambda pair: (-pair[1], pair[0]))
    return results


def reference_dcg(ranking: list[str], relevant: set[str], k: int) -> float:
    total = 0.0
    for position, item_id in enumerate(ranking[:k], start=1):
        if item_id in relevant:
            total += 1.0 / math.log2(position + 1)
    return total


def reference_ndcg(ranking: list[str], relevant: set[str], k: int) -> float:
    if not relevant:
        return 0.0
    ideal = reference_dcg(sorted(relevant), relevant, min(k, len(relevant)))
    return reference_dcg(ranking, relevant, k) / ideal


def reference_precision(ranking: list[str], relevant: set[str], k: int) -> float:
    return len([item_id for item_id in ranking[:k] if item_id in relevant]) / k
