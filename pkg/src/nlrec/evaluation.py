"""Ranking metrics (NDCG@k, Precision@k), the method-comparison benchmark, and the top-n ablation sweep.

Metrics use binary gains throughout: relevance labels are 0/1, so the
exponential-gain NDCG variant would produce identical values. Macro scores are
arithmetic means over per-query values.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Dataset
from .embedding import EmbeddingCache, EmbeddingProviderConfig, make_encoder
from .reformulate import QRMethod, ReformulatedQuery, Reformulator
from .retrieval import RankedList, rank_from_scores, query_scores, run_path, write_run

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricConfig:
    cutoffs: tuple[int, ...] = (10, 30)
    metrics: tuple[str, ...] = ("ndcg", "precision")

    def __post_init__(self) -> None:
        if not self.cutoffs or any(k < 1 for k in self.cutoffs):
            raise ValueError("cutoffs must be positive")
        if list(self.cutoffs) != sorted(set(self.cutoffs)):
            raise ValueError("cutoffs must be sorted ascending and unique")
        for metric in self.metrics:
            if metric not in ("ndcg", "precision"):
                raise ValueError(f"unknown metric: {metric!r}")


def precision_at_k(ranking: Sequence[str], relevant: set[str], k: int) -> float:
    """|top-k hits| / k; the denominator stays k even for short rankings."""
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = sum(1 for item_id in ranking[:k] if item_id in relevant)
    return hits / k


def ndcg_at_k(ranking: Sequence[str], relevant: set[str], k: int) -> float:
    """Binary-gain NDCG; 0.0 when the relevant set is empty."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not relevant:
        return 0.0
    dcg = 0.0
    for position, item_id in enumerate(ranking[:k], start=1):
        if item_id in relevant:
            dcg += 1.0 / math.log2(position + 1)
    ideal_hits = min(k, len(relevant))
    idcg = sum(1.0 / math.log2(position + 1) for position in range(1, ideal_hits + 1))
    return dcg / idcg


def evaluate_ranking(ranking: Sequence[str], relevant: set[str], config: MetricConfig) -> dict[str, float]:
    values: dict[str, float] = {}
    for metric in config.metrics:
        fn = ndcg_at_k if metric == "ndcg" else precision_at_k
        for k in config.cutoffs:
            values[f"{metric}@{k}"] = fn(ranking, relevant, k)
    return values


def macro_average(per_query: dict[str, dict[str, float]]) -> dict[str, float]:
    if not per_query:
        return {}
    keys = next(iter(per_query.values())).keys()
    return {key: float(np.mean([values[key] for values in per_query.values()])) for key in keys}


@dataclass
class MetricsReport:
    dataset: str
    method: str
    encoder_fingerprint: str
    n: int
    per_query: dict[str, dict[str, float]]
    macro: dict[str, float]
    averaging: str = "macro-over-queries"
    failed_queries: tuple[str, ...] = ()
    empty_relevant_queries: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "method": self.method,
            "encoder": self.encoder_fingerprint,
            "n": self.n,
            "averaging": self.averaging,
            "macro": self.macro,
            "per_query": self.per_query,
            "failed_queries": list(self.failed_queries),
            "empty_relevant_queries": list(self.empty_relevant_queries),
        }


@dataclass
class AblationReport:
    dataset: str
    method: str
    encoder_fingerprint: str
    n_values: tuple[int, ...]
    per_n: dict[int, dict[str, float]]

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "method": self.method,
            "encoder": self.encoder_fingerprint,
            "n_values": list(self.n_values),
            "per_n": {str(n): metrics for n, metrics in self.per_n.items()},
        }


class _BenchmarkContext:
    """Shared state for one dataset run: built indexes and memoized reformulations."""

    def __init__(
        self,
        dataset: Dataset,
        reformulator: Reformulator,
        cache_dir: str | Path | None,
        max_workers: int = 1,
    ) -> None:
        self.dataset = dataset
        self.reformulator = reformulator
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.max_workers = max_workers
        self._reformulations: dict[tuple[str, str], ReformulatedQuery] = {}

    def build(self, config: EmbeddingProviderConfig):
        from .embedding import build_index

        encoder = make_encoder(config)
        cache = None
        if self.cache_dir is not None:
            safe = encoder.fingerprint.replace("/", "_").replace(":", "_")
            cache = EmbeddingCache(self.cache_dir / safe)
        index = build_index(self.dataset.items, encoder, cache, max_workers=self.max_workers)
        return encoder, index

    def reformulate(self, query, method: QRMethod) -> ReformulatedQuery:
        key = (method.value, query.query_id)
        if key not in self._reformulations:
            self._reformulations[key] = self.reformulator.reformulate(query, method)
        return self._reformulations[key]


def run_benchmark(
    dataset: Dataset,
    methods: Sequence[QRMethod | str],
    encoder_configs: Sequence[EmbeddingProviderConfig],
    *,
    reformulator: Reformulator,
    n: int = 50,
    metric_config: MetricConfig | None = None,
    out_dir: str | Path | None = None,
    cache_dir: str | Path | None = None,
    max_workers: int = 1,
) -> list[MetricsReport]:
    """Rank every query under every (method, encoder), persist runs, and report metrics.

    A query that fails (provider error, unparseable reformulation) is recorded
    in the report and excluded from macro means, with a warning. Reformulations
    are computed once per (method, query) and shared across encoders.
    """
    metric_config = metric_config or MetricConfig()
    methods = [QRMethod(m) for m in methods]
    context = _BenchmarkContext(dataset, reformulator, cache_dir, max_workers)
    reports: list[MetricsReport] = []

    for encoder_config in encoder_configs:
        encoder, index = context.build(encoder_config)
        for method in methods:
            per_query: dict[str, dict[str, float]] = {}
            failed: list[str] = []
            empty_relevant: list[str] = []
            for query in dataset.queries:
                relevant = dataset.qrels.get(query.query_id, set())
                if not relevant:
                    empty_relevant.append(query.query_id)
                    logger.warning("query %s has an empty relevant set; metrics will be 0", query.query_id)
                try:
                    rq = context.reformulate(query, method)
                    scores = query_scores(rq.text, index, encoder)
                except Exception as exc:
                    failed.append(query.query_id)
                    logger.warning("query %s failed under %s: %s", query.query_id, method.value, exc)
                    continue
                ranked = rank_from_scores(query.query_id, scores, index, n)
                if out_dir is not None:
                    write_run(ranked, run_path(out_dir, dataset.name, method.value, query.query_id))
                ranking_ids = [entry.item_id for entry in ranked.entries]
                per_query[query.query_id] = evaluate_ranking(ranking_ids, relevant, metric_config)
            reports.append(
                MetricsReport(
                    dataset=dataset.name,
                    method=method.value,
                    encoder_fingerprint=encoder.fingerprint,
                    n=n,
                    per_query=per_query,
                    macro=macro_average(per_query),
                    failed_queries=tuple(failed),
                    empty_relevant_queries=tuple(empty_relevant),
                )
            )

    if out_dir is not None:
        write_reports(reports, dataset.name, out_dir)
    return reports


def ablation_topn(
    dataset: Dataset,
    method: QRMethod | str,
    encoder_config: EmbeddingProviderConfig,
    n_values: Sequence[int],
    *,
    reformulator: Reformulator,
    metric_config: MetricConfig | None = None,
    out_dir: str | Path | None = None,
    cache_dir: str | Path | None = None,
) -> AblationReport:
    """Sweep the top-n aggregation parameter with shared reformulations, index, and passage scores.

    Only the aggregation step is recomputed per n; embedding work is done once.
    """
    if not n_values or any(n < 1 for n in n_values):
        raise ValueError("n_values must be non-empty and positive")
    metric_config = metric_config or MetricConfig()
    method = QRMethod(method)
    context = _BenchmarkContext(dataset, reformulator, cache_dir)
    encoder, index = context.build(encoder_config)

    query_score_vectors: dict[str, np.ndarray] = {}
    for query in dataset.queries:
        rq = context.reformulate(query, method)
        query_score_vectors[query.query_id] = query_scores(rq.text, index, encoder)

    per_n: dict[int, dict[str, float]] = {}
    for n in n_values:
        per_query: dict[str, dict[str, float]] = {}
        for query in dataset.queries:
            ranked = rank_from_scores(query.query_id, query_score_vectors[query.query_id], index, n)
            if out_dir is not None:
                write_run(ranked, run_path(out_dir, dataset.name, f"{method.value}/n{n}", query.query_id))
            ranking_ids = [entry.item_id for entry in ranked.entries]
            relevant = dataset.qrels.get(query.query_id, set())
            per_query[query.query_id] = evaluate_ranking(ranking_ids, relevant, metric_config)
        per_n[n] = macro_average(per_query)

    report = AblationReport(
        dataset=dataset.name,
        method=method.value,
        encoder_fingerprint=encoder.fingerprint,
        n_values=tuple(n_values),
        per_n=per_n,
    )
    if out_dir is not None:
        path = Path(out_dir) / "ablation" / f"{dataset.name}_{method.value}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report


def write_reports(reports: Iterable[MetricsReport], dataset_name: str, out_dir: str | Path) -> None:
    """Emit machine-readable JSON plus a Markdown grid (methods x metrics, best bolded)."""
    reports = list(reports)
    out_dir = Path(out_dir) / "reports"
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"dataset": dataset_name, "reports": [report.to_dict() for report in reports]}
    (out_dir / f"{dataset_name}.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out_dir / f"{dataset_name}.md").write_text(render_markdown(reports, dataset_name), encoding="utf-8")


def _metric_label(key: str) -> str:
    metric, _, k = key.partition("@")
    return ("NDCG" if metric == "ndcg" else "P") + "@" + k


def render_markdown(reports: Sequence[MetricsReport], dataset_name: str) -> str:
    lines = [f"# {dataset_name}", ""]
    encoders: list[str] = []
    for report in reports:
        if report.encoder_fingerprint not in encoders:
            encoders.append(report.encoder_fingerprint)
    for encoder in encoders:
        block = [r for r in reports if r.encoder_fingerprint == encoder]
        if not block:
            continue
        metric_keys = list(block[0].macro.keys())
        lines.append(f"## {encoder} (n={block[0].n})")
        lines.append("")
        lines.append("| Method | " + " | ".join(_metric_label(k) for k in metric_keys) + " |")
        lines.append("|" + "---|" * (len(metric_keys) + 1))
        best = {key: max((r.macro.get(key, float("-inf")) for r in block), default=0.0) for key in metric_keys}
        for report in block:
            cells = []
            for key in metric_keys:
                value = report.macro.get(key)
                if value is None:
                    cells.append("-")
                    continue
                text = f"{value:.3f}"
                cells.append(f"**{text}**" if value == best[key] else text)
            lines.append("| " + report.method + " | " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines) + "\n"
