"""Ground-truth construction: LLM binary labeling of query-item pairs and Cohen's kappa.

Labeling prompts the model with the query, the candidate item, and its passages
(up to a character budget), and reads the final "VERDICT: 0|1" line. The label
log is an append-only journal, so interrupted runs resume where they stopped.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .corpus import Item, Qrels, Query
from .reformulate import LLMProvider

logger = logging.getLogger(__name__)

_VERDICT = re.compile(r"VERDICT:\s*([01])\b")


@dataclass(frozen=True)
class LabelRecord:
    query_id: str
    item_id: str
    label: int | None  # None = unlabeled (unparseable after retry); excluded from qrels
    labeler: str
    rationale: str | None = None
    truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "item_id": self.item_id,
            "label": self.label,
            "labeler": self.labeler,
            "rationale": self.rationale,
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "LabelRecord":
        return cls(
            query_id=record["query_id"],
            item_id=record["item_id"],
            label=record["label"],
            labeler=record.get("labeler", "unknown"),
            rationale=record.get("rationale"),
            truncated=record.get("truncated", False),
        )


@dataclass(frozen=True)
class AgreementReport:
    kappa: float
    observed_agreement: float
    expected_agreement: float
    confusion: dict[str, int]  # both_1, a_only, b_only, both_0
    n_pairs: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "observed_agreement": self.observed_agreement,
            "expected_agreement": self.expected_agreement,
            "confusion": self.confusion,
            "n_pairs": self.n_pairs,
            "degenerate": self.degenerate,
        }


def load_label_prompt(prompt_dir: str | Path | None = None) -> str:
    if prompt_dir is not None:
        return (Path(prompt_dir) / "label.txt").read_text(encoding="utf-8")
    return (resources.files("nlrec") / "prompts" / "label.txt").read_text(encoding="utf-8")


def format_passages(item: Item, char_budget: int) -> tuple[str, bool]:
    """Join all passages up to the character budget; reports whether truncation happened."""
    parts: list[str] = []
    used = 0
    truncated = False
    for passage in item.passages:
        block = f"- {passage.text}"
        if used + len(block) > char_budget:
            remaining = char_budget - used
            if remaining > 2:
                parts.append(block[:remaining])
            truncated = True
            break
        parts.append(block)
        used += len(block) + 1
    return "\n".join(parts), truncated


def parse_verdict(raw: str) -> int | None:
    """Last VERDICT line wins; None when no verdict is present."""
    matches = _VERDICT.findall(raw)
    if not matches:
        return None
    return int(matches[-1])


def label_pair(
    query: Query,
    item: Item,
    llm: LLMProvider,
    *,
    char_budget: int = 20000,
    prompt_dir: str | Path | None = None,
) -> LabelRecord:
    """Obtain one binary label; unparseable responses are retried once, then recorded unlabeled."""
    if not item.passages:
        raise ValueError(f"item {item.item_id} has no passages")
    passages_text, truncated = format_passages(item, char_budget)
    prompt = load_label_prompt(prompt_dir).format(
        query=query.text, item_name=item.name, passages=passages_text
    )
    labeler = f"llm:{getattr(getattr(llm, 'config', None), 'model_name', 'stub')}"
    raw = llm.complete(prompt, method="label", query_id=f"{query.query_id}::{item.item_id}")
    label = parse_verdict(raw)
    if label is None:
        logger.warning("no verdict for (%s, %s); retrying once", query.query_id, item.item_id)
        raw = llm.complete(prompt, method="label", query_id=f"{query.query_id}::{item.item_id}")
        label = parse_verdict(raw)
    if label is None:
        logger.warning("pair (%s, %s) left unlabeled", query.query_id, item.item_id)
    return LabelRecord(
        query_id=query.query_id,
        item_id=item.item_id,
        label=label,
        labeler=labeler,
        rationale=raw,
        truncated=truncated,
    )


def read_label_log(path: str | Path) -> list[LabelRecord]:
    path = Path(path)
    if not path.exists():
        return []
    records = []
    with path.open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(LabelRecord.from_dict(json.loads(line)))
    return records


def build_qrels(
    queries: Sequence[Query],
    corpus: Sequence[Item],
    llm: LLMProvider,
    *,
    log_path: str | Path,
    char_budget: int = 20000,
    prompt_dir: str | Path | None = None,
) -> tuple[Qrels, list[LabelRecord]]:
    """Label every query x item pair, journaling each record as it completes.

    Pairs already present in the log are skipped, so an interrupted run picks
    up where it stopped. Returns qrels built from all label=1 records (old and
    new) plus the complete record list.
    """
    log_path = Path(log_path)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    existing = read_label_log(log_path)
    done = {(record.query_id, record.item_id) for record in existing}

    records = list(existing)
    unlabeled = sum(1 for record in existing if record.label is None)
    with log_path.open("a", encoding="utf-8") as journal:
        for query in queries:
            for item in corpus:
                if (query.query_id, item.item_id) in done:
                    continue
                record = label_pair(query, item, llm, char_budget=char_budget, prompt_dir=prompt_dir)
                journal.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
                journal.flush()
                records.append(record)
                if record.label is None:
                    unlabeled += 1
    if unlabeled:
        logger.warning("%d pair(s) remain unlabeled after retries", unlabeled)

    qrels: Qrels = {}
    for record in records:
        if record.label == 1:
            qrels.setdefault(record.query_id, set()).add(record.item_id)
    return qrels, records


def cohens_kappa(a: Sequence[int], b: Sequence[int]) -> AgreementReport:
    """Chance-corrected agreement between two aligned binary label vectors.

    kappa = (p_o - p_e) / (1 - p_e). When p_e = 1 (both labelers constant),
    kappa is defined as 1.0 on full agreement and 0.0 otherwise, flagged as
    degenerate.
    """
    if len(a) != len(b):
        raise ValueError(f"label vectors differ in length: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise ValueError("label vectors must be non-empty")
    for value in (*a, *b):
        if value not in (0, 1):
            raise ValueError(f"labels must be binary, got {value!r}")

    n = len(a)
    both_1 = sum(1 for x, y in zip(a, b) if x == 1 and y == 1)
    a_only = sum(1 for x, y in zip(a, b) if x == 1 and y == 0)
    b_only = sum(1 for x, y in zip(a, b) if x == 0 and y == 1)
    both_0 = n - both_1 - a_only - b_only
    p_o = (both_1 + both_0) / n
    a1 = (both_1 + a_only) / n
    b1 = (both_1 + b_only) / n
    p_e = a1 * b1 + (1 - a1) * (1 - b1)
    confusion = {"both_1": both_1, "a_only": a_only, "b_only": b_only, "both_0": both_0}
    if p_e == 1.0:
        return AgreementReport(
            kappa=1.0 if p_o == 1.0 else 0.0,
            observed_agreement=p_o,
            expected_agreement=p_e,
            confusion=confusion,
            n_pairs=n,
            degenerate=True,
        )
    return AgreementReport(
        kappa=(p_o - p_e) / (1 - p_e),
        observed_agreement=p_o,
        expected_agreement=p_e,
        confusion=confusion,
        n_pairs=n,
    )


def align_records(
    a_records: Sequence[LabelRecord], b_records: Sequence[LabelRecord]
) -> tuple[list[int], list[int], list[tuple[str, str]]]:
    """Intersect two record sets on (query_id, item_id); unlabeled records are dropped."""
    a_map = {(r.query_id, r.item_id): r.label for r in a_records if r.label is not None}
    b_map = {(r.query_id, r.item_id): r.label for r in b_records if r.label is not None}
    keys = sorted(set(a_map) & set(b_map))
    return [a_map[key] for key in keys], [b_map[key] for key in keys], keys


def agreement_by_query(
    a_records: Sequence[LabelRecord], b_records: Sequence[LabelRecord]
) -> tuple[AgreementReport, dict[str, float]]:
    """Overall kappa plus per-query kappa values (for external histogram plotting)."""
    a, b, keys = align_records(a_records, b_records)
    if not keys:
        raise ValueError("no overlapping labeled pairs between the two record sets")
    overall = cohens_kappa(a, b)
    per_query: dict[str, float] = {}
    by_query: dict[str, tuple[list[int], list[int]]] = {}
    for (query_id, _), x, y in zip(keys, a, b):
        by_query.setdefault(query_id, ([], []))
        by_query[query_id][0].append(x)
        by_query[query_id][1].append(y)
    for query_id, (xs, ys) in sorted(by_query.items()):
        per_query[query_id] = cohens_kappa(xs, ys).kappa
    return overall, per_query
