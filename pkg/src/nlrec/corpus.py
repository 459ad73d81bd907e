"""Dataset model and line-oriented JSON I/O for corpora, queries, and qrels.

On-disk layout of a dataset directory:
    corpus.jsonl   {"item_id", "item_name", "passage_id", "text"} per line
    queries.jsonl  {"query_id", "text"} per line
    qrels.jsonl    {"query_id", "item_id", "label"} per line, label in {0, 1}
    manifest.json  counts of queries/items/passages/labels, checked at load time
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class CorpusError(ValueError):
    """Malformed or internally inconsistent dataset file."""


@dataclass(frozen=True)
class Passage:
    item_id: str
    passage_id: str
    text: str


@dataclass(frozen=True)
class Item:
    item_id: str
    name: str
    passages: tuple[Passage, ...]


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str


# query_id -> set of relevant item_ids; absent pairs are non-relevant.
Qrels = dict[str, set[str]]


@dataclass
class Dataset:
    name: str
    items: list[Item]
    queries: list[Query]
    qrels: Qrels

    def __post_init__(self) -> None:
        self._items_by_id = {item.item_id: item for item in self.items}
        self._queries_by_id = {q.query_id: q for q in self.queries}

    def item(self, item_id: str) -> Item:
        return self._items_by_id[item_id]

    def query(self, query_id: str) -> Query:
        return self._queries_by_id[query_id]

    def has_item(self, item_id: str) -> bool:
        return item_id in self._items_by_id

    def has_query(self, query_id: str) -> bool:
        return query_id in self._queries_by_id

    def passage_count(self) -> int:
        return sum(len(item.passages) for item in self.items)

    def label_count(self) -> int:
        return sum(len(ids) for ids in self.qrels.values())


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _read_records(path: str | Path) -> list[tuple[int, dict]]:
    """Parse a JSONL file into (line_number, record) pairs, skipping blank lines."""
    records = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            records.append((lineno, record))
    return records


def _require(record: dict, key: str, path: str | Path, lineno: int) -> str:
    if key not in record:
        raise CorpusError(f"{path}:{lineno}: missing field '{key}'")
    return record[key]


def load_corpus(path: str | Path) -> list[Item]:
    """Load corpus.jsonl, grouping passage records by item_id in file order."""
    order: list[str] = []
    names: dict[str, str] = {}
    passages: dict[str, list[Passage]] = {}
    seen_keys: set[tuple[str, str]] = set()
    for lineno, record in _read_records(path):
        item_id = str(_require(record, "item_id", path, lineno))
        name = str(_require(record, "item_name", path, lineno))
        passage_id = str(_require(record, "passage_id", path, lineno))
        text = str(_require(record, "text", path, lineno))
        if not text.strip():
            raise CorpusError(f"{path}:{lineno}: empty passage text for ({item_id}, {passage_id})")
        key = (item_id, passage_id)
        if key in seen_keys:
            raise CorpusError(f"{path}:{lineno}: duplicate passage key ({item_id}, {passage_id})")
        seen_keys.add(key)
        if item_id not in passages:
            order.append(item_id)
            names[item_id] = name
            passages[item_id] = []
        passages[item_id].append(Passage(item_id=item_id, passage_id=passage_id, text=text))
    return [
        Item(item_id=item_id, name=names[item_id], passages=tuple(passages[item_id]))
        for item_id in order
    ]


def save_corpus(items: list[Item], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for item in items:
            for passage in item.passages:
                record = {
                    "item_id": item.item_id,
                    "item_name": item.name,
                    "passage_id": passage.passage_id,
                    "text": passage.text,
                }
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_queries(path: str | Path) -> list[Query]:
    queries = []
    seen: set[str] = set()
    for lineno, record in _read_records(path):
        query_id = str(_require(record, "query_id", path, lineno))
        text = str(_require(record, "text", path, lineno))
        if not text.strip():
            raise CorpusError(f"{path}:{lineno}: empty query text for {query_id}")
        if query_id in seen:
            raise CorpusError(f"{path}:{lineno}: duplicate query_id {query_id}")
        seen.add(query_id)
        queries.append(Query(query_id=query_id, text=text))
    return queries


def save_queries(queries: list[Query], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for query in queries:
            handle.write(json.dumps({"query_id": query.query_id, "text": query.text}, ensure_ascii=False) + "\n")


def load_qrels(path: str | Path) -> Qrels:
    """Load qrels.jsonl; only label=1 pairs are kept, label=0 lines are accepted and dropped."""
    qrels: Qrels = {}
    for lineno, record in _read_records(path):
        query_id = str(_require(record, "query_id", path, lineno))
        item_id = str(_require(record, "item_id", path, lineno))
        label = _require(record, "label", path, lineno)
        if label not in (0, 1):
            raise CorpusError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
        if label == 1:
            qrels.setdefault(query_id, set()).add(item_id)
    return qrels


def save_qrels(qrels: Qrels, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for query_id in sorted(qrels):
            for item_id in sorted(qrels[query_id]):
                handle.write(json.dumps({"query_id": query_id, "item_id": item_id, "label": 1}) + "\n")


def validate(dataset: Dataset) -> ValidationReport:
    """Cross-reference check; problems become report entries, never exceptions."""
    report = ValidationReport()
    seen_items: set[str] = set()
    for item in dataset.items:
        if item.item_id in seen_items:
            report.errors.append(f"duplicate item_id: {item.item_id}")
        seen_items.add(item.item_id)
        if not item.passages:
            report.errors.append(f"item {item.item_id} has no passages")
        for passage in item.passages:
            if passage.item_id != item.item_id:
                report.errors.append(
                    f"passage {passage.passage_id} carries item_id {passage.item_id}, expected {item.item_id}"
                )
            if not passage.text.strip():
                report.errors.append(f"empty text in passage ({item.item_id}, {passage.passage_id})")
    seen_queries: set[str] = set()
    for query in dataset.queries:
        if query.query_id in seen_queries:
            report.errors.append(f"duplicate query_id: {query.query_id}")
        seen_queries.add(query.query_id)
    for query_id, item_ids in dataset.qrels.items():
        if query_id not in seen_queries:
            report.errors.append(f"qrels reference unknown query_id: {query_id}")
        for item_id in sorted(item_ids):
            if item_id not in seen_items:
                report.errors.append(f"qrels reference unknown item_id: {item_id} (query {query_id})")
    return report


def write_manifest(dataset: Dataset, path: str | Path) -> None:
    manifest = {
        "name": dataset.name,
        "queries": len(dataset.queries),
        "items": len(dataset.items),
        "passages": dataset.passage_count(),
        "labels": dataset.label_count(),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def check_manifest(dataset: Dataset, path: str | Path) -> None:
    """Compare loaded counts against manifest.json; mismatch raises CorpusError."""
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    actual = {
        "queries": len(dataset.queries),
        "items": len(dataset.items),
        "passages": dataset.passage_count(),
        "labels": dataset.label_count(),
    }
    for field_name, count in actual.items():
        expected = manifest.get(field_name)
        if expected is not None and expected != count:
            raise CorpusError(f"manifest mismatch for {field_name}: manifest says {expected}, loaded {count}")


def load_dataset(directory: str | Path, name: str | None = None, verify_manifest: bool = True) -> Dataset:
    """Assemble a Dataset from corpus.jsonl / queries.jsonl / qrels.jsonl in `directory`."""
    directory = Path(directory)
    items = load_corpus(directory / "corpus.jsonl")
    queries = load_queries(directory / "queries.jsonl")
    qrels_path = directory / "qrels.jsonl"
    qrels = load_qrels(qrels_path) if qrels_path.exists() else {}
    dataset = Dataset(name=name or directory.name, items=items, queries=queries, qrels=qrels)
    manifest_path = directory / "manifest.json"
    if verify_manifest and manifest_path.exists():
        check_manifest(dataset, manifest_path)
    return dataset


def save_dataset(dataset: Dataset, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_corpus(dataset.items, directory / "corpus.jsonl")
    save_queries(dataset.queries, directory / "queries.jsonl")
    save_qrels(dataset.qrels, directory / "qrels.jsonl")
    write_manifest(dataset, directory / "manifest.json")
