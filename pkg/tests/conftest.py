"""Shared test fixtures: synthetic datasets, stub LLM fixtures, and builders."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from nlrec.corpus import Dataset, Item, Passage, Query, save_dataset
from nlrec.embedding import EmbeddingProviderConfig, make_encoder
from nlrec.reformulate import Reformulator, ScriptedStubLLM

# Stub LLM raw outputs. Subtopic titles and the keyword list follow the
# fixture contract exercised by the parser tests; elaboration bodies carry the
# vocabulary the planted corpora are built from.
EQR_RAW_ADVENTURE = (
    "Mountain Adventures - Alpine towns with glacier hikes, climbing routes and ski lifts.\n"
    "Water Sports - Coastal spots with surf breaks, dive schools and sailing marinas.\n"
    "Desert Safaris - Dune bashing, camel treks and canyon camps reached from desert hubs.\n"
)
Q2E_RAW_ADVENTURE = "extreme sports; hiking trails; rock climbing; water sports; skydiving"
Q2D_RAW_ADVENTURE = (
    "A town ringed by alpine peaks where visitors line up for glacier hikes, "
    "climbing routes, canyon swings and jet boat rides."
)


def make_item(item_id: str, texts: list[str], name: str | None = None) -> Item:
    passages = tuple(
        Passage(item_id=item_id, passage_id=f"p{i}", text=text) for i, text in enumerate(texts)
    )
    return Item(item_id=item_id, name=name or item_id.title(), passages=passages)


def random_dataset(seed: int, max_items: int = 20, max_passages: int = 10) -> Dataset:
    """Random synthetic dataset with overlapping token vocabularies."""
    rng = random.Random(seed)
    vocab = [f"tok{i}" for i in range(40)]
    items = []
    for i in range(rng.randint(2, max_items)):
        texts = [
            " ".join(rng.choices(vocab, k=rng.randint(2, 8)))
            for _ in range(rng.randint(1, max_passages))
        ]
        items.append(make_item(f"item{i:02d}", texts))
    queries = [
        Query(query_id=f"q{i}", text=" ".join(rng.choices(vocab, k=rng.randint(2, 6))))
        for i in range(rng.randint(1, 4))
    ]
    qrels = {
        q.query_id: {items[j].item_id for j in rng.sample(range(len(items)), k=min(2, len(items)))}
        for q in queries
    }
    return Dataset(name=f"rand{seed}", items=items, queries=queries, qrels=qrels)


def planted_dataset(n_relevant: int = 4, n_irrelevant: int = 12) -> tuple[Dataset, dict]:
    """Corpus where relevant items share vocabulary only with the stubbed EQR elaborations.

    The query's own tokens appear in every irrelevant item, so ranking the raw
    query puts irrelevant items on top while the elaborated query surfaces the
    relevant ones.
    """
    elaborations = [
        "glacier hikes climbing routes ski lifts alpine peaks mountain huts",
        "surf breaks dive schools sailing marinas reef snorkeling coast",
        "dune bashing camel treks canyon camps desert oasis stargazing",
    ]
    query = Query(query_id="q_adventure", text="adventure seekers getaway")
    items = []
    relevant_ids = set()
    for i in range(n_relevant):
        words = elaborations[i % len(elaborations)].split()
        texts = [" ".join(words[j:] + words[:j]) for j in (0, 2, 4)]
        item = make_item(f"rel{i:02d}", texts)
        items.append(item)
        relevant_ids.add(item.item_id)
    for i in range(n_irrelevant):
        # Each irrelevant item leans on the query's own tokens plus unique noise,
        # so the raw query ranks them above the relevant items.
        texts = [
            f"adventure seekers brochure filler{i} pamphlet{i}",
            f"adventure seekers column{i} listing{i}",
        ]
        items.append(make_item(f"irr{i:02d}", texts))
    eqr_raw = "\n".join(
        f"Topic {chr(65 + i)} - {body}" for i, body in enumerate(elaborations)
    )
    stub_fixtures = {"eqr": {query.query_id: eqr_raw, "default": eqr_raw}}
    dataset = Dataset(
        name="planted",
        items=items,
        queries=[query],
        qrels={query.query_id: relevant_ids},
    )
    return dataset, stub_fixtures


@pytest.fixture
def det_encoder():
    return make_encoder(EmbeddingProviderConfig(model_name="det-hash", dim=64))


@pytest.fixture
def adventure_stub() -> ScriptedStubLLM:
    return ScriptedStubLLM(
        {
            "q2e": {"default": Q2E_RAW_ADVENTURE},
            "query2doc": {"default": Q2D_RAW_ADVENTURE},
            "eqr": {"default": EQR_RAW_ADVENTURE},
        }
    )


@pytest.fixture
def stub_reformulator(adventure_stub) -> Reformulator:
    return Reformulator(llm=adventure_stub, k=3)


@pytest.fixture
def small_dataset() -> Dataset:
    items = [
        make_item("paris", ["louvre museum art", "seine river walks", "cafe terrace croissant"]),
        make_item("rome", ["colosseum ancient ruins", "vatican museum art"]),
        make_item("oslo", ["fjord cruise winter", "ski jump museum"]),
    ]
    queries = [
        Query(query_id="q_art", text="museum art"),
        Query(query_id="q_snow", text="ski winter fjord"),
    ]
    qrels = {"q_art": {"paris", "rome"}, "q_snow": {"oslo"}}
    return Dataset(name="small", items=items, queries=queries, qrels=qrels)


@pytest.fixture
def dataset_dir(tmp_path, small_dataset) -> Path:
    target = tmp_path / "small"
    save_dataset(small_dataset, target)
    return target


def write_stub_fixtures(path: Path, fixtures: dict) -> Path:
    path.write_text(json.dumps(fixtures, indent=2), encoding="utf-8")
    return path


def write_config(
    path: Path,
    dataset_dir: Path,
    *,
    fixtures_path: Path | None = None,
    dim: int = 64,
    n: int = 50,
    extra: dict | None = None,
) -> Path:
    config = {
        "dataset": {"dir": str(dataset_dir)},
        "encoder": {"kind": "deterministic-test", "model_name": "det-hash", "dim": dim},
        "n": n,
        "cutoffs": [10, 30],
        "out_dir": str(path.parent / "out"),
    }
    if fixtures_path is not None:
        config["llm"] = {"kind": "scripted-stub", "fixtures": str(fixtures_path), "model_name": "stub"}
    if extra:
        config.update(extra)
    path.write_text(json.dumps(config), encoding="utf-8")
    return path
