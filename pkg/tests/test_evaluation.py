import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlrec.corpus import Dataset, Query
from nlrec.embedding import EmbeddingProviderConfig
from nlrec.evaluation import (
    MetricConfig,
    ablation_topn,
    evaluate_ranking,
    macro_average,
    ndcg_at_k,
    precision_at_k,
    render_markdown,
    run_benchmark,
)
from nlrec.reformulate import QRMethod, Reformulator, ScriptedStubLLM
from nlrec.retrieval import read_run

from conftest import planted_dataset, random_dataset
from reference import reference_ndcg, reference_precision

ENC = EmbeddingProviderConfig(model_name="det-hash", dim=64)


class TestPrecision:
    def test_all_relevant_top_k(self):
        ranking = [f"i{j}" for j in range(20)]
        assert precision_at_k(ranking, set(ranking[:10]), 10) == 1.0

    def test_empty_relevant_is_zero(self):
        assert precision_at_k(["a", "b"], set(), 5) == 0.0

    def test_hand_computed(self):
        assert precision_at_k(["A", "B", "C", "D"], {"A", "C"}, 4) == pytest.approx(0.5, abs=1e-12)

    def test_short_ranking_keeps_denominator(self):
        assert precision_at_k(["A"], {"A"}, 10) == pytest.approx(0.1, abs=1e-12)


class TestNdcg:
    def test_ideal_ranking_is_one(self):
        assert ndcg_at_k(["A", "B", "C", "D"], {"A", "B"}, 4) == pytest.approx(1.0, abs=1e-12)

    def test_empty_relevant_is_zero(self):
        assert ndcg_at_k(["A", "B"], set(), 10) == 0.0

    def test_hand_computed(self):
        # DCG = 1/log2(2) + 1/log2(4) = 1.5; IDCG = 1 + 1/log2(3).
        value = ndcg_at_k(["A", "B", "C"], {"A", "C"}, 3)
        assert value == pytest.approx(0.9197207891481876, abs=1e-9)
        assert value == pytest.approx(0.9197, abs=1e-4)

    @settings(max_examples=100, deadline=None)
    @given(st.data())
    def test_matches_brute_force_on_random_rankings(self, data):
        size = data.draw(st.integers(min_value=1, max_value=30))
        ranking = [f"i{j}" for j in range(size)]
        random.Random(data.draw(st.integers(0, 10**6))).shuffle(ranking)
        relevant = set(data.draw(st.lists(st.sampled_from(ranking), max_size=size)))
        k = data.draw(st.integers(min_value=1, max_value=35))
        assert ndcg_at_k(ranking, relevant, k) == pytest.approx(
            reference_ndcg(ranking, relevant, k), abs=1e-9
        )
        assert precision_at_k(ranking, relevant, k) == pytest.approx(
            reference_precision(ranking, relevant, k), abs=1e-9
        )

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_swapping_relevant_upward_never_hurts(self, data):
        size = data.draw(st.integers(min_value=3, max_value=20))
        ranking = [f"i{j}" for j in range(size)]
        relevant = set(data.draw(st.lists(st.sampled_from(ranking), min_size=1, max_size=size)))
        hi = data.draw(st.integers(min_value=1, max_value=size - 1))
        lo = data.draw(st.integers(min_value=0, max_value=hi - 1))
        if ranking[hi] not in relevant or ranking[lo] in relevant:
            return
        swapped = list(ranking)
        swapped[lo], swapped[hi] = swapped[hi], swapped[lo]
        for k in (1, 5, 10):
            assert ndcg_at_k(swapped, relevant, k) >= ndcg_at_k(ranking, relevant, k) - 1e-12
            assert precision_at_k(swapped, relevant, k) >= precision_at_k(ranking, relevant, k) - 1e-12

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_values_always_in_unit_interval(self, data):
        size = data.draw(st.integers(min_value=1, max_value=15))
        ranking = [f"i{j}" for j in range(size)]
        relevant = set(data.draw(st.lists(st.sampled_from(ranking), max_size=size)))
        k = data.draw(st.integers(min_value=1, max_value=20))
        assert 0.0 <= ndcg_at_k(ranking, relevant, k) <= 1.0
        assert 0.0 <= precision_at_k(ranking, relevant, k) <= 1.0


class TestMetricConfig:
    def test_defaults(self):
        config = MetricConfig()
        assert config.cutoffs == (10, 30)

    def test_unsorted_cutoffs_rejected(self):
        with pytest.raises(ValueError):
            MetricConfig(cutoffs=(30, 10))

    def test_unknown_metric_rejected(self):
        with pytest.raises(ValueError):
            MetricConfig(metrics=("map",))

    def test_evaluate_ranking_keys(self):
        values = evaluate_ranking(["A", "B"], {"A"}, MetricConfig(cutoffs=(1, 2)))
        assert set(values) == {"ndcg@1", "ndcg@2", "precision@1", "precision@2"}


def test_macro_average_is_mean_of_per_query():
    per_query = {
        "q1": {"ndcg@10": 0.2, "precision@10": 0.4},
        "q2": {"ndcg@10": 0.8, "precision@10": 0.6},
    }
    macro = macro_average(per_query)
    assert macro["ndcg@10"] == pytest.approx(0.5, abs=1e-12)
    assert macro["precision@10"] == pytest.approx(0.5, abs=1e-12)


def make_reformulator(stub_fixtures) -> Reformulator:
    return Reformulator(llm=ScriptedStubLLM(stub_fixtures), k=3)


class TestRunBenchmark:
    def test_two_methods_two_reports_and_rerun_identical(self, tmp_path):
        dataset, fixtures = planted_dataset(n_relevant=3, n_irrelevant=7)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            reports = run_benchmark(
                dataset,
                [QRMethod.NO_QR, QRMethod.EQR],
                [ENC],
                reformulator=make_reformulator(fixtures),
                n=5,
                out_dir=out,
                cache_dir=out / "cache",
            )
            assert [r.method for r in reports] == ["noqr", "eqr"]
        for name in ("reports/planted.json", "reports/planted.md"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
        run_files_a = sorted(p.relative_to(out_a) for p in (out_a / "runs").rglob("*.jsonl"))
        run_files_b = sorted(p.relative_to(out_b) for p in (out_b / "runs").rglob("*.jsonl"))
        assert run_files_a == run_files_b
        for rel in run_files_a:
            assert (out_a / rel).read_bytes() == (out_b / rel).read_bytes()

    def test_planted_eqr_beats_noqr(self, tmp_path):
        dataset, fixtures = planted_dataset()
        reports = run_benchmark(
            dataset,
            [QRMethod.NO_QR, QRMethod.EQR],
            [ENC],
            reformulator=make_reformulator(fixtures),
            n=5,
            out_dir=tmp_path,
        )
        by_method = {r.method: r for r in reports}
        assert by_method["eqr"].macro["ndcg@10"] == pytest.approx(1.0, abs=1e-12)
        assert by_method["eqr"].macro["ndcg@10"] > by_method["noqr"].macro["ndcg@10"]

    def test_failing_query_recorded_and_excluded(self, tmp_path, caplog):
        dataset, fixtures = planted_dataset(n_relevant=2, n_irrelevant=3)
        dataset.queries.append(Query(query_id="q_unfixtured", text="no fixture for this"))
        dataset.qrels["q_unfixtured"] = {"rel00"}
        fixtures = {"eqr": {"q_adventure": fixtures["eqr"]["q_adventure"]}}  # drop the default
        reformulator = Reformulator(llm=ScriptedStubLLM(fixtures), k=3, on_parse_failure="error")
        with caplog.at_level("WARNING"):
            reports = run_benchmark(
                dataset, [QRMethod.EQR], [ENC], reformulator=reformulator, n=5, out_dir=tmp_path
            )
        (report,) = reports
        assert report.failed_queries == ("q_unfixtured",)
        assert "q_unfixtured" not in report.per_query
        assert "failed" in caplog.text
        payload = json.loads((tmp_path / "reports/planted.json").read_text())
        assert payload["reports"][0]["failed_queries"] == ["q_unfixtured"]

    def test_empty_relevant_query_flagged_and_zero(self, tmp_path):
        dataset, fixtures = planted_dataset(n_relevant=2, n_irrelevant=3)
        dataset.queries.append(Query(query_id="q_norel", text="adventure seekers getaway"))
        reports = run_benchmark(
            dataset, [QRMethod.NO_QR], [ENC], reformulator=make_reformulator(fixtures), n=5
        )
        (report,) = reports
        assert report.empty_relevant_queries == ("q_norel",)
        assert report.per_query["q_norel"]["ndcg@10"] == 0.0

    def test_macro_matches_persisted_per_query(self, tmp_path):
        dataset, fixtures = planted_dataset(n_relevant=2, n_irrelevant=4)
        run_benchmark(
            dataset, [QRMethod.NO_QR, QRMethod.EQR], [ENC],
            reformulator=make_reformulator(fixtures), n=5, out_dir=tmp_path,
        )
        payload = json.loads((tmp_path / "reports/planted.json").read_text())
        for report in payload["reports"]:
            assert report["macro"] == macro_average(report["per_query"])

    def test_markdown_bolds_best(self):
        dataset, fixtures = planted_dataset(n_relevant=2, n_irrelevant=4)
        reports = run_benchmark(
            dataset, [QRMethod.NO_QR, QRMethod.EQR], [ENC],
            reformulator=make_reformulator(fixtures), n=5,
        )
        markdown = render_markdown(reports, dataset.name)
        assert "| eqr |" in markdown
        assert "**1.000**" in markdown


class TestAblation:
    def test_single_n_matches_benchmark(self, tmp_path):
        dataset, fixtures = planted_dataset(n_relevant=2, n_irrelevant=4)
        ablation = ablation_topn(
            dataset, QRMethod.EQR, ENC, [1],
            reformulator=make_reformulator(fixtures), out_dir=tmp_path / "ab",
        )
        (benchmark,) = run_benchmark(
            dataset, [QRMethod.EQR], [ENC],
            reformulator=make_reformulator(fixtures), n=1,
        )
        assert ablation.per_n[1] == benchmark.macro

    def test_report_file_keyed_by_n(self, tmp_path):
        dataset, fixtures = planted_dataset(n_relevant=2, n_irrelevant=4)
        ablation_topn(
            dataset, QRMethod.EQR, ENC, [1, 5, 10, 50],
            reformulator=make_reformulator(fixtures), out_dir=tmp_path,
        )
        payload = json.loads((tmp_path / "ablation" / "planted_eqr.json").read_text())
        assert sorted(payload["per_n"], key=int) == ["1", "5", "10", "50"]

    def test_recompute_from_persisted_runs_matches(self, tmp_path):
        dataset, fixtures = planted_dataset()
        n_values = [1, 5, 10, 50]
        report = ablation_topn(
            dataset, QRMethod.EQR, ENC, n_values,
            reformulator=make_reformulator(fixtures), out_dir=tmp_path,
        )
        config = MetricConfig()
        for n in n_values:
            per_query = {}
            for query in dataset.queries:
                run_file = tmp_path / "runs" / dataset.name / f"eqr/n{n}" / f"{query.query_id}.jsonl"
                ranking = [e.item_id for e in read_run(run_file).entries]
                per_query[query.query_id] = evaluate_ranking(
                    ranking, dataset.qrels.get(query.query_id, set()), config
                )
            assert macro_average(per_query) == report.per_n[n]

    def test_invalid_n_values_rejected(self):
        dataset, fixtures = planted_dataset(n_relevant=2, n_irrelevant=2)
        with pytest.raises(ValueError):
            ablation_topn(dataset, QRMethod.EQR, ENC, [], reformulator=make_reformulator(fixtures))
