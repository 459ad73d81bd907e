"""Command-line entry points: recommend, benchmark, ablate, curate, build-index, serve."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .config import ConfigError, RunConfig, load_config
from .corpus import load_dataset, save_qrels, validate
from .curation import agreement_by_query, build_qrels, read_label_log
from .embedding import EmbeddingCache, build_index, make_encoder, save_index
from .evaluation import MetricConfig, ablation_topn, run_benchmark
from .recommender import RecommendResponse
from .reformulate import QRMethod, Reformulator, make_llm
from .service import build_recommender

logger = logging.getLogger(__name__)

METHOD_CHOICES = [m.value for m in QRMethod]


def common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                      help="YAML run configuration.")(fn)
    fn = click.option("--dataset", "dataset_dir", type=click.Path(exists=True), default=None,
                      help="Dataset directory (corpus.jsonl / queries.jsonl / qrels.jsonl).")(fn)
    fn = click.option("--n", type=int, default=None, help="Top-n passages averaged per item.")(fn)
    fn = click.option("--encoder", "encoder_model", default=None, help="Encoder model name to use.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Seed for the deterministic encoder.")(fn)
    return fn


def resolve_config(config_path, **overrides) -> RunConfig:
    try:
        config = load_config(config_path, overrides)
        if overrides.get("seed") is not None:
            for encoder in config.encoders:
                encoder.seed = overrides["seed"]
        config.validate()
        return config
    except (ConfigError, OSError) as exc:
        raise click.ClickException(str(exc))


def _load_dataset(config: RunConfig):
    if config.dataset_dir is None:
        raise click.ClickException("no dataset configured; pass --dataset or set dataset.dir in the config")
    dataset = load_dataset(config.dataset_dir, name=config.dataset_name)
    report = validate(dataset)
    if not report.ok:
        raise click.ClickException("dataset failed validation:\n  " + "\n  ".join(report.errors))
    return dataset


def _reformulator(config: RunConfig) -> Reformulator:
    llm = make_llm(config.llm) if config.llm is not None else None
    return Reformulator(
        llm=llm,
        k=config.eqr_k,
        on_parse_failure=config.on_parse_failure,
        replay_log=config.replay_log,
    )


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Natural-language recommendation engine and benchmark harness."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _print_response(response: RecommendResponse) -> None:
    click.echo(f"query:  {response.query}")
    click.echo(f"method: {response.method}")
    if response.reformulation["segments"]:
        click.echo("reformulation segments:")
        for segment in response.reformulation["segments"]:
            click.echo(f"  - {segment}")
    else:
        click.echo("reformulation: (none)")
    click.echo("results:")
    for item in response.results:
        click.echo(f"  {item.rank:>3}. {item.name}  [{item.item_id}]  score={item.score:.4f}")
        for passage in item.passages[:3]:
            snippet = passage.text if len(passage.text) <= 100 else passage.text[:97] + "..."
            click.echo(f"        {passage.score:.4f}  {snippet}")


@main.command()
@common_options
@click.option("--query", "query_text", required=True, help="Natural-language query.")
@click.option("--method", type=click.Choice(METHOD_CHOICES), default="noqr")
@click.option("--top-k", type=int, default=None)
@click.option("--k", "eqr_k", type=int, default=None, help="Subtopic count for the eqr method.")
@click.option("--json", "as_json", is_flag=True, help="Print the JSON response instead of text.")
@click.option("--out", "out_file", type=click.Path(), default=None, help="Also write the JSON response here.")
def recommend(config_path, dataset_dir, n, encoder_model, seed, query_text, method, top_k, eqr_k, as_json, out_file):
    """Rank items for one query and show the evidence."""
    config = resolve_config(config_path, dataset_dir=dataset_dir, n=n, encoder_model=encoder_model,
                            seed=seed, top_k=top_k, eqr_k=eqr_k)
    dataset = _load_dataset(config)
    try:
        recommender = build_recommender(config, dataset)
        response = recommender.recommend(query_text, method, top_k=config.top_k)
    except Exception as exc:
        raise click.ClickException(f"recommendation failed: {exc}")
    if as_json:
        click.echo(json.dumps(response.to_dict(), indent=2, ensure_ascii=False))
    else:
        _print_response(response)
    if out_file:
        Path(out_file).parent.mkdir(parents=True, exist_ok=True)
        Path(out_file).write_text(
            json.dumps(response.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )


@main.command()
@common_options
@click.option("--method", "methods", type=click.Choice(METHOD_CHOICES), multiple=True,
              help="Methods to benchmark (default: all four).")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory for runs and reports.")
def benchmark(config_path, dataset_dir, n, encoder_model, seed, methods, out_dir):
    """Run the method-comparison benchmark and emit JSON + Markdown reports."""
    config = resolve_config(config_path, dataset_dir=dataset_dir, n=n, encoder_model=encoder_model,
                            seed=seed, out_dir=out_dir, methods=list(methods) or None)
    dataset = _load_dataset(config)
    try:
        reports = run_benchmark(
            dataset,
            config.methods,
            config.encoders,
            reformulator=_reformulator(config),
            n=config.n,
            metric_config=MetricConfig(cutoffs=tuple(config.cutoffs)),
            out_dir=config.out_dir,
            cache_dir=config.cache_dir,
        )
    except Exception as exc:
        raise click.ClickException(f"benchmark failed: {exc}")
    for report in reports:
        macro = "  ".join(f"{key}={value:.3f}" for key, value in report.macro.items())
        click.echo(f"{report.encoder_fingerprint}  {report.method:<10} {macro}")
        if report.failed_queries:
            click.echo(f"  warning: {len(report.failed_queries)} failed queries excluded", err=True)
    click.echo(f"reports written to {Path(config.out_dir) / 'reports'}")


@main.command()
@common_options
@click.option("--method", type=click.Choice(METHOD_CHOICES), default="eqr")
@click.option("--n-values", default="1,5,10,50", help="Comma-separated top-n values to sweep.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
def ablate(config_path, dataset_dir, n, encoder_model, seed, method, n_values, out_dir):
    """Sweep the top-n aggregation parameter for one method."""
    config = resolve_config(config_path, dataset_dir=dataset_dir, n=n, encoder_model=encoder_model,
                            seed=seed, out_dir=out_dir)
    dataset = _load_dataset(config)
    try:
        values = [int(part) for part in n_values.split(",") if part.strip()]
        report = ablation_topn(
            dataset,
            method,
            config.encoder,
            values,
            reformulator=_reformulator(config),
            metric_config=MetricConfig(cutoffs=tuple(config.cutoffs)),
            out_dir=config.out_dir,
            cache_dir=config.cache_dir,
        )
    except Exception as exc:
        raise click.ClickException(f"ablation failed: {exc}")
    for n_value in report.n_values:
        macro = "  ".join(f"{key}={value:.3f}" for key, value in report.per_n[n_value].items())
        click.echo(f"n={n_value:<4} {macro}")


@main.command()
@common_options
@click.option("--method", type=click.Choice(METHOD_CHOICES), default=None,
              help="Accepted for flag uniformity; curation does not reformulate.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--compare", "human_labels", type=click.Path(exists=True), default=None,
              help="Human label log to compute agreement against.")
def curate(config_path, dataset_dir, n, encoder_model, seed, method, out_dir, human_labels):
    """Label every query-item pair with the configured LLM and build qrels."""
    config = resolve_config(config_path, dataset_dir=dataset_dir, n=n, encoder_model=encoder_model,
                            seed=seed, out_dir=out_dir)
    if config.llm is None:
        raise click.ClickException("curation requires an llm section in the config")
    dataset = _load_dataset(config)
    out = Path(config.out_dir) / "curation"
    out.mkdir(parents=True, exist_ok=True)
    try:
        llm = make_llm(config.llm)
        qrels, records = build_qrels(
            dataset.queries, dataset.items, llm,
            log_path=out / "labels.jsonl", char_budget=config.char_budget,
        )
    except Exception as exc:
        raise click.ClickException(f"curation failed: {exc}")
    save_qrels(qrels, out / "qrels.jsonl")
    positives = sum(len(ids) for ids in qrels.values())
    unlabeled = sum(1 for record in records if record.label is None)
    click.echo(f"labeled {len(records)} pairs: {positives} positive, {unlabeled} unlabeled")
    click.echo(f"qrels written to {out / 'qrels.jsonl'}")
    if human_labels:
        overall, per_query = agreement_by_query(records, read_label_log(human_labels))
        agreement_path = out / "agreement.json"
        agreement_path.write_text(
            json.dumps({"overall": overall.to_dict(), "per_query": per_query}, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        click.echo(f"cohen_kappa={overall.kappa:.4f} over {overall.n_pairs} aligned pairs")


@main.command("build-index")
@common_options
@click.option("--method", type=click.Choice(METHOD_CHOICES), default=None,
              help="Accepted for flag uniformity; indexing is method-independent.")
@click.option("--out", "out_file", type=click.Path(), default=None, help="Index output path (.npz).")
def build_index_cmd(config_path, dataset_dir, n, encoder_model, seed, method, out_file):
    """Embed the corpus and save the passage index."""
    config = resolve_config(config_path, dataset_dir=dataset_dir, n=n, encoder_model=encoder_model, seed=seed)
    dataset = _load_dataset(config)
    try:
        encoder = make_encoder(config.encoder)
        cache = EmbeddingCache(config.cache_dir) if config.cache_dir else None
        index = build_index(dataset.items, encoder, cache)
    except Exception as exc:
        raise click.ClickException(f"index build failed: {exc}")
    target = Path(out_file) if out_file else Path(config.out_dir) / "index" / "passages.npz"
    target.parent.mkdir(parents=True, exist_ok=True)
    save_index(index, target)
    click.echo(f"indexed {len(index)} passages (dim={index.dim}, fingerprint={index.fingerprint}) -> {target}")


@main.command()
@common_options
@click.option("--method", type=click.Choice(METHOD_CHOICES), default=None,
              help="Accepted for flag uniformity; requests choose their own method.")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8080)
def serve(config_path, dataset_dir, n, encoder_model, seed, method, host, port):
    """Start the HTTP recommendation service (embeds the corpus at startup)."""
    import uvicorn

    from .service import create_app

    config = resolve_config(config_path, dataset_dir=dataset_dir, n=n, encoder_model=encoder_model, seed=seed)
    try:
        app = create_app(config)
    except Exception as exc:
        raise click.ClickException(f"service startup failed: {exc}")
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
