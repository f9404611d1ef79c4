"""Command-line interface: regkg ingest|extract|normalize|index|query|subgraph|stats|eval|serve."""
from __future__ import annotations

import sys
from pathlib import Path

import click

from .embedding import DEFAULT_DIM
from .errors import RegkgError
from .evaluation import DEFAULT_THETAS, DeterministicJudge, EvalConfig, ExternalJudge, run_eval
from .kgstore import build_section_graph, graph_stats, k_hop_subgraph
from .llm import DiskCachedClient, HttpCompletionClient
from .pipeline import (
    BuildConfig,
    LoadedStore,
    QueryOptions,
    apply_aliases,
    load_config_file,
    load_job,
    run_build_pipeline,
    run_query_pipeline,
)
from .store import RegStore
from .util import canonical_json


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _config_section(config_path: str | None, section: str) -> dict:
    if not config_path:
        return {}
    data = load_config_file(config_path)
    value = data.get(section, {})
    return value if isinstance(value, dict) else {}


@click.group()
def main() -> None:
    """Regulatory knowledge-graph builder and query engine."""


@main.command()
@click.option("--corpus", "corpus_path", default=None, type=click.Path(exists=True))
@click.option("--out", "store_dir", default=None, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--ingest-time", default=None, help="Override the manifest timestamp.")
def ingest(corpus_path: str | None, store_dir: str | None, config_path: str | None,
           ingest_time: str | None) -> None:
    """Parse an interchange corpus into a section store."""
    cfg = _config_section(config_path, "corpus")
    corpus_path = corpus_path or cfg.get("path")
    store_dir = store_dir or cfg.get("store")
    if not corpus_path or not store_dir:
        _fail(RegkgError("--corpus and --out are required (directly or via --config)"))
    try:
        job = run_build_pipeline(
            BuildConfig(corpus_path=corpus_path, store_dir=store_dir, ingest_timestamp=ingest_time),
            only="ingest",
        )
    except RegkgError as exc:
        _fail(exc)
    click.echo(canonical_json(job.stage("ingest").counters))


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--extractors", default="structural,reference,timeframe", show_default=True)
@click.option("--corpus", "corpus_path", default=None, type=click.Path(exists=True),
              help="Corpus path (only needed if ingest has not run yet).")
def extract(store_dir: str, extractors: str, corpus_path: str | None) -> None:
    """Run triplet extraction over every stored section."""
    names = tuple(e.strip() for e in extractors.split(",") if e.strip())
    try:
        job = run_build_pipeline(
            BuildConfig(corpus_path=corpus_path or "", store_dir=store_dir, extractors=names),
            only="extract",
        )
    except RegkgError as exc:
        _fail(exc)
    click.echo(canonical_json(job.stage("extract").counters))


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--aliases", "aliases_path", default=None, type=click.Path(exists=True))
def normalize(store_dir: str, aliases_path: str | None) -> None:
    """Canonicalize, dedupe, and merge extracted triplets into the graph."""
    try:
        job = load_job(store_dir)
        if job is not None and job.stage("normalize").status == "done" and aliases_path:
            delta = apply_aliases(store_dir, aliases_path)
            click.echo(canonical_json({"merged": len(delta["merged"]), "added": len(delta["added"])}))
            return
        job = run_build_pipeline(
            BuildConfig(corpus_path="", store_dir=store_dir, aliases_path=aliases_path),
            only="normalize",
        )
    except RegkgError as exc:
        _fail(exc)
    click.echo(canonical_json(job.stage("normalize").counters))


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--backend", default="baseline", type=click.Choice(["baseline", "external"]))
@click.option("--dim", default=DEFAULT_DIM, show_default=True)
def index(store_dir: str, backend: str, dim: int) -> None:
    """Embed every triplet and build the exact-kNN snapshot."""
    try:
        job = run_build_pipeline(
            BuildConfig(corpus_path="", store_dir=store_dir, backend_name=backend, dim=dim),
            only="index",
        )
    except RegkgError as exc:
        _fail(exc)
    click.echo(canonical_json(job.stage("index").counters))


@main.command()
@click.argument("question")
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--k", default=5, show_default=True)
@click.option("--mode", default="extractive", type=click.Choice(["extractive", "generated"]))
@click.option("--hops", default=1, show_default=True)
def query(question: str, store_dir: str, k: int, mode: str, hops: int) -> None:
    """Answer a question from the store, with citations."""
    try:
        loaded = LoadedStore.open(store_dir)
        options = QueryOptions(k=k, mode=mode, hops=hops)
        if mode == "generated":
            options.generator_client = DiskCachedClient(
                HttpCompletionClient(), Path(store_dir) / "llm-cache"
            )
        answer, subgraph = run_query_pipeline(question, loaded, options)
    except RegkgError as exc:
        _fail(exc)
    click.echo(
        canonical_json(
            {
                "answer": answer.text,
                "mode": answer.mode,
                "citations": answer.citations,
                "subgraph_nodes": [n.id for n in subgraph.nodes],
            }
        )
    )


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--seed", "seeds", multiple=True, required=True, help="Triplet key s|p|o.")
@click.option("--hops", default=1, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path())
def subgraph(store_dir: str, seeds: tuple[str, ...], hops: int, out_path: str | None) -> None:
    """Extract the k-hop neighborhood of seed triplets."""
    try:
        store = RegStore.load(store_dir)
        sub = k_hop_subgraph(store.graph, list(seeds), hops, sections=store.sections_by_id)
    except RegkgError as exc:
        _fail(exc)
    payload = canonical_json(
        {
            "nodes": [{"id": n.id, "kind": n.kind} for n in sub.nodes],
            "edges": [t.key_str for t in sub.edges],
            "seed_keys": sub.seed_keys,
            "hop_limit": sub.hop_limit,
            "truncated": sub.truncated,
        }
    )
    if out_path:
        Path(out_path).write_text(payload + "\n", encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(payload)


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--mode", default="with", type=click.Choice(["with", "without"]), show_default=True)
@click.option("--path-sample", default=None, type=int)
@click.option("--seed", default=0, show_default=True)
def stats(store_dir: str, mode: str, path_sample: int | None, seed: int) -> None:
    """Connectivity statistics of the section graph."""
    try:
        store = RegStore.load(store_dir)
        graph_mode = "with_triplets" if mode == "with" else "text_only"
        sg = build_section_graph(store.graph, graph_mode, store.sections_by_id)
        result = graph_stats(sg, path_sample, seed)
    except RegkgError as exc:
        _fail(exc)
    click.echo(canonical_json(result.as_dict()))


@main.command("eval")
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--sample-k", default=2, show_default=True)
@click.option("--seed", default=1, show_default=True)
@click.option("--thetas", default="0.5,0.6,0.75", show_default=True)
@click.option("--judge", default="deterministic", type=click.Choice(["deterministic", "external"]))
@click.option("--k", default=5, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path())
def eval_cmd(store_dir: str, sample_k: int, seed: int, thetas: str, judge: str, k: int,
             out_path: str | None) -> None:
    """Run the evaluation harness and emit the report."""
    try:
        loaded = LoadedStore.open(store_dir)
        theta_values = tuple(float(t) for t in thetas.split(",") if t.strip()) or DEFAULT_THETAS
        judge_obj = DeterministicJudge()
        if judge == "external":
            judge_obj = ExternalJudge(
                DiskCachedClient(HttpCompletionClient(), Path(store_dir) / "llm-cache")
            )
        config = EvalConfig(
            store=loaded.store,
            backend=loaded.backend,
            sample_k=sample_k,
            seed=seed,
            thetas=theta_values,
            retrieval_k=k,
            judge=judge_obj,
            snapshot=loaded.snapshot,
        )
        report = run_eval(config)
    except RegkgError as exc:
        _fail(exc)
    payload = report.to_json()
    if out_path:
        Path(out_path).write_text(payload + "\n", encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(payload)


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8899, show_default=True)
def serve(store_dir: str, host: str, port: int) -> None:
    """Serve the HTTP API over a built store."""
    from .service import serve as run_service

    try:
        run_service(store_dir, host=host, port=port)
    except RegkgError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
