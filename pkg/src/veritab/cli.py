"""Command-line front door: ingest, ask, eval, bench, serve.

Exit codes: 0 success, 1 error, 2 benchmark budget exceeded.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from .errors import VeritabError
from .evaluation import bench as run_bench
from .evaluation import run_eval
from .forge import generate_all_chunks, ingest_table, write_chunks
from .lexicon import load_lexicon
from .service import Engine, ServiceConfig


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
def main():
    """Tabular data to scored, confidence-rated answers."""


@main.command()
@click.option("--table", required=True, type=click.Path(), help="CSV or JSON-Lines table")
@click.option("--lexicon", required=True, type=click.Path(), help="lexicon JSON file")
@click.option("--out", required=True, type=click.Path(), help="chunk JSON-Lines output")
@click.option("--anomaly-threshold", default=2.0, show_default=True)
@click.option("--correlation-threshold", default=0.7, show_default=True)
def ingest(table, lexicon, out, anomaly_threshold, correlation_threshold):
    """Convert a data table into primary/feature/trend chunks."""
    try:
        load_lexicon(lexicon)
        records = ingest_table(table)
        chunks = generate_all_chunks(
            records,
            anomaly_threshold=anomaly_threshold,
            correlation_threshold=correlation_threshold,
        )
        write_chunks(out, chunks)
    except (VeritabError, OSError) as exc:
        _fail(str(exc))
    kinds = {"primary": 0, "feature": 0, "trend": 0}
    for chunk in chunks:
        kinds[chunk.kind] += 1
    click.echo(
        f"wrote {len(chunks)} chunks to {out} "
        f"(primary: {kinds['primary']}, feature: {kinds['feature']}, trend: {kinds['trend']})"
    )


def _engine_for(chunks, lexicon, provider, state_dir, k, delta, token_limit, providers):
    config = ServiceConfig(
        provider=provider, k=k, delta=delta, token_limit=token_limit,
        data_dir=state_dir, providers_path=providers,
    )
    engine = Engine(config)
    engine.ingest_chunks(chunks, lexicon)
    return engine


@main.command()
@click.argument("question")
@click.option("--chunks", required=True, type=click.Path(), help="chunk JSON-Lines file")
@click.option("--lexicon", required=True, type=click.Path())
@click.option("--provider", default="mock-faithful", show_default=True)
@click.option("--thread", default=None, help="continue an existing on-disk thread")
@click.option("--state-dir", default=None, type=click.Path(), help="thread persistence directory")
@click.option("--providers", default=None, type=click.Path(), help="provider registry JSON")
@click.option("--k", default=20, show_default=True)
@click.option("--delta", default=10, show_default=True)
@click.option("--token-limit", default=4096, show_default=True)
def ask(question, chunks, lexicon, provider, thread, state_dir, providers, k, delta, token_limit):
    """Answer one question over a chunk file and print the scored result."""
    try:
        engine = _engine_for(chunks, lexicon, provider, state_dir, k, delta, token_limit, providers)
        payload = engine.ask(thread, question)
    except (VeritabError, OSError, ValueError) as exc:
        _fail(str(exc))
    scores = payload["scores"]
    click.echo(payload["answer"])
    click.echo("")
    flags = " ".join(f"s{i}={scores[f's{i}']}" for i in range(1, 7))
    click.echo(f"{flags} sum={scores['sum']} confidence={scores['confidence']}")
    for item in scores["diagnostics"]:
        click.echo(f"  {item['metric']}: {item['reason']}")
    click.echo(f"intent: {payload['intent']['name']} ({payload['intent']['code']})")
    click.echo(f"relaxation stage: {payload['relaxation_stage']}")
    click.echo(f"thread: {payload['thread_id']}")
    click.echo("sources: " + ", ".join(payload["source_chunk_ids"]))


@main.command(name="eval")
@click.option("--queries", "queries_path", required=True, type=click.Path(),
              help="JSON-Lines of {question, intent_label?}")
@click.option("--chunks", required=True, type=click.Path())
@click.option("--lexicon", required=True, type=click.Path())
@click.option("--provider", default="mock-faithful", show_default=True)
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--csv", "csv_path", default=None, type=click.Path(), help="also write per-query rows as CSV")
@click.option("--providers", default=None, type=click.Path())
@click.option("--k", default=20, show_default=True)
def eval_command(queries_path, chunks, lexicon, provider, report_path, csv_path, providers, k):
    """Score a whole query batch and write an aggregate report."""
    try:
        queries = _read_queries(queries_path)
    except (OSError, ValueError) as exc:
        _fail(str(exc))
    if not queries:
        _fail("query file is empty")
    try:
        engine = _engine_for(chunks, lexicon, provider, None, k, 10, 4096, providers)
        report = run_eval(engine, queries)
    except (VeritabError, ValueError) as exc:
        _fail(str(exc))

    Path(report_path).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if csv_path:
        _write_rows_csv(csv_path, report.rows)

    click.echo(f"queries: {report.queries}  errors: {report.errors}")
    averages = " ".join(
        f"s{i}={report.metric_averages[f's{i}']:.3f}"
        if report.metric_averages[f"s{i}"] is not None else f"s{i}=n/a"
        for i in range(1, 7)
    )
    click.echo(f"average scores: {averages}")
    dist = report.confidence_distribution
    click.echo(
        "confidence: "
        + "  ".join(f"{label}={dist[label]:.3f}" for label in ("High", "Medium", "Low"))
    )
    if report.intent_report:
        click.echo(
            f"intent macro precision/recall: "
            f"{report.intent_report['macro_precision']:.3f}/"
            f"{report.intent_report['macro_recall']:.3f}"
        )
    click.echo(f"report written to {report_path}")


def _read_queries(path: str) -> list[dict]:
    queries = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            if "question" not in row:
                raise ValueError(f"line {i}: missing 'question'")
            queries.append(row)
    return queries


def _write_rows_csv(path: str, rows: list[dict]) -> None:
    fields = ["question", "s1", "s2", "s3", "s4", "s5", "s6", "sum",
              "confidence", "intent", "label", "relaxation_stage", "latency_s", "error"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


@main.command(name="bench")
@click.option("--chunks", "chunk_count", required=True, type=int)
@click.option("--queries", "query_count", default=50, show_default=True, type=int)
@click.option("--k", default=20, show_default=True)
@click.option("--dimension", default=512, show_default=True)
@click.option("--budget-s", default=3.0, show_default=True,
              help="p95 budget; exceeding it exits with code 2")
def bench_command(chunk_count, query_count, k, dimension, budget_s):
    """Measure retrieval + prompt-assembly latency on a synthetic store."""
    if chunk_count < 1 or query_count < 1:
        _fail("--chunks and --queries must be >= 1")
    result = run_bench(chunk_count, query_count, k=k, dimension=dimension)
    click.echo(f"chunks:        {result['chunks']}")
    click.echo(f"queries:       {result['queries']}")
    click.echo(f"store build:   {result['store_build_s']:.3f} s")
    click.echo(f"p50 latency:   {result['p50_s'] * 1000:.1f} ms")
    click.echo(f"p95 latency:   {result['p95_s'] * 1000:.1f} ms")
    click.echo(f"max latency:   {result['max_s'] * 1000:.1f} ms")
    if result["p95_s"] >= budget_s:
        click.echo(f"p95 over budget ({budget_s:.1f} s)", err=True)
        sys.exit(2)


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path())
@click.option("--table", default=None, type=click.Path(), help="ingest this table at boot")
@click.option("--lexicon", default=None, type=click.Path())
@click.option("--chunks", default=None, type=click.Path(), help="ingest pre-forged chunks at boot")
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
def serve(config_path, table, lexicon, chunks, host, port):
    """Run the HTTP service."""
    import uvicorn

    from .api import create_app

    try:
        config = ServiceConfig.from_file(config_path) if config_path else ServiceConfig()
        engine = Engine(config)
        if chunks and lexicon:
            engine.ingest_chunks(chunks, lexicon)
        elif table and lexicon:
            engine.ingest(table, lexicon)
    except (VeritabError, OSError, ValueError, TypeError) as exc:
        _fail(str(exc))
    uvicorn.run(
        create_app(engine),
        host=host or config.listen_host,
        port=port or config.listen_port,
    )


if __name__ == "__main__":
    main()
