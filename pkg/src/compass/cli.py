"""Command-line entry points: ingest, evaluate, ab-eval, serve.

The gate outcome is the exit code so pipelines can use `compass evaluate`
as a pre-execution check: 0 approved, 4 rejected, 5 indeterminate, 2 for
configuration or input errors, 3 for provider/orchestration failures.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import AppConfig, ConfigError, build_provider, load_config
from .evaluation import emit_table, load_cases, records_to_json, run_ab_evaluation
from .explain import emit_report, render_bar_chart, render_radar_chart
from .judge import EvaluationRequest, Judge, load_templates
from .orchestrator import Clearance, OrchestrationFailure, Orchestrator
from .provider import ProviderError, TransportError
from .rag import EmbeddingFailure, KnowledgeBase, load_manifest
from .scoring import PILLAR_ORDER, format_score, is_numeric

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROVIDER = 3
EXIT_REJECTED = 4
EXIT_INDETERMINATE = 5

_CLEARANCE_EXIT = {
    Clearance.APPROVED: EXIT_OK,
    Clearance.REJECTED: EXIT_REJECTED,
    Clearance.INDETERMINATE: EXIT_INDETERMINATE,
}


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config_or_exit(config_path: str | None) -> AppConfig:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))


def _build_components(config: AppConfig, need_index: bool):
    try:
        provider = build_provider(config)
        templates = load_templates(config.paths.template_dir)
    except (ConfigError, FileNotFoundError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    kb = KnowledgeBase(provider)
    if need_index:
        index = config.paths.index
        if index is None or not Path(index).is_file():
            _fail(EXIT_PROVIDER, f"retrieval requested but no index found at {index}")
        kb.load(index)
    judge = Judge(
        provider, templates=templates, knowledge_base=kb, params=config.generation,
        top_k=config.rag.k,
    )
    return provider, kb, judge, templates


@click.group()
@click.option(
    "--config", "-c", "config_path", default=None, metavar="PATH",
    help="TOML config file (default: $COMPASS_CONFIG or ./compass.toml).",
)
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Governance gate: judge proposed AI actions across four pillars."""
    ctx.obj = config_path


@main.command()
@click.argument("manifest", required=False, type=click.Path())
@click.pass_obj
def ingest(config_path: str | None, manifest: str | None) -> None:
    """Chunk and embed the corpus documents listed in MANIFEST."""
    config = _load_config_or_exit(config_path)
    manifest_path = Path(manifest) if manifest else config.paths.corpus_manifest
    if manifest_path is None:
        _fail(EXIT_CONFIG, "no manifest given and paths.corpus_manifest not configured")
    try:
        documents = load_manifest(manifest_path)
    except (OSError, ValueError) as exc:
        _fail(EXIT_CONFIG, f"cannot read manifest {manifest_path}: {exc}")
    provider, kb, _, _ = _build_components(config, need_index=False)
    total = 0
    for doc in documents:
        try:
            total += kb.ingest(doc, chunk_size=config.rag.chunk_size, overlap=config.rag.overlap)
        except (EmbeddingFailure, ProviderError, TransportError) as exc:
            _fail(EXIT_PROVIDER, f"ingesting {doc.id!r} failed: {exc}")
        except ValueError as exc:
            _fail(EXIT_CONFIG, f"ingesting {doc.id!r} failed: {exc}")
    if config.paths.index is not None:
        Path(config.paths.index).parent.mkdir(parents=True, exist_ok=True)
        kb.save(config.paths.index)
        click.echo(f"index written to {config.paths.index}")
    for pillar in PILLAR_ORDER:
        click.echo(f"{pillar.value}: {kb.chunk_count(pillar)} chunks")
    click.echo(f"ingested {len(documents)} documents, {total} chunks")


def _read_case(path: str) -> EvaluationRequest:
    with open(path, encoding="utf-8") as handle:
        raw = json.load(handle)
    if not isinstance(raw, dict):
        raise ValueError("case file must hold a single JSON object")
    return EvaluationRequest(**raw)


@main.command()
@click.argument("case", type=click.Path())
@click.option("--rag/--no-rag", "use_rag", default=False, help="Ground judges in the index.")
@click.option(
    "--out", "out_dir", default=None, metavar="DIR",
    help="Output directory (default: paths.output_dir).",
)
@click.pass_obj
def evaluate(config_path: str | None, case: str, use_rag: bool, out_dir: str | None) -> None:
    """Run all four judges on the request in CASE and gate the outcome."""
    config = _load_config_or_exit(config_path)
    try:
        request = _read_case(case)
    except (OSError, ValueError, TypeError) as exc:
        _fail(EXIT_CONFIG, f"cannot read case {case}: {exc}")
    _, _, judge, _ = _build_components(config, need_index=use_rag)
    orchestrator = Orchestrator(judge, policy=config.policy)
    try:
        result = orchestrator.synchronise(request, use_rag=use_rag)
    except OrchestrationFailure as exc:
        _fail(EXIT_PROVIDER, str(exc))
    out = Path(out_dir) if out_dir else config.paths.output_dir
    out.mkdir(parents=True, exist_ok=True)
    provider_id = config.provider_mode
    (out / "report.json").write_text(
        emit_report(result, "structured", provider_id=provider_id,
                    model_id=config.generation.model_name) + "\n",
        encoding="utf-8",
    )
    (out / "report.md").write_text(
        emit_report(result, "markdown", provider_id=provider_id,
                    model_id=config.generation.model_name) + "\n",
        encoding="utf-8",
    )
    (out / "bar.svg").write_text(render_bar_chart(result), encoding="utf-8")
    (out / "radar.svg").write_text(render_radar_chart(result), encoding="utf-8")
    aggregate = format_score(result.aggregate) if is_numeric(result.aggregate) else "N/A"
    click.echo(f"clearance: {result.clearance.value} (aggregate {aggregate})")
    for pillar in PILLAR_ORDER:
        click.echo(f"  {pillar.value}: {format_score(result.judgments[pillar].score)}")
    sys.exit(_CLEARANCE_EXIT[result.clearance])


@main.command(name="ab-eval")
@click.argument("cases", type=click.Path())
@click.option(
    "--out", "out_dir", default=None, metavar="DIR",
    help="Output directory (default: paths.output_dir).",
)
@click.option(
    "--similarity/--no-similarity", "with_similarity", default=True,
    help="Compare explanations via token-embedding similarity.",
)
@click.pass_obj
def ab_eval(
    config_path: str | None, cases: str, out_dir: str | None, with_similarity: bool
) -> None:
    """Judge every case in CASES without and with retrieval; tabulate deltas."""
    config = _load_config_or_exit(config_path)
    try:
        requests = load_cases(cases)
    except (OSError, ValueError) as exc:
        _fail(EXIT_CONFIG, f"cannot read cases {cases}: {exc}")
    if not requests:
        _fail(EXIT_CONFIG, f"no cases in {cases}")
    provider, _, judge, _ = _build_components(config, need_index=True)
    records = run_ab_evaluation(
        judge, requests, similarity_provider=provider if with_similarity else None
    )
    table = emit_table(records)
    out = Path(out_dir) if out_dir else config.paths.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "ab_table.txt").write_text(table + "\n", encoding="utf-8")
    (out / "ab_results.json").write_text(records_to_json(records) + "\n", encoding="utf-8")
    click.echo(table)
    failed = sum(1 for r in records if r.error is not None)
    if failed:
        click.echo(f"{failed} of {len(records)} rows failed", err=True)
    if failed == len(records):
        sys.exit(EXIT_PROVIDER)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8033, show_default=True, type=int)
@click.pass_obj
def serve(config_path: str | None, host: str, port: int) -> None:
    """Expose the pipeline over HTTP (health, evaluate, ingest)."""
    config = _load_config_or_exit(config_path)
    provider, kb, _, templates = _build_components(
        config, need_index=config.paths.index is not None and Path(config.paths.index).is_file()
    )
    from .service import create_app

    app = create_app(
        provider,
        templates=templates,
        knowledge_base=kb,
        policy=config.policy,
        params=config.generation,
        top_k=config.rag.k,
        chunk_size=config.rag.chunk_size,
        overlap=config.rag.overlap,
    )
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
