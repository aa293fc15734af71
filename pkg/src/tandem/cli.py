"""Command-line entry points: run the service, profile datasets, and run the
evaluation harness (tables, markdown summary, and figures)."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import click

from . import evalreport, profiling
from .evalharness import (
    AblationScenario,
    ApiSpec,
    SelectionTrial,
    estimate_api_capacity,
    run_selection_accuracy,
)
from .llm import ModelEndpointConfig, OpenAIChatBackend, ScriptedBackend
from .orchestrator import LoopConfig
from .server import ApiConfig, create_app


@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


@main.command()
@click.option("--storage", type=click.Path(), default="./tandem-data", show_default=True)
@click.option("--knowledge", type=click.Path(), default="./tandem-knowledge", show_default=True)
@click.option("--base-url", required=True, help="OpenAI-style endpoint base URL.")
@click.option("--model", "model_name", required=True)
@click.option("--api-key-env", default="TANDEM_API_KEY", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--max-attempts", default=5, show_default=True,
              help="Correction-loop attempt cap per turn.")
@click.option("--theta", default=0.5, show_default=True,
              help="Knowledge-matching similarity threshold.")
def serve(storage: str, knowledge: str, base_url: str, model_name: str,
          api_key_env: str, host: str, port: int, max_attempts: int,
          theta: float) -> None:
    """Start the HTTP service."""
    import uvicorn

    backend = OpenAIChatBackend(ModelEndpointConfig(
        base_url=base_url, model_name=model_name, api_key_env_var=api_key_env))
    config = ApiConfig(storage_root=storage, knowledge_dir=knowledge,
                       bind_address=f"{host}:{port}",
                       loop=LoopConfig(max_attempts=max_attempts), theta=theta)
    uvicorn.run(create_app(config, backend), host=host, port=port)


@main.command()
@click.argument("csv_path", type=click.Path(exists=True))
def profile(csv_path: str) -> None:
    """Profile a delimited dataset and print the plain-text description."""
    table = profiling.ingest_csv(csv_path)
    click.echo(profiling.render_profile_text(profiling.profile(table)))


@main.group()
def eval() -> None:
    """Evaluation harness: ablation, capacity, selection accuracy."""


@eval.command()
@click.option("--instructions", default=454, show_default=True)
@click.option("--p0", default=0.6806, show_default=True,
              help="First-attempt success probability.")
@click.option("--pr", default=0.6, show_default=True,
              help="Per-round repair success probability.")
@click.option("--attempts", default=5, show_default=True)
@click.option("--seeds", default=20, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default="./eval-ablation",
              show_default=True)
def ablation(instructions: int, p0: float, pr: float, attempts: int,
             seeds: int, out_dir: str) -> None:
    """Seeded pass-rate simulation of the correction loop."""
    scenario = AblationScenario(n_instructions=instructions,
                                first_attempt_success_rate=p0,
                                repair_success_rate=pr, max_attempts=attempts)
    result = evalreport.ablation_report(scenario, out_dir, seeds=range(seeds))
    click.echo(f"mean pass rate (programmer only):      {result['mean_baseline']:.2%}")
    click.echo(f"mean pass rate (with inspector):       {result['mean_combined']:.2%}")
    click.echo(f"wrote {result['csv']} and {result['figure']}")


@eval.command()
@click.argument("spec_file", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(), default="./eval-capacity",
              show_default=True)
def capacity(spec_file: str, out_dir: str) -> None:
    """Estimate how many API annotations fit per model.

    SPEC_FILE is JSON: a list of {model, context_tokens, reserved_tokens,
    avg_api_tokens} objects.
    """
    entries = json.loads(Path(spec_file).read_text(encoding="utf-8"))
    for entry in entries:
        entry["capacity"] = estimate_api_capacity(
            entry["context_tokens"], entry["reserved_tokens"], entry["avg_api_tokens"])
        click.echo(f"{entry['model']}: {entry['capacity']} APIs")
    result = evalreport.capacity_report(entries, out_dir)
    click.echo(f"wrote {result['csv']} and {result['figure']}")


@eval.command()
@click.argument("fixture_file", type=click.Path(exists=True))
@click.option("--base-url", default=None, help="Live endpoint; omit for echo mode.")
@click.option("--model", "model_name", default=None)
@click.option("--out", "out_dir", type=click.Path(), default="./eval-selection",
              show_default=True)
def selection(fixture_file: str, base_url: str | None, model_name: str | None,
              out_dir: str) -> None:
    """Per-bucket API-selection accuracy.

    FIXTURE_FILE is JSON: {"buckets": [[{name, annotation_text}...]...],
    "trials": [{instruction, correct_api, bucket}...]}. Without --base-url a
    scripted echo backend answers every trial correctly (parse-path smoke run).
    """
    fixture = json.loads(Path(fixture_file).read_text(encoding="utf-8"))
    buckets = [[ApiSpec(a["name"], a["annotation_text"], bucket=i)
                for a in bucket] for i, bucket in enumerate(fixture["buckets"])]
    trials = [SelectionTrial(t["instruction"], t["correct_api"], t["bucket"])
              for t in fixture["trials"]]
    if base_url and model_name:
        backend = OpenAIChatBackend(ModelEndpointConfig(base_url=base_url,
                                                        model_name=model_name))
    else:
        backend = ScriptedBackend(
            steps=[("Instruction: " + t.instruction, t.correct_api) for t in trials])
    results = run_selection_accuracy(buckets, trials, backend)
    for r in results:
        click.echo(f"bucket {r.bucket} ({r.n_apis} APIs): "
                   f"{r.correct}/{r.total} = {r.accuracy:.2%}")
    out = evalreport.selection_report(results, out_dir)
    click.echo(f"wrote {out['csv']} and {out['figure']}")


if __name__ == "__main__":
    main()
