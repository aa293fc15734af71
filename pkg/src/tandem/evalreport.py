"""Emit evaluation results as delimited tables, a markdown summary, and
matplotlib figures rendered to files next to the tables."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evalharness import (  # noqa: E402
    AblationScenario,
    BucketAccuracy,
    MODE_PROGRAMMER_ONLY,
    MODE_WITH_INSPECTOR,
    PassRateResult,
    run_ablation,
)

logger = logging.getLogger(__name__)

FIGURE_DPI = 150


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def ablation_report(scenario: AblationScenario, out_dir: str | Path,
                    seeds: Sequence[int] = range(20)) -> dict:
    """Run the two agent modes over a seed sweep and render the comparison."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    baselines: list[PassRateResult] = []
    combineds: list[PassRateResult] = []
    for seed in seeds:
        base = run_ablation(AblationScenario(
            n_instructions=scenario.n_instructions,
            first_attempt_success_rate=scenario.first_attempt_success_rate,
            repair_success_rate=scenario.repair_success_rate,
            seed=seed, agents_mode=MODE_PROGRAMMER_ONLY,
            max_attempts=scenario.max_attempts))
        combined = run_ablation(AblationScenario(
            n_instructions=scenario.n_instructions,
            first_attempt_success_rate=scenario.first_attempt_success_rate,
            repair_success_rate=scenario.repair_success_rate,
            seed=seed, agents_mode=MODE_WITH_INSPECTOR,
            max_attempts=scenario.max_attempts),
            baseline_rate=base.pass_rate)
        baselines.append(base)
        combineds.append(combined)
        rows.append([seed, base.passed, combined.passed, scenario.n_instructions,
                     f"{base.pass_rate:.4f}", f"{combined.pass_rate:.4f}",
                     f"{combined.improvement_over_baseline:.4f}"])
    _write_csv(out / "ablation.csv",
               ["seed", "passed_programmer_only", "passed_with_inspector", "total",
                "rate_programmer_only", "rate_with_inspector", "improvement"],
               rows)

    fig, ax = plt.subplots(figsize=(7, 4))
    xs = list(seeds)
    ax.plot(xs, [b.pass_rate for b in baselines], "o-", label="programmer only")
    ax.plot(xs, [c.pass_rate for c in combineds], "s-", label="programmer + inspector")
    ax.set_xlabel("seed")
    ax.set_ylabel("pass rate")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.set_title("Self-correction loop ablation")
    fig.tight_layout()
    fig.savefig(out / "ablation.png", dpi=FIGURE_DPI)
    plt.close(fig)

    mean_base = sum(b.pass_rate for b in baselines) / len(baselines)
    mean_comb = sum(c.pass_rate for c in combineds) / len(combineds)
    summary = (
        "# Ablation summary\n\n"
        f"- instructions per run: {scenario.n_instructions}\n"
        f"- first-attempt success rate: {scenario.first_attempt_success_rate}\n"
        f"- repair success rate: {scenario.repair_success_rate}\n"
        f"- attempt cap: {scenario.max_attempts}\n"
        f"- seeds: {len(xs)}\n\n"
        f"Mean pass rate, programmer only: **{mean_base:.2%}**\n\n"
        f"Mean pass rate, programmer + inspector: **{mean_comb:.2%}**\n\n"
        "Tables: [ablation.csv](ablation.csv) — figure: ![ablation](ablation.png)\n"
    )
    (out / "summary.md").write_text(summary, encoding="utf-8")
    return {"mean_baseline": mean_base, "mean_combined": mean_comb,
            "csv": str(out / "ablation.csv"), "figure": str(out / "ablation.png")}


def capacity_report(entries: Sequence[dict], out_dir: str | Path) -> dict:
    """entries: dicts with model, context_tokens, reserved_tokens, avg_api_tokens,
    capacity (precomputed via estimate_api_capacity)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "capacity.csv",
               ["model", "context_tokens", "reserved_tokens", "avg_api_tokens", "capacity"],
               [[e["model"], e["context_tokens"], e["reserved_tokens"],
                 e["avg_api_tokens"], e["capacity"]] for e in entries])
    fig, ax = plt.subplots(figsize=(7, 4))
    names = [e["model"] for e in entries]
    ax.bar(names, [e["capacity"] for e in entries], color="#4878cf")
    ax.set_ylabel("max APIs in context")
    ax.set_title("API capacity per model configuration")
    plt.setp(ax.get_xticklabels(), rotation=30, ha="right")
    fig.tight_layout()
    fig.savefig(out / "capacity.png", dpi=FIGURE_DPI)
    plt.close(fig)
    return {"csv": str(out / "capacity.csv"), "figure": str(out / "capacity.png")}


def selection_report(results: Sequence[BucketAccuracy], out_dir: str | Path) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "selection.csv",
               ["bucket", "n_apis", "correct", "total", "accuracy"],
               [[r.bucket, r.n_apis, r.correct, r.total, f"{r.accuracy:.4f}"]
                for r in results])
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot([r.n_apis for r in results], [r.accuracy for r in results], "o-")
    ax.set_xlabel("number of APIs")
    ax.set_ylabel("selection accuracy")
    ax.set_ylim(0, 1.05)
    ax.set_title("API selection accuracy by bucket size")
    fig.tight_layout()
    fig.savefig(out / "selection.png", dpi=FIGURE_DPI)
    plt.close(fig)
    return {"csv": str(out / "selection.csv"), "figure": str(out / "selection.png")}
