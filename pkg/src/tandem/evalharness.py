"""Desk-scale evaluation harness.

Covers the measurable analyses: pass-rate ablation of the correction loop
with fault-injection probabilities, context-window API-capacity estimation,
API-selection accuracy against a model backend, and the classification and
regression metrics.
"""

from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import DimensionError, DomainError
from .llm import ChatMessage, ModelBackend

logger = logging.getLogger(__name__)

MODE_PROGRAMMER_ONLY = "programmer_only"
MODE_WITH_INSPECTOR = "programmer_plus_inspector"


@dataclass
class AblationScenario:
    n_instructions: int
    first_attempt_success_rate: float
    repair_success_rate: float
    seed: int = 0
    agents_mode: str = MODE_WITH_INSPECTOR
    max_attempts: int = 5

    def __post_init__(self) -> None:
        if self.n_instructions < 1:
            raise ValueError("n_instructions must be >= 1")
        for p in (self.first_attempt_success_rate, self.repair_success_rate):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability out of [0, 1]: {p}")
        if self.agents_mode not in (MODE_PROGRAMMER_ONLY, MODE_WITH_INSPECTOR):
            raise ValueError(f"unknown agents_mode {self.agents_mode!r}")


@dataclass
class PassRateResult:
    passed: int
    total: int
    improvement_over_baseline: Optional[float] = None

    @property
    def pass_rate(self) -> float:
        return self.passed / self.total


def pass_rate_from_counts(passed: int, total: int,
                          baseline_rate: Optional[float] = None) -> PassRateResult:
    if not 0 <= passed <= total or total == 0:
        raise ValueError(f"invalid counts: {passed}/{total}")
    result = PassRateResult(passed=passed, total=total)
    if baseline_rate is not None:
        result.improvement_over_baseline = (result.pass_rate - baseline_rate) / baseline_rate
    return result


def run_ablation(scenario: AblationScenario,
                 baseline_rate: Optional[float] = None) -> PassRateResult:
    """Simulate the instruction stream under the configured fault rates.

    The first-attempt draws come from their own seeded stream so the same
    instructions pass or fail on attempt zero in both agent modes; the
    inspector mode can only add passes on top.
    """
    first_rng = random.Random(scenario.seed)
    repair_rng = random.Random(scenario.seed + 1)
    passed = 0
    for _ in range(scenario.n_instructions):
        if first_rng.random() < scenario.first_attempt_success_rate:
            passed += 1
            continue
        if scenario.agents_mode == MODE_WITH_INSPECTOR:
            for _round in range(scenario.max_attempts):
                if repair_rng.random() < scenario.repair_success_rate:
                    passed += 1
                    break
    return pass_rate_from_counts(passed, scenario.n_instructions, baseline_rate)


def estimate_api_capacity(context_tokens: int, reserved_tokens: int,
                          avg_api_tokens: int) -> int:
    """How many API annotations of the average length fit in the context
    window after reserving room for the conversation itself."""
    if avg_api_tokens == 0:
        raise DomainError("avg_api_tokens must be non-zero")
    if context_tokens <= 0 or reserved_tokens <= 0 or avg_api_tokens < 0:
        raise DomainError("all token counts must be positive")
    if reserved_tokens >= context_tokens:
        raise DomainError("reserved_tokens must be smaller than context_tokens")
    return (context_tokens - reserved_tokens) // avg_api_tokens


@dataclass
class ApiSpec:
    name: str
    annotation_text: str
    bucket: int

    def __post_init__(self) -> None:
        if not self.annotation_text.strip():
            raise ValueError("annotation_text must be non-empty")


@dataclass
class SelectionTrial:
    instruction: str
    correct_api: str
    bucket: int
    chosen_api: Optional[str] = None


@dataclass
class BucketAccuracy:
    bucket: int
    n_apis: int
    correct: int
    total: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0


def _selection_prompt(apis: Sequence[ApiSpec], instruction: str) -> str:
    listing = "\n".join(f"- {api.name}: {api.annotation_text}" for api in apis)
    return (
        "Choose the single best API for the user instruction below. "
        "Reply with the API name only.\n\n"
        f"Available APIs:\n{listing}\n\nInstruction: {instruction}\nAPI:"
    )


def _parse_choice(reply: str, names: Sequence[str]) -> Optional[str]:
    stripped = reply.strip()
    if stripped in names:
        return stripped
    # fall back to the first known name mentioned as a whole word
    hits = [(m.start(), name) for name in names
            for m in [re.search(rf"\b{re.escape(name)}\b", reply)] if m]
    if hits:
        return min(hits)[1]
    return None


def run_selection_accuracy(api_buckets: Sequence[Sequence[ApiSpec]],
                           trials: Sequence[SelectionTrial],
                           backend: ModelBackend) -> list[BucketAccuracy]:
    """Prompt the backend per trial and score the parsed API choice.

    Unparseable replies count as incorrect (recorded as chosen_api=None),
    never dropped from the denominator.
    """
    buckets_by_index = {i: list(bucket) for i, bucket in enumerate(api_buckets)}
    results = {i: BucketAccuracy(bucket=i, n_apis=len(b), correct=0, total=0)
               for i, b in buckets_by_index.items()}
    for trial in trials:
        bucket = buckets_by_index[trial.bucket]
        names = [api.name for api in bucket]
        if trial.correct_api not in names:
            raise ValueError(
                f"correct_api {trial.correct_api!r} not in bucket {trial.bucket}")
        reply = backend.complete(
            [ChatMessage("user", _selection_prompt(bucket, trial.instruction))])
        trial.chosen_api = _parse_choice(reply, names)
        stats = results[trial.bucket]
        stats.total += 1
        if trial.chosen_api == trial.correct_api:
            stats.correct += 1
    return [results[i] for i in sorted(results) if results[i].total]


def accuracy(tp: int, tn: int, fp: int, fn: int) -> float:
    if min(tp, tn, fp, fn) < 0:
        raise DomainError("confusion counts must be non-negative")
    total = tp + tn + fp + fn
    if total == 0:
        raise DomainError("confusion counts sum to zero")
    return (tp + tn) / total


def mse(y: Sequence[float], y_hat: Sequence[float]) -> float:
    if len(y) != len(y_hat):
        raise DimensionError(f"length mismatch: {len(y)} vs {len(y_hat)}")
    if len(y) == 0:
        raise DimensionError("sequences must be non-empty")
    return sum((a - b) ** 2 for a, b in zip(y, y_hat)) / len(y)
