"""Evaluation harness: dataset split, accuracy/latency metrics, parameter sweeps.

Accuracy is reported three ways: over everything, over normal-labeled records,
and over conflict-labeled (anomaly) records, as percentages rounded to two
decimals. Sweeps select a parameter value by highest total accuracy, breaking
ties by higher anomaly accuracy, then by smaller mean detection time, then by
smallest parameter value so the chain always ends in a single winner.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import prompts
from .buffers import MultiModalBuffer, render_unified_prompt, task_attribute_score
from .detection import METHOD_TASK, DetectionConfig, DetectionError, DetectionResult
from .types import ConflictLabel, DatasetRecord, DetectionInput

logger = logging.getLogger(__name__)

DetectFn = Callable[[DetectionInput], DetectionResult]


def percentage(correct: int, total: int) -> float:
    """correct/total as a percentage rounded half-even to 2 decimals; 0.0 when total is 0."""
    if total == 0:
        return 0.0
    return float(
        (Decimal(correct * 100) / Decimal(total)).quantize(Decimal("0.01"), ROUND_HALF_EVEN)
    )


@dataclass(frozen=True)
class Metrics:
    """Accuracy/latency summary over one evaluation run."""

    total_acc: float
    normal_acc: float
    anomaly_acc: float
    mean_latency: float
    normal_total: int
    normal_correct: int
    anomaly_total: int
    anomaly_correct: int

    @classmethod
    def from_counts(
        cls,
        normal_total: int,
        normal_correct: int,
        anomaly_total: int,
        anomaly_correct: int,
        mean_latency: float = 0.0,
    ) -> "Metrics":
        if normal_correct > normal_total or anomaly_correct > anomaly_total:
            raise ValueError("correct counts cannot exceed totals")
        return cls(
            total_acc=percentage(normal_correct + anomaly_correct, normal_total + anomaly_total),
            normal_acc=percentage(normal_correct, normal_total),
            anomaly_acc=percentage(anomaly_correct, anomaly_total),
            mean_latency=mean_latency,
            normal_total=normal_total,
            normal_correct=normal_correct,
            anomaly_total=anomaly_total,
            anomaly_correct=anomaly_correct,
        )

    @property
    def total_correct(self) -> int:
        return self.normal_correct + self.anomaly_correct

    @property
    def total_count(self) -> int:
        return self.normal_total + self.anomaly_total

    def to_dict(self) -> dict:
        return {
            "total_acc": self.total_acc,
            "normal_acc": self.normal_acc,
            "anomaly_acc": self.anomaly_acc,
            "mean_latency": self.mean_latency,
            "counts": {
                "normal_total": self.normal_total,
                "normal_correct": self.normal_correct,
                "anomaly_total": self.anomaly_total,
                "anomaly_correct": self.anomaly_correct,
            },
        }

    def table_row(self, name: str) -> str:
        return (
            f"{name:<24} {self.total_acc:>9.2f} {self.normal_acc:>10.2f} "
            f"{self.anomaly_acc:>11.2f} {self.mean_latency:>10.4f}"
        )


TABLE_HEADER = (
    f"{'Method':<24} {'Total Acc':>9} {'Normal Acc':>10} {'Anomaly Acc':>11} {'Time (s)':>10}"
)


@dataclass(frozen=True)
class RecordOutcome:
    """Per-record evaluation detail."""

    record_id: str
    gold: ConflictLabel
    predicted: ConflictLabel | None
    method: str | None
    correct: bool
    latency_s: float
    error: str | None = None


def evaluate_detailed(
    test: Sequence[DatasetRecord],
    detect_fn: DetectFn,
    *,
    parallelism: int = 1,
) -> tuple[Metrics, list[RecordOutcome]]:
    """Run detection over every test record and aggregate metrics.

    A detector error on a record counts as incorrect and is logged; the run
    always completes. Latency is wall-clock around each detect call;
    parallelism above 1 trades faithful latency numbers for throughput, so
    keep it at 1 when the timing matters.
    """
    if not test:
        raise ValueError("test set is empty; nothing to evaluate")

    def run_one(record: DatasetRecord) -> RecordOutcome:
        started = time.perf_counter()
        try:
            result = detect_fn(record.to_detection_input())
        except DetectionError as exc:
            elapsed = time.perf_counter() - started
            logger.warning("detection failed on record %s: %s", record.id, exc)
            return RecordOutcome(
                record_id=record.id, gold=record.label, predicted=None, method=None,
                correct=False, latency_s=elapsed, error=str(exc),
            )
        elapsed = time.perf_counter() - started
        return RecordOutcome(
            record_id=record.id,
            gold=record.label,
            predicted=result.label,
            method=result.method,
            correct=result.label is record.label,
            latency_s=elapsed,
        )

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(run_one, test))
    else:
        outcomes = [run_one(record) for record in test]

    normal_total = sum(1 for o in outcomes if not o.gold.is_anomaly)
    normal_correct = sum(1 for o in outcomes if not o.gold.is_anomaly and o.correct)
    anomaly_total = len(outcomes) - normal_total
    anomaly_correct = sum(1 for o in outcomes if o.gold.is_anomaly and o.correct)
    metrics = Metrics.from_counts(
        normal_total,
        normal_correct,
        anomaly_total,
        anomaly_correct,
        mean_latency=float(np.mean([o.latency_s for o in outcomes])),
    )
    return metrics, outcomes


def evaluate(
    test: Sequence[DatasetRecord],
    detect_fn: DetectFn,
    *,
    parallelism: int = 1,
) -> Metrics:
    """Metrics-only wrapper around evaluate_detailed."""
    metrics, _ = evaluate_detailed(test, detect_fn, parallelism=parallelism)
    return metrics


@dataclass(frozen=True)
class DatasetSplit:
    """Buffer-construction records vs held-out test records, disjoint by id."""

    buffer_train: list[DatasetRecord]
    test: list[DatasetRecord]


def split_dataset(
    records: Sequence[DatasetRecord],
    *,
    holdout_trajectory_ids: Sequence[str] | None = None,
    holdout_static_ids: Sequence[str] | None = None,
    n_trajectories: int = 2,
    n_static: int = 32,
    seed: int = 0,
) -> DatasetSplit:
    """Hold out whole trajectories plus designated static records as the test set.

    Explicit hold-out ids win; otherwise n_trajectories trajectories and
    n_static static records are drawn deterministically from the seed. A
    trajectory never straddles the split because membership is decided per
    trajectory id, not per frame.
    """
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError("dataset contains duplicate record ids; split would be ambiguous")

    all_trajectories = sorted({r.trajectory_id for r in records if r.trajectory_id is not None})
    static_records = [r for r in records if r.trajectory_id is None]
    static_ids = sorted(r.id for r in static_records)

    rng = np.random.default_rng(seed)
    if holdout_trajectory_ids is None:
        take = min(n_trajectories, len(all_trajectories))
        holdout_trajectory_ids = sorted(
            rng.choice(all_trajectories, size=take, replace=False).tolist()
        ) if take else []
    else:
        missing = sorted(set(holdout_trajectory_ids) - set(all_trajectories))
        if missing:
            raise ValueError(f"hold-out trajectories not in dataset: {missing}")
    if holdout_static_ids is None:
        take = min(n_static, len(static_ids))
        holdout_static_ids = sorted(
            rng.choice(static_ids, size=take, replace=False).tolist()
        ) if take else []
    else:
        missing = sorted(set(holdout_static_ids) - set(static_ids))
        if missing:
            raise ValueError(f"hold-out static records not in dataset: {missing}")

    test_trajectories = set(holdout_trajectory_ids)
    test_statics = set(holdout_static_ids)
    test, train = [], []
    for record in records:
        if (record.trajectory_id in test_trajectories) or (record.id in test_statics):
            test.append(record)
        else:
            train.append(record)
    assert len(test) + len(train) == len(records)
    assert not ({r.id for r in test} & {r.id for r in train})
    return DatasetSplit(buffer_train=train, test=test)


SWEEP_PARAMETERS = ("w", "tau_s", "tau_t")


def select_best(grid: Sequence[float], metrics: Sequence[Metrics]) -> float:
    """Pick the winning grid value.

    Order of precedence: (1) highest total accuracy, (2) highest anomaly
    accuracy, (3) smallest mean detection time, (4) smallest value.
    """
    if not grid or len(grid) != len(metrics):
        raise ValueError("grid and metrics must be non-empty and aligned")
    ranked = sorted(
        zip(grid, metrics),
        key=lambda gm: (-gm[1].total_acc, -gm[1].anomaly_acc, gm[1].mean_latency, gm[0]),
    )
    return ranked[0][0]


@dataclass(frozen=True)
class SweepResult:
    """Grid evaluation of one parameter plus the selected value."""

    parameter: str
    grid: tuple[float, ...]
    metrics: tuple[Metrics, ...]
    selected: float

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "grid": list(self.grid),
            "metrics": [m.to_dict() for m in self.metrics],
            "selected": self.selected,
        }

    def to_csv(self) -> str:
        lines = ["value,total_acc,normal_acc,anomaly_acc,mean_latency"]
        for value, m in zip(self.grid, self.metrics):
            lines.append(
                f"{value},{m.total_acc},{m.normal_acc},{m.anomaly_acc},{m.mean_latency}"
            )
        return "\n".join(lines) + "\n"


def sweep(
    parameter: str,
    grid: Sequence[float],
    test: Sequence[DatasetRecord],
    config_base: DetectionConfig,
    detector_factory: Callable[[DetectionConfig], DetectFn],
    *,
    parallelism: int = 1,
) -> SweepResult:
    """Evaluate every grid value of one parameter with the others held fixed."""
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"parameter must be one of {SWEEP_PARAMETERS}, got {parameter!r}")
    if not grid:
        raise ValueError("sweep grid is empty")
    all_metrics = []
    for value in grid:
        config = replace(config_base, **{parameter: float(value)})
        detect_fn = detector_factory(config)
        all_metrics.append(evaluate(test, detect_fn, parallelism=parallelism))
    selected = select_best(list(grid), all_metrics)
    return SweepResult(
        parameter=parameter,
        grid=tuple(float(v) for v in grid),
        metrics=tuple(all_metrics),
        selected=selected,
    )


def grid_range(start: float, stop: float, step: float) -> list[float]:
    """Inclusive rounded grid, e.g. 0.00..1.00 step 0.01."""
    count = int(round((stop - start) / step))
    return [round(start + i * step, 10) for i in range(count + 1)]


def unified_retrieval_baseline(
    test: Sequence[DatasetRecord],
    unified_buffer: MultiModalBuffer,
    config: DetectionConfig,
    text_provider,
    image_provider,
) -> Metrics:
    """Joint-prompt retrieval baseline: speech folded into the prompt, pure argmax.

    No speech gate and no escalation; every query answers with the label of
    the best fused match, which is what makes it comparable against separate
    retrieval on equal footing.
    """

    def detect_fn(input: DetectionInput) -> DetectionResult:
        started = time.perf_counter()
        prompt = render_unified_prompt(input.task, input.step, input.speech)
        prompt_q = text_provider.embed_text(prompt)
        obs_q = image_provider.embed_image(input.image)
        hit = task_attribute_score(prompt_q, obs_q, unified_buffer, config.w)
        return DetectionResult(
            label=hit.entry_label,
            method=METHOD_TASK,
            speech_score=None,
            task_score=hit.score,
            matched_entry_id=hit.entry_id,
            latency_s=time.perf_counter() - started,
            timestamp=datetime.now(timezone.utc),
        )

    return evaluate(test, detect_fn)


def export_finetune(records: Iterable[DatasetRecord], out_path: str | Path) -> int:
    """Write instruction-tuning lines: system prompt, rendered user turn, label answer.

    The user turn renders task/step/speech exactly like the escalation prompt
    (absent speech becomes "none"), so a model tuned on this file sees the
    same input shape at inference time.
    """
    out_path = Path(out_path)
    count = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for record in records:
            row = {
                "system": prompts.DETECTION_SYSTEM_INSTRUCTION,
                "image": record.image,
                "user": prompts.render_detection_prompt(record.task, record.step, record.speech),
                "assistant": record.label.value,
            }
            fh.write(json.dumps(row, ensure_ascii=False, separators=(",", ":")) + "\n")
            count += 1
    return count


def consistent_totals(
    total_pct: float,
    normal_pct: float,
    anomaly_pct: float,
    *,
    max_partition: int = 400,
) -> tuple[int, int, int, int] | None:
    """Smallest (normal_total, anomaly_total, normal_correct, anomaly_correct)
    jointly consistent with three reported percentages, or None.

    Documentation tool: reported accuracy triples imply constraints on the
    underlying counts, and this searches partition sizes in increasing total
    for integer counts that reproduce all three percentages at 2-decimal
    rounding.
    """

    def candidates(pct: float, total: int) -> list[int]:
        center = int(round(pct * total / 100.0))
        return [c for c in range(max(0, center - 1), min(total, center + 1) + 1)
                if percentage(c, total) == pct]

    for combined in range(2, 2 * max_partition + 1):
        for normal_total in range(1, combined):
            anomaly_total = combined - normal_total
            if normal_total > max_partition or anomaly_total > max_partition:
                continue
            for normal_correct in candidates(normal_pct, normal_total):
                for anomaly_correct in candidates(anomaly_pct, anomaly_total):
                    if percentage(normal_correct + anomaly_correct, combined) == total_pct:
                        return (normal_total, anomaly_total, normal_correct, anomaly_correct)
    return None
