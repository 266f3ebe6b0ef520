"""Aggregation of cascade traces into reports, histograms, and sweep tables.

Latency here is modeled, never measured: costs come from the dataset
manifest, so every number in a report is deterministic. CSV outputs use
fixed headers and 6-significant-digit reals so downstream plotting can be
scripted against byte-stable files. The R and E columns are the normalized
latency and relative error increase of gated execution versus always
running the full ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .calibration import relative_error_increase
from .cascade_engine import CascadeTrace, ThresholdSchedule, run_dataset, stage_tables
from .dataset_io import EnsembleDataset

DEFAULT_HISTOGRAM_BINS = 50
SWEEP_CSV_HEADER = "config,accuracy,avg_cost_ms,R,E,avg_models"
HISTOGRAM_CSV_HEADER = "bin_lo,bin_hi,correct,wrong"


@dataclass(frozen=True)
class EvaluationReport:
    """Aggregate outcome of one gated run over a dataset."""

    accuracy: float
    avg_cost_ms: float
    avg_models: float
    latency_ratio: float
    error_increase: float
    exit_counts: np.ndarray  # samples stopping after k models, index k-1


@dataclass(frozen=True)
class MarginHistogram:
    """Margin distribution split by top-1 correctness."""

    bin_edges: np.ndarray
    correct_counts: np.ndarray
    wrong_counts: np.ndarray


@dataclass(frozen=True)
class SweepRow:
    config: str
    accuracy: float
    avg_cost_ms: float
    latency_ratio: float
    error_increase: float
    avg_models: float


def format_real(value: float) -> str:
    """6 significant digits, '.' decimal separator."""
    return format(float(value), ".6g")


def report(dataset: EnsembleDataset, traces: Sequence[CascadeTrace]) -> EvaluationReport:
    """Aggregate per-sample traces; the full-ensemble baseline is computed internally."""
    num_samples = dataset.num_samples
    if len(traces) != num_samples:
        raise ValueError(f"got {len(traces)} traces for {num_samples} samples")

    tables = stage_tables(dataset)
    num_models = tables.num_models
    used = np.fromiter((t.models_used for t in traces), dtype=np.int64, count=num_samples)
    predictions = np.fromiter((t.prediction for t in traces), dtype=np.int64, count=num_samples)

    exit_counts = np.bincount(used, minlength=num_models + 1)[1:]
    gated_cost_total = float(exit_counts @ tables.cum_costs_ms)
    full_cost_total = num_samples * float(tables.cum_costs_ms[-1])

    wrong = np.count_nonzero(predictions != dataset.labels)
    full_error = np.count_nonzero(tables.predictions[-1] != dataset.labels) / num_samples

    return EvaluationReport(
        accuracy=(num_samples - wrong) / num_samples,
        avg_cost_ms=gated_cost_total / num_samples,
        avg_models=float(exit_counts @ np.arange(1, num_models + 1)) / num_samples,
        latency_ratio=gated_cost_total / full_cost_total,
        error_increase=relative_error_increase(wrong / num_samples, full_error),
        exit_counts=exit_counts,
    )


def margin_histogram(
    dataset: EnsembleDataset,
    ensemble_size: int,
    bins: int = DEFAULT_HISTOGRAM_BINS,
    limit: int | None = None,
) -> MarginHistogram:
    """Histogram the stage-k margins, split by correctness of the stage-k prediction.

    Bins are equal-width over [0, 1]. limit restricts the tally to the first
    `limit` samples (clamped to the dataset size), which keeps subset runs
    deterministic.
    """
    if not (1 <= ensemble_size <= dataset.num_models):
        raise ValueError(
            f"ensemble_size must be in [1, {dataset.num_models}], got {ensemble_size}"
        )
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    take = dataset.num_samples
    if limit is not None:
        if limit < 1:
            raise ValueError(f"limit must be >= 1, got {limit}")
        take = min(limit, take)

    tables = stage_tables(dataset)
    margins = tables.margins[ensemble_size - 1, :take]
    correct = tables.predictions[ensemble_size - 1, :take] == dataset.labels[:take]

    edges = np.linspace(0.0, 1.0, bins + 1)
    correct_counts, _ = np.histogram(margins[correct], bins=edges)
    wrong_counts, _ = np.histogram(margins[~correct], bins=edges)
    return MarginHistogram(
        bin_edges=edges, correct_counts=correct_counts, wrong_counts=wrong_counts
    )


def ensemble_size_sweep(dataset: EnsembleDataset) -> list[SweepRow]:
    """One row per truncated ensemble size k = 1..N under full (ungated) execution."""
    tables = stage_tables(dataset)
    num_samples = dataset.num_samples
    full_error = np.count_nonzero(tables.predictions[-1] != dataset.labels) / num_samples

    rows = []
    for k in range(1, tables.num_models + 1):
        wrong = np.count_nonzero(tables.predictions[k - 1] != dataset.labels)
        rows.append(
            SweepRow(
                config=f"full_{k}",
                accuracy=(num_samples - wrong) / num_samples,
                avg_cost_ms=float(tables.cum_costs_ms[k - 1]),
                latency_ratio=float(tables.cum_costs_ms[k - 1])
                / float(tables.cum_costs_ms[-1]),
                error_increase=relative_error_increase(wrong / num_samples, full_error),
                avg_models=float(k),
            )
        )
    return rows


def flexible_sweep(
    dataset: EnsembleDataset, schedules: Sequence[tuple[str, ThresholdSchedule]]
) -> list[SweepRow]:
    """One row per named schedule under gated execution."""
    rows = []
    for config, schedule in schedules:
        rep = report(dataset, run_dataset(dataset, schedule))
        rows.append(
            SweepRow(
                config=config,
                accuracy=rep.accuracy,
                avg_cost_ms=rep.avg_cost_ms,
                latency_ratio=rep.latency_ratio,
                error_increase=rep.error_increase,
                avg_models=rep.avg_models,
            )
        )
    return rows


def write_sweep_csv(path, rows: Sequence[SweepRow]) -> None:
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                (
                    r.config,
                    format_real(r.accuracy),
                    format_real(r.avg_cost_ms),
                    format_real(r.latency_ratio),
                    format_real(r.error_increase),
                    format_real(r.avg_models),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_histogram_csv(path, histogram: MarginHistogram) -> None:
    lines = [HISTOGRAM_CSV_HEADER]
    edges = histogram.bin_edges
    for i in range(len(histogram.correct_counts)):
        lines.append(
            ",".join(
                (
                    format_real(edges[i]),
                    format_real(edges[i + 1]),
                    str(int(histogram.correct_counts[i])),
                    str(int(histogram.wrong_counts[i])),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
