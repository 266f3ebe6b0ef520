"""Margin-gated cascade over an ensemble of models.

Models are evaluated in dataset order. After stage k the running mean of
the first k logit vectors is softmaxed and its top-two margin compared
against that stage's threshold: the cascade stops when margin >= threshold,
otherwise the next model runs. After the last model no threshold is
consulted. A threshold of 0 therefore always stops after one model, and a
threshold of 1 never stops early (softmax margins stay strictly below 1 in
the normal numeric range), which reproduces plain full-ensemble execution.

Because the per-stage margins and predictions of a sample do not depend on
the threshold schedule, they are computed once per dataset as schedule
independent "stage tables" and cached; running a schedule is then a cheap
vectorized scan. run_sample and run_dataset share that arithmetic, so their
results agree bit-for-bit.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .dataset_io import EnsembleDataset
from .errors import DimensionMismatchError, ScheduleMismatchError


@dataclass(frozen=True)
class ThresholdSchedule:
    """Stop thresholds tau_1..tau_{N-1}; tau_k gates continuation after k models.

    An ensemble of N models carries N-1 thresholds (none after the final
    model). Each value must lie in [0, 1].
    """

    thresholds: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(t) for t in self.thresholds)
        for i, t in enumerate(values):
            if not (0.0 <= t <= 1.0):
                raise ValueError(f"threshold {i} is {t!r}, must be in [0, 1]")
        object.__setattr__(self, "thresholds", values)

    @classmethod
    def uniform(cls, value: float, num_models: int) -> "ThresholdSchedule":
        return cls((value,) * (num_models - 1))

    @property
    def num_stages(self) -> int:
        return len(self.thresholds)

    def validate_for(self, num_models: int) -> None:
        if len(self.thresholds) != num_models - 1:
            raise ScheduleMismatchError(len(self.thresholds), num_models)


@dataclass(frozen=True, slots=True)
class CascadeTrace:
    """Per-sample execution record.

    margins holds the post-softmax margin after each executed stage, so its
    length equals models_used; cost_ms is the summed cost of the models run.
    """

    models_used: int
    margins: np.ndarray
    prediction: int
    cost_ms: float


@dataclass(frozen=True)
class StageTables:
    """Schedule-independent per-stage statistics for every sample.

    Row k-1 describes the ensemble truncated to its first k models: margins
    and argmax predictions of softmax(mean(logits[:k])), plus cumulative
    costs. Arrays are frozen; instances are cached per dataset.
    """

    margins: np.ndarray  # (num_models, num_samples) float64
    predictions: np.ndarray  # (num_models, num_samples) int64
    cum_costs_ms: np.ndarray  # (num_models,) float64

    @property
    def num_models(self) -> int:
        return self.margins.shape[0]

    @property
    def num_samples(self) -> int:
        return self.margins.shape[1]


_TABLES_CACHE: "weakref.WeakKeyDictionary[EnsembleDataset, StageTables]" = (
    weakref.WeakKeyDictionary()
)


def _prefix_stage_stats(logits64: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Margins and predictions for every prefix-averaged ensemble size."""
    num_models, _, num_classes = logits64.shape
    prefix = np.cumsum(logits64, axis=0)
    prefix /= np.arange(1, num_models + 1, dtype=np.float64)[:, None, None]
    prefix -= prefix.max(axis=2, keepdims=True)
    np.exp(prefix, out=prefix)
    prefix /= prefix.sum(axis=2, keepdims=True)
    predictions = prefix.argmax(axis=2).astype(np.int64)
    top_two = np.partition(prefix, num_classes - 2, axis=2)
    margins = top_two[..., num_classes - 1] - top_two[..., num_classes - 2]
    return margins, predictions


def stage_tables(dataset: EnsembleDataset) -> StageTables:
    """Compute (or fetch cached) stage tables for a dataset."""
    tables = _TABLES_CACHE.get(dataset)
    if tables is None:
        margins, predictions = _prefix_stage_stats(dataset.logits.astype(np.float64))
        cum_costs = np.cumsum(dataset.costs_ms, dtype=np.float64)
        for arr in (margins, predictions, cum_costs):
            arr.setflags(write=False)
        tables = StageTables(margins=margins, predictions=predictions, cum_costs_ms=cum_costs)
        _TABLES_CACHE[dataset] = tables
    return tables


def _models_used(margins: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """First stage whose margin clears its threshold, else the full ensemble."""
    num_models = margins.shape[0]
    if thresholds.size == 0:
        return np.full(margins.shape[1], num_models, dtype=np.int64)
    stop = margins[:-1, :] >= thresholds[:, None]
    stopped = stop.any(axis=0)
    first = stop.argmax(axis=0)
    return np.where(stopped, first + 1, num_models).astype(np.int64)


def full_ensemble_predictions(dataset: EnsembleDataset) -> np.ndarray:
    """Predictions when every model is always evaluated."""
    return stage_tables(dataset).predictions[-1]


def run_sample(logits_per_model, schedule: ThresholdSchedule, costs_ms) -> CascadeTrace:
    """Run the cascade on a single sample's (num_models, num_classes) logits."""
    logits = np.asarray(logits_per_model, dtype=np.float64)
    if logits.ndim != 2:
        raise DimensionMismatchError(
            f"expected (num_models, num_classes) logits, got {logits.ndim}-D input"
        )
    num_models, num_classes = logits.shape
    if num_classes < 2:
        raise DimensionMismatchError("need at least 2 classes")
    costs = np.asarray(costs_ms, dtype=np.float64)
    if costs.shape != (num_models,):
        raise DimensionMismatchError(
            f"expected {num_models} costs, got shape {costs.shape}"
        )
    schedule.validate_for(num_models)

    margins, predictions = _prefix_stage_stats(logits[:, np.newaxis, :])
    used = int(_models_used(margins, np.asarray(schedule.thresholds, dtype=np.float64))[0])
    cum_costs = np.cumsum(costs, dtype=np.float64)
    return CascadeTrace(
        models_used=used,
        margins=margins[:used, 0].copy(),
        prediction=int(predictions[used - 1, 0]),
        cost_ms=float(cum_costs[used - 1]),
    )


def run_dataset(dataset: EnsembleDataset, schedule: ThresholdSchedule) -> list[CascadeTrace]:
    """Run the cascade on every sample; trace order follows sample order."""
    schedule.validate_for(dataset.num_models)
    tables = stage_tables(dataset)
    used = _models_used(tables.margins, np.asarray(schedule.thresholds, dtype=np.float64))

    margins = tables.margins
    predictions = tables.predictions
    cum_costs = tables.cum_costs_ms
    traces = []
    for sample, stages in enumerate(used):
        k = int(stages)
        traces.append(
            CascadeTrace(
                models_used=k,
                margins=margins[:k, sample].copy(),
                prediction=int(predictions[k - 1, sample]),
                cost_ms=float(cum_costs[k - 1]),
            )
        )
    return traces
