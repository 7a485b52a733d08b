"""Confusion matrices and the evaluation quantities used in all reports.

All multi-class scores are class-support weighted: each class's precision,
recall and F1 (harmonic mean, ``2PR / (P + R)``) are averaged with weights
proportional to the class's number of true instances. Division-by-zero
convention: a precision/recall/F1 with a zero denominator is 0.

Multi-run aggregation reports the arithmetic mean and the *population*
standard deviation (divide by n, not n-1); the convention is recorded in
every serialized report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    EmptyInput,
    EmptyList,
    EmptyMatrix,
    LabelOutOfRange,
    LengthMismatch,
)

SD_CONVENTION = "population"


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """L x L grid; ``cells[i][j]`` counts items with true label i predicted j."""

    cells: np.ndarray

    def __post_init__(self) -> None:
        cells = np.asarray(self.cells, dtype=np.int64)
        if cells.ndim != 2 or cells.shape[0] != cells.shape[1]:
            raise LabelOutOfRange(f"confusion matrix must be square, got {cells.shape}")
        if (cells < 0).any():
            raise LabelOutOfRange("confusion matrix cells must be non-negative")
        object.__setattr__(self, "cells", cells)

    @property
    def num_classes(self) -> int:
        return self.cells.shape[0]

    @property
    def total(self) -> int:
        return int(self.cells.sum())


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ScoreSet:
    """Accuracy plus support-weighted precision/recall/F1 and per-class detail."""

    accuracy: float
    precision_weighted: float
    recall_weighted: float
    f1_weighted: float
    per_class: tuple[ClassScores, ...]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision_weighted": self.precision_weighted,
            "recall_weighted": self.recall_weighted,
            "f1_weighted": self.f1_weighted,
            "per_class": [
                {
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "support": c.support,
                }
                for c in self.per_class
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScoreSet":
        return cls(
            accuracy=doc["accuracy"],
            precision_weighted=doc["precision_weighted"],
            recall_weighted=doc["recall_weighted"],
            f1_weighted=doc["f1_weighted"],
            per_class=tuple(
                ClassScores(c["precision"], c["recall"], c["f1"], c["support"])
                for c in doc["per_class"]
            ),
        )


@dataclass(frozen=True)
class RunAggregate:
    """Mean and population SD of accuracy/weighted-F1 over repeated runs."""

    per_run: tuple[ScoreSet, ...]
    mean_accuracy: float
    mean_f1_weighted: float
    sd_accuracy: float
    sd_f1_weighted: float

    def to_dict(self) -> dict:
        return {
            "sd_convention": SD_CONVENTION,
            "runs": [s.to_dict() for s in self.per_run],
            "mean": {
                "accuracy": self.mean_accuracy,
                "f1_weighted": self.mean_f1_weighted,
            },
            "sd": {
                "accuracy": self.sd_accuracy,
                "f1_weighted": self.sd_f1_weighted,
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunAggregate":
        return cls(
            per_run=tuple(ScoreSet.from_dict(s) for s in doc["runs"]),
            mean_accuracy=doc["mean"]["accuracy"],
            mean_f1_weighted=doc["mean"]["f1_weighted"],
            sd_accuracy=doc["sd"]["accuracy"],
            sd_f1_weighted=doc["sd"]["f1_weighted"],
        )


def confusion(
    true_labels: Sequence[int], pred_labels: Sequence[int], num_classes: int
) -> ConfusionMatrix:
    """Count (true, predicted) pairs into an L x L matrix."""
    if len(true_labels) == 0:
        raise EmptyInput("cannot build a confusion matrix from empty label vectors")
    if len(true_labels) != len(pred_labels):
        raise LengthMismatch(
            f"{len(true_labels)} true labels vs {len(pred_labels)} predictions"
        )
    true_arr = np.asarray(true_labels, dtype=np.int64)
    pred_arr = np.asarray(pred_labels, dtype=np.int64)
    for arr, which in ((true_arr, "true"), (pred_arr, "predicted")):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise LabelOutOfRange(f"{which} labels fall outside 0..{num_classes - 1}")
    cells = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cells, (true_arr, pred_arr), 1)
    return ConfusionMatrix(cells=cells)


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def weighted_scores(cm: ConfusionMatrix) -> ScoreSet:
    """Accuracy and support-weighted P/R/F1 from a confusion matrix.

    Per class: precision = diagonal / column sum, recall = diagonal /
    row sum, F1 = 2PR / (P + R); each is 0 when its denominator is 0.
    Supports are row sums; weighted scores are support-weighted means.
    """
    total = cm.total
    if total == 0:
        raise EmptyMatrix("confusion matrix has zero total count")
    cells = cm.cells
    diag = np.diag(cells).astype(float)
    row_sums = cells.sum(axis=1).astype(float)   # supports
    col_sums = cells.sum(axis=0).astype(float)

    per_class: list[ClassScores] = []
    for i in range(cm.num_classes):
        p = _safe_div(diag[i], col_sums[i])
        r = _safe_div(diag[i], row_sums[i])
        f1 = _safe_div(2.0 * p * r, p + r)
        per_class.append(ClassScores(p, r, f1, int(row_sums[i])))

    weights = row_sums / total
    return ScoreSet(
        accuracy=float(diag.sum()) / total,
        precision_weighted=math.fsum(w * c.precision for w, c in zip(weights, per_class)),
        recall_weighted=math.fsum(w * c.recall for w, c in zip(weights, per_class)),
        f1_weighted=math.fsum(w * c.f1 for w, c in zip(weights, per_class)),
        per_class=tuple(per_class),
    )


def scores_from_labels(
    true_labels: Sequence[int], pred_labels: Sequence[int], num_classes: int
) -> ScoreSet:
    """Convenience wrapper: confusion + weighted_scores in one call."""
    return weighted_scores(confusion(true_labels, pred_labels, num_classes))


def _population_sd(values: Sequence[float], mean: float) -> float:
    return math.sqrt(math.fsum((v - mean) ** 2 for v in values) / len(values))


def aggregate_runs(scores: Sequence[ScoreSet]) -> RunAggregate:
    """Mean and population SD of accuracy and weighted F1 across runs."""
    if len(scores) == 0:
        raise EmptyList("cannot aggregate an empty run list")
    accs = [s.accuracy for s in scores]
    f1s = [s.f1_weighted for s in scores]
    mean_acc = math.fsum(accs) / len(accs)
    mean_f1 = math.fsum(f1s) / len(f1s)
    return RunAggregate(
        per_run=tuple(scores),
        mean_accuracy=mean_acc,
        mean_f1_weighted=mean_f1,
        sd_accuracy=_population_sd(accs, mean_acc),
        sd_f1_weighted=_population_sd(f1s, mean_f1),
    )
