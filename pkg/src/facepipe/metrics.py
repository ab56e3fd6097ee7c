"""Accuracy, confusion matrices, MAE, and the report bundle.

Accuracies are percentages; stds over repetitions are population stds,
matching the pooling convention (declared in CLI output headers).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, ParamError, ShapeError


@dataclass
class EvalReport:
    """Accuracy/MAE/confusion bundle with optional mean +/- std across repetitions."""

    accuracy: float
    recalls: np.ndarray | None = None
    confusion: np.ndarray | None = None
    mae: float | None = None
    mean_std: tuple[float, float] | None = None

    @property
    def n(self) -> int:
        return int(self.confusion.sum()) if self.confusion is not None else 0

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist() if self.confusion is not None else [],
            "mae": self.mae,
            "mean": self.mean_std[0] if self.mean_std else None,
            "std": self.mean_std[1] if self.mean_std else None,
            "n": self.n,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


def mean_std(values) -> tuple[float, float]:
    """Mean and population std of repetition values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise EmptyInputError("no values")
    return float(values.mean()), float(values.std())


def accuracy_and_confusion(pred, truth, n_classes: int) -> EvalReport:
    """Exact counting of a labeled prediction run.

    Confusion rows are truth, columns prediction, so row sums equal
    per-class support.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ShapeError(f"pred {pred.shape} and truth {truth.shape} must match")
    if pred.size == 0:
        raise EmptyInputError("no predictions")
    if n_classes < 1:
        raise ParamError(f"need n_classes >= 1, got {n_classes}")
    for name, arr in (("pred", pred), ("truth", truth)):
        if arr.dtype.kind not in "iu":
            raise ParamError(f"{name} labels must be integers")
        if (arr < 0).any() or (arr >= n_classes).any():
            raise ParamError(f"{name} labels outside 0..{n_classes - 1}")

    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (truth, pred), 1)
    accuracy = 100.0 * np.trace(confusion) / confusion.sum()
    support = confusion.sum(axis=1)
    recalls = np.divide(
        100.0 * np.diag(confusion),
        support,
        out=np.zeros(n_classes, dtype=np.float64),
        where=support > 0,
    )
    return EvalReport(accuracy=float(accuracy), recalls=recalls, confusion=confusion)


def mean_absolute_error(pred_ages, true_ages) -> float:
    pred_ages = np.asarray(pred_ages, dtype=np.float64)
    true_ages = np.asarray(true_ages, dtype=np.float64)
    if pred_ages.size == 0 and true_ages.size == 0:
        raise EmptyInputError("no ages")
    if pred_ages.shape != true_ages.shape:
        raise ShapeError(f"pred {pred_ages.shape} and true {true_ages.shape} must match")
    return float(np.abs(pred_ages - true_ages).mean())


def subset_report(pred, truth, n_classes: int, mask) -> EvalReport:
    """Metrics recomputed over the masked subset (e.g. valid descriptors only)."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != pred.shape:
        raise ShapeError(f"mask {mask.shape} does not match predictions {pred.shape}")
    if not mask.any():
        raise EmptyInputError("mask selects no samples")
    return accuracy_and_confusion(pred[mask], truth[mask], n_classes)
