"""Confusion-matrix accounting and the six reported metrics.

The positive class is default (label 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METRIC_NAMES = ("precision", "recall", "f1", "type_i", "type_ii", "bacc")
CSV_COLUMNS = ("pr", "re", "f1", "type1", "type2", "bacc")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    type_i: float
    type_ii: float
    bacc: float
    matrix: ConfusionMatrix
    # metrics whose defining ratio was 0/0 (reported as 0)
    degenerate: tuple = ()

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in METRIC_NAMES)


def confusion(predictions, labels) -> ConfusionMatrix:
    pred = np.asarray(predictions).astype(np.int64).ravel()
    true = np.asarray(labels).astype(np.int64).ravel()
    if pred.shape != true.shape:
        raise ValueError(f"length mismatch: {len(pred)} predictions vs {len(true)} labels")
    for name, arr in (("predictions", pred), ("labels", true)):
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must be binary 0/1")
    tp = int(np.sum((pred == 1) & (true == 1)))
    fp = int(np.sum((pred == 1) & (true == 0)))
    tn = int(np.sum((pred == 0) & (true == 0)))
    fn = int(np.sum((pred == 0) & (true == 1)))
    return ConfusionMatrix(tp, fp, tn, fn)


def type_i_from_recall(recall: float) -> float:
    return 1.0 - recall


def bacc_from_rates(recall: float, type_ii: float) -> float:
    """Mean of the true-positive rate and the true-negative rate."""
    return (recall + (1.0 - type_ii)) / 2


def _ratio(num, den, name, flags):
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Precision, recall, F1, Type-I, Type-II and balanced accuracy.

    Type-I is computed as ``1 - recall`` and BACC as
    ``(recall + (1 - type_ii)) / 2`` so both identities hold exactly.
    """
    flags: list[str] = []
    pr = _ratio(cm.tp, cm.tp + cm.fp, "precision", flags)
    re = _ratio(cm.tp, cm.tp + cm.fn, "recall", flags)
    f1 = _ratio(2 * pr * re, pr + re, "f1", flags)
    type_i = type_i_from_recall(re)
    if "recall" in flags:
        flags.append("type_i")
    type_ii = _ratio(cm.fp, cm.fp + cm.tn, "type_ii", flags)
    bacc = bacc_from_rates(re, type_ii)
    return MetricsReport(pr, re, f1, type_i, type_ii, bacc, cm, tuple(flags))


def evaluate(predictions, labels) -> MetricsReport:
    return metrics(confusion(predictions, labels))
