"""Confusion matrices and the classification scores derived from them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

UNDEFINED = "undefined"


class MetricsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with predictions on rows and actual classes on columns.

    ``counts[i][j]`` is the number of instances predicted as ``classes[i]``
    whose actual class is ``classes[j]``.
    """

    classes: tuple
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        k = len(self.classes)
        if counts.shape != (k, k):
            raise MetricsError(f"counts must be {k}x{k}, got {counts.shape}")
        if (counts < 0).any():
            raise MetricsError("counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> dict:
        return {c: int(self.counts[i, i]) for i, c in enumerate(self.classes)}

    def __eq__(self, other):
        return (isinstance(other, ConfusionMatrix) and self.classes == other.classes
                and np.array_equal(self.counts, other.counts))

    __hash__ = None


def confusion_matrix(predicted: Sequence, actual: Sequence, classes: Sequence) -> ConfusionMatrix:
    if len(predicted) != len(actual):
        raise MetricsError("predicted and actual differ in length")
    pos = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for p, a in zip(predicted, actual):
        try:
            counts[pos[p], pos[a]] += 1
        except KeyError as exc:
            raise MetricsError(f"unknown label {exc.args[0]!r}") from None
    return ConfusionMatrix(tuple(classes), counts)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise MetricsError("accuracy of an empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.total


def _ratio(num, den):
    return [None if d == 0 else float(n) / float(d) for n, d in zip(num, den)]


def per_class_recall(cm: ConfusionMatrix) -> list[float | None]:
    """Diagonal over actual-class (column) totals; ``None`` for absent classes."""
    return _ratio(np.diag(cm.counts), cm.counts.sum(axis=0))


def per_class_precision(cm: ConfusionMatrix) -> list[float | None]:
    return _ratio(np.diag(cm.counts), cm.counts.sum(axis=1))


def format_percent(x: float) -> str:
    return f"{100 * x:.2f}%"


def _render(values):
    return [UNDEFINED if v is None else v for v in values]


def report(cm: ConfusionMatrix) -> dict:
    """JSON-ready summary; undefined ratios are rendered as ``"undefined"``."""
    return {
        "classes": list(cm.classes),
        "counts": cm.counts.tolist(),
        "accuracy": accuracy(cm),
        "per_class_recall": _render(per_class_recall(cm)),
        "per_class_precision": _render(per_class_precision(cm)),
    }


def from_report(doc: dict) -> ConfusionMatrix:
    return ConfusionMatrix(tuple(doc["classes"]), np.array(doc["counts"]))
