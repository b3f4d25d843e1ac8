"""Classification metrics: accuracy, per-class precision/recall/F1, macro-F1.

Confusion matrix rows are true classes, columns predictions.  A class with
no predicted and no actual positives scores F1 = 0 (conservative; keeps
macro-F1 comparable across ablations that empty out a class).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError


@dataclass
class Metrics:
    accuracy: float
    macro_f1: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    confusion: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
            "confusion": self.confusion.tolist(),
        }


def compute_metrics(predictions, labels, n_classes: int | None = None) -> Metrics:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise DataFormatError(
            f"predictions {predictions.shape} vs labels {labels.shape}"
        )
    if len(labels) == 0:
        raise DataFormatError("cannot compute metrics on empty input")
    if n_classes is None:
        n_classes = int(max(predictions.max(), labels.max())) + 1

    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (labels, predictions), 1)

    tp = np.diag(confusion).astype(np.float64)
    predicted = confusion.sum(axis=0).astype(np.float64)
    actual = confusion.sum(axis=1).astype(np.float64)

    precision = np.divide(tp, predicted, out=np.zeros(n_classes), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros(n_classes), where=actual > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros(n_classes), where=pr > 0)

    return Metrics(
        accuracy=float(tp.sum() / confusion.sum()),
        macro_f1=float(f1.mean()),
        precision=precision,
        recall=recall,
        f1=f1,
        confusion=confusion,
    )
