"""Confusion-matrix metrics for the positive (clickbait) class."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    mse: float

    def to_dict(self) -> dict:
        return {
            "counts": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "mse": self.mse,
        }

    def to_text(self) -> str:
        lines = [
            f"tp        {self.tp:10d}",
            f"fp        {self.fp:10d}",
            f"tn        {self.tn:10d}",
            f"fn        {self.fn:10d}",
            f"precision {self.precision:10.6f}",
            f"recall    {self.recall:10.6f}",
            f"f1        {self.f1:10.6f}",
            f"accuracy  {self.accuracy:10.6f}",
            f"mse       {self.mse:10.6f}",
        ]
        return "\n".join(lines)


def _safe_ratio(numerator: float, denominator: float, what: str) -> float:
    if denominator == 0:
        warnings.warn(f"{what} has a zero denominator; reporting 0", stacklevel=3)
        return 0.0
    return numerator / denominator


def compute_metrics(
    probabilities: Sequence[float], labels: Sequence[int], threshold: float = 0.5
) -> MetricsReport:
    """Threshold probabilities (p >= threshold is positive) and score them.

    Precision/recall/F1 target the positive class; MSE is measured on the raw
    probabilities against the 0/1 labels.
    """
    if len(probabilities) != len(labels):
        raise ValueError(f"{len(probabilities)} probabilities vs {len(labels)} labels")
    if not labels:
        raise ValueError("cannot compute metrics on an empty set")
    tp = fp = tn = fn = 0
    squared_error = 0.0
    for p, y in zip(probabilities, labels):
        if y not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {y!r}")
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability must lie in [0, 1], got {p!r}")
        positive = p >= threshold
        if positive and y == 1:
            tp += 1
        elif positive and y == 0:
            fp += 1
        elif not positive and y == 1:
            fn += 1
        else:
            tn += 1
        squared_error += (p - y) ** 2
    precision = _safe_ratio(tp, tp + fp, "precision")
    recall = _safe_ratio(tp, tp + fn, "recall")
    f1 = _safe_ratio(2 * precision * recall, precision + recall, "f1")
    return MetricsReport(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=(tp + tn) / len(labels),
        mse=squared_error / len(labels),
    )
