"""Evaluation metrics for path-structured multi-label predictions.

* ``emr``: fraction of samples whose predicted set equals the true set.
* ``hamming_accuracy``: mean Jaccard ratio ``|Y & Z| / |Y | Z|``.
* ``au_avg_prc``: step-wise area under the precision-recall curve built from
  scores pooled over every (sample, label) pair.

Averages run over samples, not labels.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyBatch, LengthMismatch, NoPositives, UndefinedRatio


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: float
    recall: float


class EvalBatch:
    """Scores, truths, and predictions as aligned ``(samples, labels)`` arrays.

    ``scores`` may be omitted when only the set metrics are needed.
    """

    def __init__(self, truths, predictions=None, scores=None):
        self.truths = np.atleast_2d(np.asarray(truths, dtype=bool))
        self.predictions = None if predictions is None else np.atleast_2d(np.asarray(predictions, dtype=bool))
        self.scores = None if scores is None else np.atleast_2d(np.asarray(scores, dtype=np.float64))
        for other in (self.predictions, self.scores):
            if other is not None and other.shape != self.truths.shape:
                raise LengthMismatch(f"shape {other.shape} does not match truths {self.truths.shape}")

    @classmethod
    def from_sets(cls, truths, predictions, label_count: int, scores=None) -> "EvalBatch":
        def masks(sets):
            m = np.zeros((len(sets), label_count), dtype=bool)
            for i, s in enumerate(sets):
                m[i, list(s)] = True
            return m

        return cls(masks(truths), masks(predictions), scores)

    @property
    def sample_count(self) -> int:
        return self.truths.shape[0] if self.truths.size else 0


def _require_predictions(batch: EvalBatch):
    if batch.sample_count == 0:
        raise EmptyBatch("metric over an empty batch")
    if batch.predictions is None:
        raise ValueError("batch carries no predictions")


def emr(batch: EvalBatch) -> float:
    _require_predictions(batch)
    return float(np.all(batch.truths == batch.predictions, axis=1).mean())


def hamming_accuracy(batch: EvalBatch) -> float:
    _require_predictions(batch)
    inter = (batch.truths & batch.predictions).sum(axis=1)
    union = (batch.truths | batch.predictions).sum(axis=1)
    if np.any(union == 0):
        raise UndefinedRatio("true and predicted sets are both empty for some sample")
    return float((inter / union).mean())


def _pooled(batch: EvalBatch) -> tuple[np.ndarray, np.ndarray]:
    if batch.scores is None:
        raise ValueError("batch carries no scores")
    if batch.sample_count == 0:
        raise EmptyBatch("metric over an empty batch")
    s = batch.scores.ravel()
    y = batch.truths.ravel()
    if not y.any():
        raise NoPositives("no positive (sample, label) pair in the batch")
    return s, y


def pr_arrays(batch: EvalBatch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(thresholds, precision, recall)`` at each distinct score, descending."""
    s, y = _pooled(batch)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    tp = np.cumsum(y, dtype=np.int64)
    fp = np.cumsum(~y, dtype=np.int64)
    # last position of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp, fp = tp[ends], fp[ends]
    return s[ends], tp / (tp + fp), tp / tp[-1]


def pr_curve(batch: EvalBatch) -> list[PRPoint]:
    t, p, r = pr_arrays(batch)
    return [PRPoint(float(a), float(b), float(c)) for a, b, c in zip(t, p, r)]


def au_avg_prc(batch: EvalBatch) -> float:
    _, p, r = pr_arrays(batch)
    return float(np.sum(np.diff(r, prepend=0.0) * p))


def format_report(report: dict) -> str:
    keys = ("auprc", "emr", "hamming", "sample_count")
    lines = []
    for k in keys:
        v = report[k]
        lines.append(f"{k} = {v}" if isinstance(v, (int, np.integer)) else f"{k} = {float(v):.6f}")
    return "\n".join(lines) + "\n"


def write_pr_csv(path: str | Path, batch: EvalBatch) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "precision", "recall"])
        for pt in pr_curve(batch):
            w.writerow([repr(pt.threshold), repr(pt.precision), repr(pt.recall)])
