"""Exact metric kernels and report serialization.

AUC is the Mann-Whitney pair statistic computed by sort-and-rank with
midrank tie handling; macro-F1, accuracy, and predicted-support-normalized
confusion matrices follow the conventions used in the experiment reports.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError


def auc_roc(pos_scores: Sequence[float], neg_scores: Sequence[float]) -> float:
    """Fraction of (pos, neg) pairs with pos > neg, ties counting 1/2.

    Computed in O(n log n) via midranks; exact for half-integer rank sums.
    """
    n_pos, n_neg = len(pos_scores), len(neg_scores)
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("auc_roc requires non-empty score lists")
    scores = np.concatenate([np.asarray(pos_scores, dtype=float), np.asarray(neg_scores, dtype=float)])
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(sorted_scores):
        j = i
        while j + 1 < len(sorted_scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum_pos = float(ranks[:n_pos].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def _class_counts(preds: Sequence[str], truths: Sequence[str], classes: Sequence[str]):
    index = {c: i for i, c in enumerate(classes)}
    for label in preds:
        if label not in index:
            raise ValidationError(f"predicted label {label!r} not in classes")
    for label in truths:
        if label not in index:
            raise ValidationError(f"true label {label!r} not in classes")
    return index


def macro_f1(preds: Sequence[str], truths: Sequence[str], classes: Sequence[str]) -> float:
    """Unweighted mean of per-class F1.

    Classes with zero predicted and zero true instances are excluded from
    the average so absent classes do not drag subsampled runs down.
    """
    if len(preds) != len(truths):
        raise ValidationError(f"length mismatch: {len(preds)} preds vs {len(truths)} truths")
    if not preds:
        raise ValidationError("macro_f1 requires at least one example")
    _class_counts(preds, truths, classes)
    f1s = []
    for c in classes:
        tp = sum(1 for p, t in zip(preds, truths) if p == c and t == c)
        fp = sum(1 for p, t in zip(preds, truths) if p == c and t != c)
        fn = sum(1 for p, t in zip(preds, truths) if p != c and t == c)
        if tp + fp + fn == 0:
            continue  # no support on either side
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return sum(f1s) / len(f1s)


def confusion_matrix(
    preds: Sequence[str],
    truths: Sequence[str],
    classes: Sequence[str],
    normalize: str = "none",
) -> np.ndarray:
    """Counts matrix with rows = true class, columns = predicted class.

    ``normalize="by_predicted_support"`` divides each column by its sum,
    leaving all-zero columns untouched.
    """
    if normalize not in ("none", "by_predicted_support"):
        raise ValidationError(f"unknown normalize mode {normalize!r}")
    index = _class_counts(preds, truths, classes)
    mat = np.zeros((len(classes), len(classes)), dtype=float)
    for p, t in zip(preds, truths):
        mat[index[t], index[p]] += 1.0
    if normalize == "by_predicted_support":
        mat = normalize_by_predicted_support(mat)
    return mat


def normalize_by_predicted_support(mat: np.ndarray) -> np.ndarray:
    col_sums = mat.sum(axis=0)
    out = mat.astype(float).copy()
    nonzero = col_sums > 0
    out[:, nonzero] /= col_sums[nonzero]
    return out


def accuracy_with_std(per_seed_accuracies: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (n-1 denominator; 0 when n=1)."""
    vals = list(per_seed_accuracies)
    if not vals:
        raise ValidationError("need at least one per-seed value")
    mean = sum(vals) / len(vals)
    if len(vals) == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var)


@dataclass
class EvalReport:
    """Seed-averaged metric value with its per-seed breakdown."""

    metric: str  # auc | macro_f1 | accuracy
    per_seed: list[float]
    confusion: np.ndarray | None = None
    classes: list[str] | None = None
    value: float = field(init=False)
    std: float = field(init=False)

    def __post_init__(self):
        if self.metric not in ("auc", "macro_f1", "accuracy"):
            raise ValidationError(f"unknown metric {self.metric!r}")
        self.value, self.std = accuracy_with_std(self.per_seed)

    def to_dict(self) -> dict:
        return {"metric": self.metric, "mean": self.value, "std": self.std, "per_seed": list(self.per_seed)}


def _fmt(v: float) -> str:
    # repr gives the shortest round-trip form; keeps CSVs byte-stable
    return repr(float(v))


def write_matrix_csv(path: str | Path, row_labels: Sequence[str], col_labels: Sequence[str], values: np.ndarray) -> None:
    """Matrix CSV with an empty corner cell, column header, and row labels."""
    values = np.asarray(values)
    if values.shape != (len(row_labels), len(col_labels)):
        raise ValidationError(f"matrix shape {values.shape} does not match labels")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + list(col_labels))
        for label, row in zip(row_labels, values):
            writer.writerow([label] + [_fmt(v) for v in row])


def write_confusion_csv(path: str | Path, classes: Sequence[str], matrix: np.ndarray) -> None:
    write_matrix_csv(path, classes, classes, matrix)


def read_matrix_csv(path: str | Path) -> tuple[list[str], list[str], np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2:
        raise ValidationError(f"{path}: not a labeled matrix CSV")
    col_labels = rows[0][1:]
    row_labels = [r[0] for r in rows[1:]]
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return row_labels, col_labels, values


def write_summary_json(path: str | Path, summary: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
