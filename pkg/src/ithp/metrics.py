"""Classification and regression metrics.

Per-class precision or recall with a zero denominator counts as 0.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np


class MetricError(ValueError):
    pass


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise MetricError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise MetricError("empty input")
    return a, b


@dataclass
class ConfusionCounts:
    """One-vs-rest counts per class; ``classes[i]`` labels row i of every array."""

    classes: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return self.tp + self.fn

    @classmethod
    def from_predictions(cls, preds, labels) -> "ConfusionCounts":
        preds, labels = _pair(preds, labels)
        classes = np.union1d(preds, labels)
        tp, fp, fn, tn = [], [], [], []
        for c in classes:
            p, t = preds == c, labels == c
            tp.append(np.sum(p & t))
            fp.append(np.sum(p & ~t))
            fn.append(np.sum(~p & t))
            tn.append(np.sum(~p & ~t))
        return cls(classes, *(np.array(v, dtype=np.int64) for v in (tp, fp, fn, tn)))

    @classmethod
    def binary(cls, tp: int, fp: int, fn: int, tn: int) -> "ConfusionCounts":
        """Counts for classes (0, 1) from the positive-class view."""
        return cls(
            np.array([0.0, 1.0]),
            np.array([tn, tp]),
            np.array([fn, fp]),
            np.array([fp, fn]),
            np.array([tp, tn]),
        )


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def weighted_prf(c: ConfusionCounts) -> tuple[float, float, float]:
    """Support-weighted precision, recall and F-score."""
    support = c.support.astype(np.float64)
    if support.sum() == 0:
        raise MetricError("all class supports are zero")
    precision = _safe_div(c.tp, c.tp + c.fp)
    recall = _safe_div(c.tp, c.tp + c.fn)
    fscore = _safe_div(2 * precision * recall, precision + recall)
    w = support / support.sum()
    return float(w @ precision), float(w @ recall), float(w @ fscore)


def binary_accuracy(preds, labels) -> float:
    preds, labels = _pair(preds, labels)
    return float(np.mean(preds == labels))


def f1_binary(preds, labels) -> float:
    preds, labels = _pair(preds, labels)
    tp = np.sum((preds == 1) & (labels == 1))
    fp = np.sum((preds == 1) & (labels != 1))
    fn = np.sum((preds != 1) & (labels == 1))
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return float(2 * p * r / (p + r)) if p + r else 0.0


def mae(preds, targets) -> float:
    preds, targets = _pair(preds, targets)
    return float(np.mean(np.abs(preds - targets)))


def pearson_corr(x, y) -> float:
    x, y = _pair(x, y)
    if x.size < 2:
        raise MetricError("correlation needs at least two points")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if sxx == 0 or syy == 0:
        raise MetricError("correlation undefined for constant input")
    return float((dx @ dy) / math.sqrt(sxx * syy))


@dataclass
class MetricReport:
    precision: float | None = None
    recall: float | None = None
    fscore: float | None = None
    ba: float | None = None
    f1: float | None = None
    mae: float | None = None
    corr: float | None = None
    n: int = 0

    def present(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.present(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        row = self.present()
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        writer.writeheader()
        writer.writerow(row)
        return buf.getvalue()

    @classmethod
    def mean(cls, reports: list["MetricReport"]) -> "MetricReport":
        """Average fold-level reports field by field."""
        out = {}
        for key in asdict(cls()):
            values = [getattr(r, key) for r in reports]
            if key == "n":
                out[key] = int(sum(values))
            elif all(v is not None for v in values):
                out[key] = float(np.mean(values))
        return cls(**out)


def classification_report(probs, labels, threshold: float = 0.5) -> MetricReport:
    probs, labels = _pair(probs, labels)
    preds = (probs >= threshold).astype(np.float64)
    pw, rw, fw = weighted_prf(ConfusionCounts.from_predictions(preds, labels))
    try:
        corr = pearson_corr(probs, labels)
    except MetricError:
        corr = None
    return MetricReport(
        precision=pw, recall=rw, fscore=fw,
        ba=binary_accuracy(preds, labels), f1=f1_binary(preds, labels),
        mae=mae(probs, labels), corr=corr, n=int(labels.size),
    )


def regression_report(values, targets) -> MetricReport:
    """MAE and Corr on raw values; BA and F1 on the non-negative/negative split."""
    values, targets = _pair(values, targets)
    pos_pred = (values >= 0).astype(np.float64)
    pos_true = (targets >= 0).astype(np.float64)
    try:
        corr = pearson_corr(values, targets)
    except MetricError:
        corr = None
    return MetricReport(
        ba=binary_accuracy(pos_pred, pos_true), f1=f1_binary(pos_pred, pos_true),
        mae=mae(values, targets), corr=corr, n=int(targets.size),
    )
