"""Evaluation metrics: PR/AP, ROC/AUC, weighted precision, prevalence,
enrichment, RMSE.

Curves sweep thresholds at distinct score values in descending order, and
all samples tied at a threshold flip together — this makes AP equal to
brute-force threshold enumeration exactly. AUC is the Mann-Whitney
statistic (ties count one half), computed via average ranks, which equals
the pairwise count exactly. Enrichment is precision divided by prevalence,
always on the linear scale.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateLabels,
    LengthMismatch,
    NoPositives,
    NoPredictions,
)


@dataclass(frozen=True)
class PrPoint:
    threshold: float
    precision: float
    recall: float


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    fpr: float
    tpr: float


@dataclass
class EvalReport:
    ap: float
    roc_auc: float
    prevalence: float
    enrichment_at_recall: list = field(default_factory=list)
    weighted_precision_at: list = field(default_factory=list)
    rmse: float | None = None

    def to_json(self) -> str:
        payload = {"ap": self.ap, "roc_auc": self.roc_auc,
                   "prevalence": self.prevalence,
                   "enrichment_at_recall": self.enrichment_at_recall,
                   "weighted_precision_at": self.weighted_precision_at}
        if self.rmse is not None:
            payload["rmse"] = self.rmse
        return json.dumps(payload, indent=2)


def _check_binary(labels):
    labels = np.asarray(labels, dtype=np.float64)
    if not np.isin(labels, (0.0, 1.0)).all():
        raise DegenerateLabels("labels must be binary 0/1")
    return labels


def _tie_grouped_counts(scores, labels):
    """Cumulative (threshold, tp, fp) at each distinct score, descending."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = _check_binary(labels)
    if scores.shape != labels.shape:
        raise LengthMismatch(f"scores {scores.shape} vs labels {labels.shape}")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    # indices where a new distinct score starts
    boundaries = np.flatnonzero(np.diff(s)) + 1
    ends = np.append(boundaries, s.shape[0]) - 1
    tp = np.cumsum(y)[ends]
    fp = np.cumsum(1.0 - y)[ends]
    return s[ends], tp, fp


def pr_curve(scores, labels):
    """Tie-grouped PR points and step-interpolated average precision."""
    thresholds, tp, fp = _tie_grouped_counts(scores, labels)
    total_pos = tp[-1]
    if total_pos == 0:
        raise NoPositives("no positive labels")
    precision = tp / (tp + fp)
    recall = tp / total_pos
    points = [PrPoint(float(t), float(p), float(r))
              for t, p, r in zip(thresholds, precision, recall)]
    # sequential accumulation in threshold order, so the result is bitwise
    # reproducible against straightforward threshold enumeration
    ap, prev_r = 0.0, 0.0
    for pt in points:
        ap += (pt.recall - prev_r) * pt.precision
        prev_r = pt.recall
    return points, ap


def roc_curve(scores, labels):
    """Tie-grouped ROC points; AUC = Mann-Whitney with half-credit ties."""
    thresholds, tp, fp = _tie_grouped_counts(scores, labels)
    pos, neg = tp[-1], fp[-1]
    if pos == 0 or neg == 0:
        raise DegenerateLabels("ROC needs at least one positive and one negative")
    points = [RocPoint(float(t), float(f / neg), float(p / pos))
              for t, p, f in zip(thresholds, tp, fp)]
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    order = np.argsort(scores, kind="stable")
    ranks = np.empty_like(scores)
    ranks[order] = np.arange(1, scores.shape[0] + 1, dtype=np.float64)
    # average ranks across ties
    s_sorted = scores[order]
    i = 0
    while i < len(s_sorted):
        j = i
        while j + 1 < len(s_sorted) and s_sorted[j + 1] == s_sorted[i]:
            j += 1
        if j > i:
            ranks[order[i:j + 1]] = (i + 1 + j + 1) / 2.0
        i = j + 1
    rank_sum = ranks[labels == 1.0].sum()
    auc = (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)
    return points, float(auc)


def weighted_precision(binary_preds, y_smooth) -> float:
    preds = np.asarray(binary_preds, dtype=np.float64)
    y = np.asarray(y_smooth, dtype=np.float64)
    if preds.shape != y.shape:
        raise LengthMismatch(f"preds {preds.shape} vs smooth {y.shape}")
    if not np.isin(preds, (0.0, 1.0)).all():
        raise DegenerateLabels("predictions must be binary 0/1")
    denom = preds.sum()
    if denom == 0:
        raise NoPredictions("no positive predictions at this threshold")
    return float((preds * y).sum() / denom)


def prevalence(labels) -> float:
    labels = _check_binary(labels)
    p = float(labels.mean())
    if p == 0.0:
        raise NoPositives("no positive labels")
    return p


def enrichment(precision: float, prev: float) -> float:
    return precision / prev


def prevalence_and_enrichment(precisions, labels):
    prev = prevalence(labels)
    return prev, [enrichment(p, prev) for p in precisions]


def rmse(preds, truths) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape or preds.size == 0:
        raise LengthMismatch(f"preds {preds.shape} vs truths {truths.shape}")
    return float(np.sqrt(((preds - truths) ** 2).mean()))


# --- reporting / export -----------------------------------------------------


def build_report(scores, labels, smooth_labels=None, thresholds=(),
                 affinity_pairs=None) -> EvalReport:
    pr_points, ap = pr_curve(scores, labels)
    _, auc = roc_curve(scores, labels)
    prev = prevalence(labels)
    report = EvalReport(ap=ap, roc_auc=auc, prevalence=prev)
    report.enrichment_at_recall = [(pt.recall, enrichment(pt.precision, prev))
                                   for pt in pr_points]
    if smooth_labels is not None:
        scores = np.asarray(scores, dtype=np.float64)
        for t in thresholds:
            preds = (scores >= t).astype(np.float64)
            try:
                value = weighted_precision(preds, smooth_labels)
            except NoPredictions:
                value = None
            report.weighted_precision_at.append((t, value))
    if affinity_pairs is not None:
        preds, truths = affinity_pairs
        report.rmse = rmse(preds, truths)
    return report


def export_curves(scores, labels, out_dir, smooth_labels=None, thresholds=()):
    """CSV per curve + a summary EvalReport JSON; returns written paths."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pr_points, _ = pr_curve(scores, labels)
    roc_points, _ = roc_curve(scores, labels)
    pr_path = out / "pr_curve.csv"
    with open(pr_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "precision", "recall"])
        for pt in pr_points:
            w.writerow([pt.threshold, pt.precision, pt.recall])
    roc_path = out / "roc_curve.csv"
    with open(roc_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "fpr", "tpr"])
        for pt in roc_points:
            w.writerow([pt.threshold, pt.fpr, pt.tpr])
    report = build_report(scores, labels, smooth_labels=smooth_labels,
                          thresholds=thresholds)
    summary_path = out / "summary.json"
    summary_path.write_text(report.to_json() + "\n", encoding="utf-8")
    return [pr_path, roc_path, summary_path]
