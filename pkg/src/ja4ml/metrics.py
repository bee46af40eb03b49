"""Binary classification metrics with bad_bot (label 1) as the positive class."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true).ravel()
    p = np.asarray(y_pred).ravel()
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.size} labels vs {p.size} predictions")
    for name, arr in (("y_true", t), ("y_pred", p)):
        if arr.size and not np.all((arr == 0) | (arr == 1)):
            raise ValueError(f"{name} must be binary 0/1")
    t = t.astype(bool)
    p = p.astype(bool)
    return ConfusionMatrix(
        tn=int(np.sum(~t & ~p)),
        fp=int(np.sum(~t & p)),
        fn=int(np.sum(t & ~p)),
        tp=int(np.sum(t & p)),
    )


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class Prf1:
    positive: ClassMetrics
    negative: ClassMetrics
    accuracy: float
    zero_division: bool = False


def _ratio(num: int, den: int) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def _class_metrics(tp: int, fp: int, fn: int) -> tuple[ClassMetrics, bool]:
    p, f1_ = _ratio(tp, tp + fp)
    r, f2 = _ratio(tp, tp + fn)
    if p + r == 0:
        return ClassMetrics(p, r, 0.0), True
    return ClassMetrics(p, r, 2 * p * r / (p + r)), f1_ or f2


def prf1(cm: ConfusionMatrix) -> Prf1:
    """Per-class precision/recall/F1 and accuracy; any 0/0 yields 0 and sets ``zero_division``."""
    pos, z1 = _class_metrics(cm.tp, cm.fp, cm.fn)
    neg, z2 = _class_metrics(cm.tn, cm.fn, cm.fp)
    acc, z3 = _ratio(cm.tp + cm.tn, cm.total)
    return Prf1(pos, neg, acc, z1 or z2 or z3)


def roc_auc(y_true, scores) -> tuple[float, list[tuple[float, float, float]]]:
    """Rank-statistic AUC (ties count one half) and the ROC curve.

    The curve is returned as ``(threshold, fpr, tpr)`` triples, one per distinct
    score from high to low, starting at ``(inf, 0, 0)``.
    """
    y = np.asarray(y_true).ravel().astype(np.int64)
    s = np.asarray(scores, dtype=np.float64).ravel()
    if y.shape != s.shape:
        raise ValueError(f"length mismatch: {y.size} labels vs {s.size} scores")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes present")

    # Mann-Whitney U with mid-ranks, in exact integer arithmetic (ranks doubled).
    order = np.argsort(s, kind="stable")
    sorted_s = s[order]
    boundaries = np.flatnonzero(np.diff(sorted_s)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [s.size]))
    twice_rank = np.empty(s.size, dtype=np.int64)
    for a, b in zip(starts, ends):
        twice_rank[order[a:b]] = a + b + 1  # 2 * mean of ranks a+1..b
    u_twice = int(twice_rank[y == 1].sum()) - n_pos * (n_pos + 1)
    auc = u_twice / (2 * n_pos * n_neg)

    desc = np.argsort(-s, kind="stable")
    ds, dy = s[desc], y[desc]
    points = [(float("inf"), 0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < ds.size:
        j = i
        while j < ds.size and ds[j] == ds[i]:
            tp += int(dy[j])
            fp += int(1 - dy[j])
            j += 1
        points.append((float(ds[i]), fp / n_neg, tp / n_pos))
        i = j
    return auc, points


def trapezoid_auc(points) -> float:
    area = 0.0
    for (_, x0, y0), (_, x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2
    return area


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    metrics: Prf1
    auc: float
    roc_points: list = field(default_factory=list)
    importances: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "confusion": asdict(self.confusion),
            "precision": {"bad_bot": self.metrics.positive.precision, "benign": self.metrics.negative.precision},
            "recall": {"bad_bot": self.metrics.positive.recall, "benign": self.metrics.negative.recall},
            "f1": {"bad_bot": self.metrics.positive.f1, "benign": self.metrics.negative.f1},
            "accuracy": self.metrics.accuracy,
            "zero_division": self.metrics.zero_division,
            "auc": self.auc,
            "roc_points": [[fpr, tpr] for _, fpr, tpr in self.roc_points],
            "importances": [[name, gain] for name, gain in self.importances],
        }


REPORT_KEYS = ["confusion", "precision", "recall", "f1", "accuracy", "zero_division", "auc", "roc_points", "importances"]


def evaluate(y_true, scores, threshold: float = 0.5, importances=()) -> EvalReport:
    scores = np.asarray(scores, dtype=np.float64)
    cm = confusion(y_true, (scores >= threshold).astype(np.int64))
    auc, points = roc_auc(y_true, scores)
    return EvalReport(cm, prf1(cm), auc, points, list(importances))


def _text(report: EvalReport) -> str:
    cm, m = report.confusion, report.metrics
    lines = [
        "Confusion matrix (positive = bad_bot)",
        f"{'':16s}{'Pred benign':>14s}{'Pred bot':>14s}{'Total':>10s}",
        f"{'Actual benign':16s}{cm.tn:>14d}{cm.fp:>14d}{cm.tn + cm.fp:>10d}",
        f"{'Actual bot':16s}{cm.fn:>14d}{cm.tp:>14d}{cm.fn + cm.tp:>10d}",
        f"{'Total':16s}{cm.tn + cm.fn:>14d}{cm.fp + cm.tp:>14d}{cm.total:>10d}",
        "",
        f"{'Metric':12s}{'benign':>10s}{'bad_bot':>10s}",
        f"{'precision':12s}{m.negative.precision:>10.4f}{m.positive.precision:>10.4f}",
        f"{'recall':12s}{m.negative.recall:>10.4f}{m.positive.recall:>10.4f}",
        f"{'f1':12s}{m.negative.f1:>10.4f}{m.positive.f1:>10.4f}",
        f"accuracy {m.accuracy:.4f}",
        f"auc {report.auc:.4f}",
    ]
    if m.zero_division:
        lines.append("warning: some ratios had a zero denominator and were set to 0")
    if report.importances:
        lines += ["", "Feature importance (total gain)"]
        total = sum(g for _, g in report.importances) or 1.0
        for name, gain in report.importances:
            lines.append(f"  {name:20s}{gain:>16.4f}{100 * gain / total:>8.2f}%")
    return "\n".join(lines) + "\n"


def _roc_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "fpr", "tpr"])
    for thr, fpr, tpr in report.roc_points:
        w.writerow([repr(thr) if thr != float("inf") else "inf", repr(fpr), repr(tpr)])
    return buf.getvalue()


def render_report(report: EvalReport, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.to_json(), indent=1) + "\n"
    if fmt == "text":
        return _text(report)
    if fmt == "csv":
        return _roc_csv(report)
    raise ValueError(f"unknown report format {fmt!r} (expected json, text or csv)")
