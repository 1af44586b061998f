"""Confusion matrices, per-class and macro metrics, and fold aggregation
with Student-t confidence intervals."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import CLASS_NAMES

N_CLASSES = 3
SUMMARY_METRICS = ("precision", "recall", "f1", "accuracy")

# two-sided 95% quantiles t(0.975, df)
T_975 = {
    1: 12.7062047364, 2: 4.3026527297, 3: 3.1824463053, 4: 2.7764451052,
    5: 2.5705818356, 6: 2.4469118511, 7: 2.3646242516, 8: 2.3060041352,
    9: 2.2621571629, 10: 2.2281388520, 11: 2.2009851601, 12: 2.1788128297,
    13: 2.1603686565, 14: 2.1447866879, 15: 2.1314495456, 16: 2.1199052992,
    17: 2.1098155778, 18: 2.1009220402, 19: 2.0930240544, 20: 2.0859634473,
    21: 2.0796138447, 22: 2.0738730679, 23: 2.0686576104, 24: 2.0638985616,
    25: 2.0595385528, 26: 2.0555294386, 27: 2.0518305165, 28: 2.0484071418,
    29: 2.0452296421,
}


def t_quantile_975(df: int) -> float:
    if df < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if df in T_975:
        return T_975[df]
    from scipy.stats import t

    return float(t.ppf(0.975, df))


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, cols = predicted class

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(preds: Sequence[int], labels: Sequence[int]) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape:
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(labels)} labels")
    if preds.size == 0:
        raise ValueError("no predictions to evaluate")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    return ConfusionMatrix(counts)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


@dataclass
class MetricsReport:
    per_class: dict[str, tuple[float, float, float]]
    macro: tuple[float, float, float]
    accuracy: float

    def summary(self) -> dict[str, float]:
        p, r, f = self.macro
        return {"precision": p, "recall": r, "f1": f, "accuracy": self.accuracy}

    def to_dict(self) -> dict:
        return {
            "per_class": {c: dict(zip(("precision", "recall", "f1"), v)) for c, v in self.per_class.items()},
            **self.summary(),
        }


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """One-vs-rest precision/recall/F1 per class, their unweighted means, and
    multiclass accuracy ``trace / total``. A ratio with a zero denominator is 0."""
    c = np.asarray(cm.counts)
    total = c.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    per_class = {}
    for i, name in enumerate(CLASS_NAMES):
        tp = c[i, i]
        p = _ratio(tp, c[:, i].sum())
        r = _ratio(tp, c[i, :].sum())
        f = _ratio(2 * p * r, p + r)
        per_class[name] = (float(p), float(r), float(f))
    macro = tuple(float(np.mean([v[j] for v in per_class.values()])) for j in range(3))
    return MetricsReport(per_class, macro, float(np.trace(c) / total))


def evaluate_predictions(preds, labels) -> MetricsReport:
    return metrics(confusion(preds, labels))


@dataclass
class Interval:
    mean: float
    std: float
    low: float
    high: float

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "ci95": [self.low, self.high]}


def mean_ci(values: Sequence[float]) -> Interval:
    v = np.asarray(values, dtype=np.float64)
    n = len(v)
    if n < 2:
        raise ValueError("a confidence interval needs at least 2 folds")
    mean = float(v.mean())
    std = float(v.std(ddof=1))
    half = t_quantile_975(n - 1) * std / math.sqrt(n)
    # guard against rounding pushing a zero-width bound past the mean
    return Interval(mean, std, min(mean - half, mean), max(mean + half, mean))


@dataclass
class AggregateReport:
    summary: dict[str, Interval]
    per_fold: dict[str, list[float]]
    per_class: dict[str, dict[str, Interval]] = field(default_factory=dict)

    @property
    def n_folds(self) -> int:
        return len(next(iter(self.per_fold.values())))

    def to_dict(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "summary": {k: v.to_dict() for k, v in self.summary.items()},
            "per_class": {c: {m: iv.to_dict() for m, iv in d.items()} for c, d in self.per_class.items()},
            "per_fold": self.per_fold,
        }


def aggregate(reports: Sequence[MetricsReport]) -> AggregateReport:
    if len(reports) < 2:
        raise ValueError("aggregation needs at least 2 folds")
    per_fold = {m: [r.summary()[m] for r in reports] for m in SUMMARY_METRICS}
    summary = {m: mean_ci(v) for m, v in per_fold.items()}
    per_class = {
        c: {m: mean_ci([r.per_class[c][j] for r in reports]) for j, m in enumerate(("precision", "recall", "f1"))}
        for c in CLASS_NAMES
    }
    return AggregateReport(summary, per_fold, per_class)


def write_report(agg: AggregateReport, path: str | Path, extra: dict | None = None) -> None:
    doc = agg.to_dict()
    doc.update(extra or {})
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def write_folds_csv(agg: AggregateReport, path: str | Path) -> None:
    """Long-format ``fold,metric,value`` rows for box plots."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fold", "metric", "value"])
        for metric, values in agg.per_fold.items():
            for fold, value in enumerate(values):
                w.writerow([fold, metric, repr(value)])
