"""Benchmark metrics and method comparison tables.

Per-class accuracy is recall; the case-weighted overall accuracy and the
unweighted macro accuracy are both reported because they genuinely differ
under class imbalance. F1 comes in macro and support-weighted flavors.
Termination behavior is summarized by a histogram over steps taken.
"""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import EmptyRecords

# columns of the comparison table, in emission order
_SCALAR_METRICS = (
    "overall_accuracy",
    "macro_accuracy",
    "macro_f1",
    "weighted_f1",
    "mean_tests_per_case",
)
# for every metric except this one, larger is better
_MIN_IS_BEST = ("mean_tests_per_case",)


@dataclass(frozen=True)
class MetricsReport:
    per_class_accuracy: tuple[float, ...]
    overall_accuracy: float
    macro_accuracy: float
    macro_f1: float
    weighted_f1: float
    termination_histogram: dict          # steps -> count
    mean_tests_per_case: float
    n_cases: int

    def to_dict(self) -> dict:
        return {
            "per_class_accuracy": list(self.per_class_accuracy),
            "overall_accuracy": self.overall_accuracy,
            "macro_accuracy": self.macro_accuracy,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "termination_histogram": {str(k): v for k, v in
                                      sorted(self.termination_histogram.items())},
            "mean_tests_per_case": self.mean_tests_per_case,
            "n_cases": self.n_cases,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        return cls(
            per_class_accuracy=tuple(float(a) for a in data["per_class_accuracy"]),
            overall_accuracy=float(data["overall_accuracy"]),
            macro_accuracy=float(data["macro_accuracy"]),
            macro_f1=float(data["macro_f1"]),
            weighted_f1=float(data["weighted_f1"]),
            termination_histogram={int(k): int(v) for k, v in
                                   data["termination_histogram"].items()},
            mean_tests_per_case=float(data["mean_tests_per_case"]),
            n_cases=int(data["n_cases"]),
        )


def compute_metrics(records, num_classes: int) -> MetricsReport:
    """Fold a record list into a MetricsReport; a pure function of the counts."""
    if not records:
        raise EmptyRecords("no episode records")
    n = len(records)
    support = np.zeros(num_classes)
    correct = np.zeros(num_classes)
    predicted = np.zeros(num_classes)
    for r in records:
        support[r.true_label] += 1
        predicted[r.predicted] += 1
        if r.predicted == r.true_label:
            correct[r.true_label] += 1

    recall = np.divide(correct, support, out=np.zeros(num_classes), where=support > 0)
    precision = np.divide(correct, predicted, out=np.zeros(num_classes),
                          where=predicted > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(num_classes),
                   where=denom > 0)

    steps = Counter(r.steps_taken for r in records)
    return MetricsReport(
        per_class_accuracy=tuple(float(a) for a in recall),
        overall_accuracy=float(correct.sum() / n),
        macro_accuracy=float(recall.mean()),
        macro_f1=float(f1.mean()),
        weighted_f1=float((f1 * support).sum() / n),
        termination_histogram=dict(sorted(steps.items())),
        mean_tests_per_case=float(sum(r.steps_taken for r in records) / n),
        n_cases=n,
    )


@dataclass(frozen=True)
class ComparisonTable:
    """Aligned method-by-metric table with strict-best flags per column."""

    names: tuple[str, ...]
    metric_names: tuple[str, ...]
    values: np.ndarray          # (methods, metrics)
    best: np.ndarray            # bool, same shape; True only for a unique best

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("method," + ",".join(self.metric_names) + "\n")
        for i, name in enumerate(self.names):
            cells = [
                f"{self.values[i, j]:.6f}" + ("*" if self.best[i, j] else "")
                for j in range(len(self.metric_names))
            ]
            out.write(name + "," + ",".join(cells) + "\n")
        return out.getvalue()

    def to_text(self) -> str:
        header = ["method"] + list(self.metric_names)
        rows = [header]
        for i, name in enumerate(self.names):
            row = [name]
            for j in range(len(self.metric_names)):
                row.append(f"{self.values[i, j]:.4f}" + ("*" if self.best[i, j] else " "))
            rows.append(row)
        widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                 for row in rows]
        return "\n".join(lines) + "\n"


def compare_reports(named_reports) -> ComparisonTable:
    """Align >= 2 named reports over their shared metrics, flag strict bests.

    `named_reports` is a sequence of (name, MetricsReport) pairs; row order
    follows the input. Per-class accuracy columns appear when every report
    has the same class count.
    """
    named_reports = list(named_reports)
    if len(named_reports) < 2:
        raise ValueError("need at least 2 reports to compare")
    names = tuple(name for name, _ in named_reports)
    reports = [rep for _, rep in named_reports]

    metric_names = list(_SCALAR_METRICS)
    class_counts = {len(r.per_class_accuracy) for r in reports}
    if len(class_counts) == 1:
        k = class_counts.pop()
        metric_names += [f"acc_class_{i}" for i in range(k)]

    values = np.zeros((len(reports), len(metric_names)))
    for i, rep in enumerate(reports):
        for j, metric in enumerate(metric_names):
            if metric.startswith("acc_class_"):
                values[i, j] = rep.per_class_accuracy[int(metric.rsplit("_", 1)[1])]
            else:
                values[i, j] = getattr(rep, metric)

    best = np.zeros_like(values, dtype=bool)
    for j, metric in enumerate(metric_names):
        col = values[:, j]
        target = col.min() if metric in _MIN_IS_BEST else col.max()
        winners = np.flatnonzero(col == target)
        if len(winners) == 1:     # ties get no flag
            best[winners[0], j] = True
    return ComparisonTable(names=names, metric_names=tuple(metric_names),
                           values=values, best=best)


def histogram_csv(named_reports) -> str:
    """Plot-data CSV: one `method,steps,count` row per (method, step count)."""
    lines = ["method,steps,count"]
    for name, report in named_reports:
        for steps, count in sorted(report.termination_histogram.items()):
            lines.append(f"{name},{steps},{count}")
    return "\n".join(lines) + "\n"
