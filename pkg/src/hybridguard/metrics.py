"""Confusion matrices and detection rates at binary (attack vs normal) and
multi-class granularity.

Rates with a zero denominator are reported as 0 and listed in ``degenerate``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from hybridguard import SCHEMA_VERSION
from hybridguard.errors import DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (true, predicted)
    class_names: tuple[str, ...] = ()

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self) -> str:
        names = self.class_names or tuple(str(i) for i in range(self.n_classes))
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["true\\pred", *names])
        for name, row in zip(names, self.counts.tolist()):
            writer.writerow([name, *row])
        return buffer.getvalue()


@dataclass(frozen=True)
class BinaryCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Rates:
    accuracy: float
    precision: float
    recall: float
    f1: float
    far: float
    degenerate: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "far": self.far,
            "degenerate": list(self.degenerate),
        }


def confusion_matrix(y_true, y_pred, n_classes: int, class_names=()) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise DataError("y_true and y_pred differ in length", true=int(y_true.size), pred=int(y_pred.size))
    for name, y in (("y_true", y_true), ("y_pred", y_pred)):
        if y.size and (y.min() < 0 or y.max() >= n_classes):
            raise DataError(f"{name} has a label outside 0..{n_classes - 1}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts, tuple(class_names))


def collapse_to_binary(matrix: ConfusionMatrix, normal_class: int) -> BinaryCounts:
    """Merge every non-normal class into "attack" (the positive class)."""
    c = matrix.counts
    if not 0 <= normal_class < matrix.n_classes:
        raise DataError("normal_class outside the matrix")
    tn = int(c[normal_class, normal_class])
    fp = int(c[normal_class].sum()) - tn
    fn = int(c[:, normal_class].sum()) - tn
    tp = matrix.total - tn - fp - fn
    return BinaryCounts(tp, fp, tn, fn)


def _ratio(num: float, den: float, name: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def compute_rates(counts: BinaryCounts) -> Rates:
    flags: list[str] = []
    accuracy = _ratio(counts.tp + counts.tn, counts.total, "accuracy", flags)
    precision = _ratio(counts.tp, counts.tp + counts.fp, "precision", flags)
    recall = _ratio(counts.tp, counts.tp + counts.fn, "recall", flags)
    f1 = _ratio(2 * precision * recall, precision + recall, "f1", flags)
    far = _ratio(counts.fp, counts.fp + counts.tn, "far", flags)
    return Rates(accuracy, precision, recall, f1, far, tuple(flags))


def per_class_metrics(matrix: ConfusionMatrix) -> dict[str, np.ndarray]:
    """One-vs-rest precision, recall, F1 and support for each class."""
    c = matrix.counts.astype(np.float64)
    tp = np.diag(c)
    predicted = c.sum(axis=0)
    support = c.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    return {"precision": precision, "recall": recall, "f1": f1, "support": support}


def macro_f1(matrix: ConfusionMatrix) -> float:
    return float(per_class_metrics(matrix)["f1"].mean())


def weighted_metrics(matrix: ConfusionMatrix) -> dict[str, float]:
    stats = per_class_metrics(matrix)
    support = stats["support"]
    if support.sum() == 0:
        return {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    w = support / support.sum()
    return {k: float((stats[k] * w).sum()) for k in ("precision", "recall", "f1")}


@dataclass(frozen=True)
class EvaluationReport:
    """Binary rates follow the attack-vs-normal collapse; ``table_row`` gives the
    multi-class accuracy with support-weighted precision/recall/F1 and binary FAR."""

    matrix: ConfusionMatrix
    binary_counts: BinaryCounts
    binary: Rates
    multiclass_accuracy: float
    macro_f1: float
    macro_precision: float
    macro_recall: float
    weighted: dict[str, float]
    per_class: dict[str, list[float]] = field(default_factory=dict)

    @property
    def far(self) -> float:
        return self.binary.far

    def table_row(self) -> dict[str, float]:
        return {
            "accuracy": self.multiclass_accuracy,
            "f1": self.weighted["f1"],
            "precision": self.weighted["precision"],
            "recall": self.weighted["recall"],
            "far": self.binary.far,
        }

    def to_dict(self) -> dict:
        names = self.matrix.class_names or tuple(str(i) for i in range(self.matrix.n_classes))
        b = self.binary_counts
        return {
            "schema_version": SCHEMA_VERSION,
            "class_names": list(names),
            "confusion_matrix": self.matrix.counts.tolist(),
            "binary_counts": {"tp": b.tp, "fp": b.fp, "tn": b.tn, "fn": b.fn},
            "binary": self.binary.to_dict(),
            "multiclass_accuracy": self.multiclass_accuracy,
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall, "f1": self.macro_f1},
            "weighted": dict(self.weighted),
            "per_class": {
                name: {k: self.per_class[k][i] for k in ("precision", "recall", "f1", "support")}
                for i, name in enumerate(names)
            },
        }


def evaluate(y_true, y_pred, n_classes: int, normal_class: int, class_names=()) -> EvaluationReport:
    matrix = confusion_matrix(y_true, y_pred, n_classes, class_names)
    counts = collapse_to_binary(matrix, normal_class)
    stats = per_class_metrics(matrix)
    total = matrix.total
    return EvaluationReport(
        matrix=matrix,
        binary_counts=counts,
        binary=compute_rates(counts),
        multiclass_accuracy=float(np.trace(matrix.counts) / total) if total else 0.0,
        macro_f1=float(stats["f1"].mean()),
        macro_precision=float(stats["precision"].mean()),
        macro_recall=float(stats["recall"].mean()),
        weighted=weighted_metrics(matrix),
        per_class={k: [float(v) for v in stats[k]] for k in ("precision", "recall", "f1", "support")},
    )


TABLE_COLUMNS = ("model", "accuracy", "f1", "precision", "recall", "far")


def results_table_csv(rows) -> str:
    """``rows`` are ``(model_name, EvaluationReport)``; values in percent, 2 decimals."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TABLE_COLUMNS)
    for name, report in rows:
        r = report.table_row()
        writer.writerow([name, *(f"{100 * r[k]:.2f}" for k in TABLE_COLUMNS[1:])])
    return buffer.getvalue()
