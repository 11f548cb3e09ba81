"""Confusion matrices and per-class precision/recall/F1 over prediction records.

Conventions: confusion rows are true labels, columns are predictions;
0/0 metric cases (a class that was never predicted, or has no support) are
defined as 0; the weighted F1 uses support-proportional weights, which
reduces to the plain mean when supports are equal. Display rounding is
half-up to two decimals; machine outputs keep raw values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

PROB_SUM_TOL = 1e-6


class PredictionsFormatError(ValueError):
    """A predictions CSV failed validation; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class EvalRecord:
    id: str
    true_label: int
    pred_label: int
    probs: tuple[float, ...]


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # C x C int64, rows = true, cols = predicted
    class_names: tuple[str, ...]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


def validate_record(rec: EvalRecord, num_classes: int) -> list[str]:
    """Return human-readable invariant violations for one record."""
    problems = []
    if not (0 <= rec.true_label < num_classes):
        problems.append(f"true_label {rec.true_label} outside [0, {num_classes})")
    if not (0 <= rec.pred_label < num_classes):
        problems.append(f"pred_label {rec.pred_label} outside [0, {num_classes})")
    if len(rec.probs) != num_classes:
        problems.append(f"expected {num_classes} probabilities, got {len(rec.probs)}")
        return problems
    p = np.asarray(rec.probs, dtype=np.float64)
    if np.any(p < 0.0) or np.any(p > 1.0):
        problems.append("probabilities must lie in [0, 1]")
    if abs(float(p.sum()) - 1.0) > PROB_SUM_TOL:
        problems.append(f"probabilities sum to {p.sum():.6f}, not 1 +- {PROB_SUM_TOL}")
    if 0 <= rec.pred_label < num_classes and int(np.argmax(p)) != rec.pred_label:
        problems.append(
            f"pred_label {rec.pred_label} is not argmax of probabilities ({int(np.argmax(p))})"
        )
    return problems


def confusion_matrix(records, num_classes: int, class_names=None) -> ConfusionMatrix:
    """Tally records into a C x C confusion matrix (rows true, cols predicted)."""
    if class_names is None:
        class_names = tuple(f"class_{i}" for i in range(num_classes))
    if len(class_names) != num_classes:
        raise ValueError("class_names length must equal num_classes")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    for rec in records:
        if not (0 <= rec.true_label < num_classes) or not (0 <= rec.pred_label < num_classes):
            raise ValueError(
                f"record {rec.id}: labels ({rec.true_label}, {rec.pred_label}) "
                f"outside [0, {num_classes})"
            )
        counts[rec.true_label, rec.pred_label] += 1
    return ConfusionMatrix(counts=counts, class_names=tuple(class_names))


def per_class_metrics(cm: ConfusionMatrix) -> list[ClassMetrics]:
    """Precision, recall, F1 and support per class; 0/0 cases are 0."""
    counts = cm.counts
    out = []
    for c in range(cm.num_classes):
        tp = int(counts[c, c])
        fp = int(counts[:, c].sum()) - tp
        fn = int(counts[c, :].sum()) - tp
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        out.append(ClassMetrics(precision=precision, recall=recall, f1=f1, support=tp + fn))
    return out


def weighted_f1(metrics: list[ClassMetrics]) -> float:
    """Support-weighted mean of per-class F1 scores."""
    total = sum(m.support for m in metrics)
    if total <= 0:
        raise ValueError("weighted F1 needs at least one class with positive support")
    return sum(m.f1 * m.support for m in metrics) / total


def accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total()
    if total == 0:
        raise ValueError("accuracy undefined for an empty confusion matrix")
    return float(np.trace(cm.counts)) / total


def format_score(x: float) -> str:
    """Two decimals, half-up: the display convention for report tables."""
    return str(Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def evaluation_dict(cm: ConfusionMatrix) -> dict:
    """JSON-shaped evaluation bundle consumed by the report module."""
    per_class = per_class_metrics(cm)
    return {
        "class_names": list(cm.class_names),
        "confusion": cm.counts.tolist(),
        "per_class": [
            {
                "class": name,
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "support": m.support,
            }
            for name, m in zip(cm.class_names, per_class)
        ],
        "weighted_f1": weighted_f1(per_class),
        "accuracy": accuracy(cm),
    }


# ---------------------------------------------------------------------------
# predictions CSV interchange
# header: id,true_label,pred_label,p_<class0>,...,p_<classC-1>
# labels are integer class indices; the p_ columns fix the class order
# ---------------------------------------------------------------------------


def predictions_header(class_names) -> list[str]:
    return ["id", "true_label", "pred_label"] + [f"p_{c}" for c in class_names]


def write_predictions(path, records, class_names) -> None:
    from ._fsutil import write_text_atomic

    lines = [",".join(predictions_header(class_names))]
    for rec in records:
        probs = ",".join(f"{p:.17g}" for p in rec.probs)
        lines.append(f"{rec.id},{rec.true_label},{rec.pred_label},{probs}")
    write_text_atomic(path, "\n".join(lines) + "\n")


def read_predictions(path) -> tuple[list[EvalRecord], tuple[str, ...]]:
    """Parse and validate a predictions CSV.

    Raises PredictionsFormatError (with its 1-based line number) on the first
    malformed row; EvalRecord invariants are enforced here so downstream code
    can trust the records.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PredictionsFormatError(1, "empty predictions file") from None
        if header[:3] != ["id", "true_label", "pred_label"] or len(header) < 4:
            raise PredictionsFormatError(1, f"bad header: {header!r}")
        prob_cols = header[3:]
        if any(not c.startswith("p_") for c in prob_cols):
            raise PredictionsFormatError(1, "probability columns must be named p_<class>")
        class_names = tuple(c[2:] for c in prob_cols)
        num_classes = len(class_names)

        records: list[EvalRecord] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3 + num_classes:
                raise PredictionsFormatError(
                    line_no, f"expected {3 + num_classes} fields, got {len(row)}"
                )
            try:
                true_label = int(row[1])
                pred_label = int(row[2])
                probs = tuple(float(v) for v in row[3:])
            except ValueError as exc:
                raise PredictionsFormatError(line_no, f"unparsable value: {exc}") from None
            rec = EvalRecord(id=row[0], true_label=true_label, pred_label=pred_label, probs=probs)
            problems = validate_record(rec, num_classes)
            if problems:
                raise PredictionsFormatError(line_no, "; ".join(problems))
            records.append(rec)
    if not records:
        raise PredictionsFormatError(2, "no prediction rows")
    return records, class_names
