"""Confusion matrices and the scores derived from them.

Rows are ground truth and columns are predictions.  A score whose
denominator is zero comes back as 0 with ``degenerate`` set.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, ShapeMismatch


class Score(float):
    """A float that remembers whether its ratio had a zero denominator."""

    degenerate: bool

    def __new__(cls, value: float, degenerate: bool = False):
        obj = super().__new__(cls, value)
        obj.degenerate = degenerate
        return obj

    def __repr__(self):
        return f"Score({float(self)!r}{', degenerate' if self.degenerate else ''})"


def _ratio(num, den) -> Score:
    return Score(0.0, True) if den == 0 else Score(num / den)


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray
    class_names: tuple = ()

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeMismatch(f"confusion counts must be square, got {c.shape}")
        if np.any(c < 0):
            raise ValueError("confusion counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        names = tuple(self.class_names) or tuple(str(i) for i in range(c.shape[0]))
        if len(names) != c.shape[0]:
            raise ShapeMismatch(f"{len(names)} class names for {c.shape[0]} classes")
        object.__setattr__(self, "class_names", names)

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts, self.class_names)


def confusion(preds, labels, num_classes: int, class_names=()) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64).ravel()
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if preds.shape != labels.shape:
        raise LengthMismatch(f"{preds.size} predictions for {labels.size} labels")
    for name, v in (("prediction", preds), ("label", labels)):
        if v.size and (v.min() < 0 or v.max() >= num_classes):
            raise ValueError(f"{name} outside 0..{num_classes - 1}")
    counts = np.bincount(labels * num_classes + preds, minlength=num_classes * num_classes)
    return ConfusionMatrix(counts.reshape(num_classes, num_classes), class_names)


def accuracy(cm: ConfusionMatrix) -> Score:
    return _ratio(int(np.trace(cm.counts)), cm.total)


def sensitivity(cm: ConfusionMatrix, i: int) -> Score:
    """Recall of class ``i``."""
    return _ratio(int(cm.counts[i, i]), int(cm.counts[i].sum()))


def specificity_paper(cm: ConfusionMatrix, normal_class: int = 0) -> Score:
    """Recall of the normal class.  Not the usual true-negative rate."""
    return sensitivity(cm, normal_class)


specificity = specificity_paper


def f1(cm: ConfusionMatrix, i: int) -> Score:
    return _ratio(2 * int(cm.counts[i, i]), int(cm.counts[i].sum() + cm.counts[:, i].sum()))


def mean_f1(cm: ConfusionMatrix, subset=None) -> Score:
    idx = range(cm.num_classes) if subset is None else list(subset)
    scores = [f1(cm, i) for i in idx]
    if not scores:
        return Score(0.0, True)
    return Score(float(np.mean(scores)), any(s.degenerate for s in scores))


# --------------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class Report:
    cm: ConfusionMatrix
    normal_class: int = 0
    f1_subset: tuple | None = None

    def rows(self) -> list:
        """One row per class plus an overall row."""
        out = []
        for i, name in enumerate(self.cm.class_names):
            out.append({"class": name, "support": int(self.cm.counts[i].sum()),
                        "sensitivity": float(sensitivity(self.cm, i)), "f1": float(f1(self.cm, i))})
        out.append({"class": "overall", "support": self.cm.total,
                    "accuracy": float(accuracy(self.cm)),
                    "specificity_paper": float(specificity_paper(self.cm, self.normal_class)),
                    "mean_f1": float(mean_f1(self.cm, self.f1_subset))})
        return out

    def to_csv(self) -> str:
        fields = ["class", "support", "sensitivity", "f1", "accuracy", "specificity_paper", "mean_f1"]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def summary(self) -> str:
        cm = self.cm
        width = max(8, *(len(n) for n in cm.class_names))
        lines = [f"{'class':<{width}}  {'sens':>6}  {'F1':>6}  {'n':>6}"]
        for i, name in enumerate(cm.class_names):
            lines.append(f"{name:<{width}}  {sensitivity(cm, i):6.4f}  {f1(cm, i):6.4f}  {int(cm.counts[i].sum()):6d}")
        lines.append(f"accuracy           {accuracy(cm):.4f}")
        lines.append(f"specificity_paper  {specificity_paper(cm, self.normal_class):.4f}"
                     f"  (normal class {cm.class_names[self.normal_class]})")
        lines.append(f"mean F1            {mean_f1(cm, self.f1_subset):.4f}")
        return "\n".join(lines)


__all__ = [
    "Score", "ConfusionMatrix", "confusion", "accuracy", "sensitivity", "specificity_paper",
    "specificity", "f1", "mean_f1", "Report",
]
