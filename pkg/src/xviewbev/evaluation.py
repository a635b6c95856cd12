"""Confusion matrices, mIoU and pixel accuracy for label rasters."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass
class ConfusionMatrix:
    """Rows are ground truth, columns are predictions."""

    counts: np.ndarray

    @classmethod
    def zeros(cls, num_classes: int) -> "ConfusionMatrix":
        if num_classes < 1:
            raise ValueError("need at least one class")
        return cls(np.zeros((num_classes, num_classes), dtype=np.int64))

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.counts.shape != self.counts.shape:
            raise ValueError("cannot merge confusion matrices of different sizes")
        return ConfusionMatrix(self.counts + other.counts)


def accumulate(cm: ConfusionMatrix, gt, pred, ignore_label: Optional[int] = None) -> ConfusionMatrix:
    """Return ``cm`` plus the pixel counts of one ``(gt, pred)`` pair."""
    gt = np.asarray(gt)
    pred = np.asarray(pred)
    if gt.shape != pred.shape:
        raise ValueError(f"label rasters differ in shape: {gt.shape} vs {pred.shape}")
    k = cm.num_classes
    gt = gt.ravel().astype(np.int64)
    pred = pred.ravel().astype(np.int64)
    if ignore_label is not None:
        keep = gt != ignore_label
        gt, pred = gt[keep], pred[keep]
    bad = (gt < 0) | (gt >= k) | (pred < 0) | (pred >= k)
    if bad.any():
        labels = np.unique(np.concatenate([gt[bad], pred[bad]]))
        raise ValueError(f"labels outside [0, {k}): {labels.tolist()}")
    counts = np.bincount(gt * k + pred, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(cm.counts + counts)


def miou(cm: ConfusionMatrix):
    """Per-class IoU (NaN where undefined) and their mean over defined classes."""
    c = cm.counts.astype(np.float64)
    tp = np.diag(c)
    denom = c.sum(axis=0) + c.sum(axis=1) - tp
    per_class = np.full(cm.num_classes, np.nan)
    defined = denom > 0
    per_class[defined] = tp[defined] / denom[defined]
    # fsum: the mean must not depend on reduction order
    mean = math.fsum(per_class[defined]) / int(defined.sum()) if defined.any() else math.nan
    return per_class, mean


def accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total == 0:
        raise ValueError("confusion matrix is empty")
    return int(np.trace(cm.counts)) / total


UNDEFINED = "—"


def per_class_table(cm: ConfusionMatrix, class_names: Sequence[str]):
    """Per-class IoU percentages with the mean, as text and as a record.

    The text is a two-row table: class names across, values below, with the
    mean in the last column.
    """
    if len(class_names) != cm.num_classes:
        raise ValueError(f"{len(class_names)} names for {cm.num_classes} classes")
    per_class, mean = miou(cm)
    cells = [UNDEFINED if math.isnan(v) else f"{100 * v:.2f}" for v in per_class]
    mean_cell = UNDEFINED if math.isnan(mean) else f"{100 * mean:.2f}"
    header = list(class_names) + ["mIoU"]
    values = cells + [mean_cell]
    widths = [max(len(a), len(b)) for a, b in zip(header, values)]
    text = "\n".join(
        " | ".join(s.rjust(wd) for s, wd in zip(row, widths)) for row in (header, values)
    )
    record = {
        "classes": list(class_names),
        "iou": [None if math.isnan(v) else round(100 * v, 2) for v in per_class],
        "miou": None if math.isnan(mean) else round(100 * mean, 2),
    }
    return text, record
