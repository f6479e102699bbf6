"""Confusion matrices, mIoU and depth RMSE."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable

import numpy as np

from .losses import depth_mse
from .raster import check_same_shape


class ConfusionMatrix:
    """Pixel counts indexed ``[gt, pred]`` for class ids ``0..L``.

    Row 0 stays empty because void ground truth is never counted; column 0
    collects pixels predicted as void, which count as misses for their
    ground-truth class.
    """

    def __init__(self, num_classes: int, counts: np.ndarray | None = None):
        self.num_classes = num_classes
        size = num_classes + 1
        self.counts = np.zeros((size, size), np.int64) if counts is None else np.array(counts, dtype=np.int64)
        if self.counts.shape != (size, size):
            raise ValueError(f"counts must be {size}x{size}")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accumulate(self, pred: np.ndarray, gt: np.ndarray, ignore: Iterable[int] = ()) -> "ConfusionMatrix":
        pred = np.asarray(pred)
        gt = np.asarray(gt)
        check_same_shape(pred, gt)
        keep = gt != 0
        ignore = list(ignore)
        if ignore:
            keep &= ~np.isin(gt, ignore)
        size = self.num_classes + 1
        g = gt[keep].astype(np.int64)
        p = pred[keep].astype(np.int64)
        if g.size and (g.max() >= size or p.max() >= size):
            raise ValueError(f"label ids exceed the class count {self.num_classes}")
        self.counts += np.bincount(g * size + p, minlength=size * size).reshape(size, size)
        return self

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise ValueError("class counts differ")
        return ConfusionMatrix(self.num_classes, self.counts + other.counts)

    def _ratios(self) -> dict[int, Fraction]:
        cm = self.counts
        tp = np.diag(cm)
        fp = cm.sum(axis=0) - tp
        fn = cm.sum(axis=1) - tp
        out = {}
        for c in range(1, self.num_classes + 1):
            union = tp[c] + fp[c] + fn[c]
            if union > 0:
                out[c] = Fraction(int(tp[c]), int(union))
        return out

    def per_class_iou(self) -> dict[int, float]:
        """IoU of every class with a non-empty union."""
        return {c: float(v) for c, v in self._ratios().items()}

    def miou(self) -> float:
        ious = self._ratios()
        if not ious:
            raise ValueError("confusion matrix holds no counts")
        # exact mean of exact ratios, rounded once
        return float(sum(ious.values()) / len(ious))


def accumulate(cm: ConfusionMatrix, pred, gt, ignore: Iterable[int] = ()) -> ConfusionMatrix:
    return cm.accumulate(pred, gt, ignore)


def miou(cm: ConfusionMatrix) -> float:
    return cm.miou()


def depth_rmse(pred: np.ndarray, gt: np.ndarray, valid: np.ndarray | None = None) -> float:
    return math.sqrt(depth_mse(pred, gt, valid))
