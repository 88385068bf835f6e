"""Segmentation and size-accuracy metrics.

Confusion-matrix based mIoU and Dice, relative size error (RE) and its
dataset mean (mRE), and per-class RE histograms normalized by the image
count of each class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_BIN_WIDTH = 0.025
DEFAULT_NUM_BINS = 40          # covers [0, 100%) plus one overflow bin


@dataclass(eq=False)
class ConfusionMatrix:
    """K x K pixel counts; rows are ground truth, columns are predictions."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("confusion matrix must be square")
        if c.min() < 0:
            raise ValueError("counts must be nonnegative")
        self.counts = c

    @classmethod
    def empty(cls, num_classes: int) -> "ConfusionMatrix":
        return cls(np.zeros((num_classes, num_classes), dtype=np.int64))

    @classmethod
    def from_masks(cls, gt: np.ndarray, pred: np.ndarray,
                   num_classes: int) -> "ConfusionMatrix":
        g = np.asarray(gt).reshape(-1)
        p = np.asarray(pred).reshape(-1)
        if g.shape != p.shape:
            raise ValueError("ground truth and prediction disagree on size")
        if g.min() < 0 or g.max() >= num_classes or p.min() < 0 or p.max() >= num_classes:
            raise ValueError("class id out of range")
        flat = np.bincount(g * num_classes + p, minlength=num_classes * num_classes)
        return cls(flat.reshape(num_classes, num_classes))

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def tp_fp_fn(self):
        tp = np.diag(self.counts).astype(np.float64)
        fp = self.counts.sum(axis=0) - tp
        fn = self.counts.sum(axis=1) - tp
        return tp, fp, fn


def miou(cm: ConfusionMatrix) -> float:
    """Mean IoU over classes present in GT or prediction; others excluded."""
    tp, fp, fn = cm.tp_fp_fn()
    union = tp + fp + fn
    present = union > 0
    if not present.any():
        raise ValueError("no class present in either ground truth or prediction")
    return float(np.mean(tp[present] / union[present]))


def dice(cm: ConfusionMatrix) -> float:
    """Mean Dice over foreground classes; empty-on-both-sides classes excluded."""
    tp, fp, fn = cm.tp_fp_fn()
    denom = 2 * tp + fp + fn
    fg = np.zeros(cm.num_classes, dtype=bool)
    fg[1:] = True
    present = fg & (denom > 0)
    if not present.any():
        raise ValueError("no foreground class present")
    return float(np.mean(2 * tp[present] / denom[present]))


def relative_error(v_k: float, v_hat_k: float) -> float:
    """|v - v_hat| / v_hat for one class of one image; v_hat must be positive."""
    if not v_hat_k > 0:
        raise ValueError("relative error needs a positive reference size")
    return abs(v_k - v_hat_k) / v_hat_k


def mre(pairs) -> float:
    """Mean relative error over all (working, exact) pairs and present classes.

    pairs yields (v, v_hat) CategoricalDist pairs; a class counts as
    present when its exact fraction is positive.
    """
    total, count = 0.0, 0
    for v, v_hat in pairs:
        for k in v_hat.support():
            total += relative_error(float(v.probs[k]), float(v_hat.probs[k]))
            count += 1
    if count == 0:
        raise ValueError("no present classes to average over")
    return total / count


@dataclass(eq=False)
class REHistogram:
    """Per-class relative-error histogram, normalized by per-class image count.

    Bins are [i*w, (i+1)*w) for i < num_bins plus a final overflow bin
    catching everything at or beyond num_bins*w.
    """

    num_classes: int
    bin_width: float = DEFAULT_BIN_WIDTH
    num_bins: int = DEFAULT_NUM_BINS
    counts: np.ndarray = field(init=False)
    class_totals: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.num_classes < 1 or self.num_bins < 1 or self.bin_width <= 0:
            raise ValueError("invalid histogram shape")
        self.counts = np.zeros((self.num_classes, self.num_bins + 1), dtype=np.int64)
        self.class_totals = np.zeros(self.num_classes, dtype=np.int64)

    def add(self, class_id: int, re_value: float) -> None:
        if not (0 <= class_id < self.num_classes):
            raise ValueError("class id out of range")
        if re_value < 0:
            raise ValueError("relative error is nonnegative")
        b = min(int(re_value / self.bin_width), self.num_bins)
        self.counts[class_id, b] += 1
        self.class_totals[class_id] += 1

    def normalized(self) -> np.ndarray:
        """Rows sum to 1 for every class that has at least one entry."""
        out = np.zeros(self.counts.shape, dtype=np.float64)
        nz = self.class_totals > 0
        out[nz] = self.counts[nz] / self.class_totals[nz, None]
        return out

    def bin_edges(self) -> np.ndarray:
        return np.arange(self.num_bins + 1) * self.bin_width

    def to_dict(self) -> dict:
        return {
            "bin_width": self.bin_width,
            "num_bins": self.num_bins,
            "counts": self.counts.tolist(),
            "class_totals": self.class_totals.tolist(),
        }
