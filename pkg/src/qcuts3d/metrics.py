"""Segmentation quality metrics: Jaccard index (IoU), misclassification
error, ROC curves over a real-valued score field, and AUROC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DataError
from .segmentation import SaliencyField
from .volume import SegmentationMask

DEFAULT_THRESHOLDS = 256


@dataclass(frozen=True)
class MetricsReport:
    iou: float
    me: float
    counts: tuple[int, int, int, int]  # (TP, FP, TN, FN)
    auroc: float | None = None
    roc_points: tuple | None = None

    def to_dict(self) -> dict:
        tp, fp, tn, fn = self.counts
        d = {
            "iou": self.iou,
            "me": self.me,
            "auroc": self.auroc,
            "counts": {"tp": tp, "fp": fp, "tn": tn, "fn": fn},
        }
        if self.roc_points is not None:
            d["roc_points"] = [[float(a), float(b)] for a, b in self.roc_points]
        return d

    @staticmethod
    def csv_header() -> str:
        return "volume_id,scales,iou,auroc,me,runtime_s"

    def csv_row(self, volume_id: str, scales=(), runtime_s: float | None = None) -> str:
        scale_txt = ";".join(str(int(s)) for s in scales)
        auroc_txt = "" if self.auroc is None else f"{self.auroc:.6f}"
        runtime_txt = "" if runtime_s is None else f"{runtime_s:.3f}"
        return f"{volume_id},{scale_txt},{self.iou:.6f},{auroc_txt},{self.me:.6f},{runtime_txt}"


def _check_dims(a, b):
    if a.dims != b.dims:
        raise ArgumentError(f"dims mismatch: {a.dims} vs {b.dims}")


def confusion_counts(pred: SegmentationMask, truth: SegmentationMask):
    _check_dims(pred, truth)
    p = pred.solid
    t = truth.solid
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = p.size - tp - fp - fn
    return tp, fp, tn, fn


def jaccard(pred: SegmentationMask, truth: SegmentationMask) -> float:
    """|pred AND truth| / |pred OR truth| over solid voxels; 1 when both
    masks contain no solids at all (limit of agreement)."""
    tp, fp, _, fn = confusion_counts(pred, truth)
    union = tp + fp + fn
    return 1.0 if union == 0 else tp / union


def misclassification_error(pred: SegmentationMask, truth: SegmentationMask) -> float:
    tp, fp, tn, fn = confusion_counts(pred, truth)
    return (fp + fn) / (tp + fp + tn + fn)


def roc_curve(score, truth: SegmentationMask, n_thresholds: int = DEFAULT_THRESHOLDS):
    """ROC points for classifying solid iff score >= t over a uniform
    threshold grid on [0, 1].

    Points are ordered by descending threshold (FPR non-decreasing) with
    (0, 0) prepended; the final point at t = 0 is (1, 1).
    """
    if isinstance(score, SaliencyField):
        score = score.values
    score = np.asarray(score, dtype=np.float64)
    if n_thresholds < 2:
        raise ArgumentError("need at least 2 thresholds")
    if score.shape != truth.solid.shape:
        raise ArgumentError(f"dims mismatch: score {score.shape} vs truth {truth.solid.shape}")
    t = truth.solid.ravel()
    s = score.ravel()
    pos = np.sort(s[t])
    neg = np.sort(s[~t])
    if pos.size == 0 or neg.size == 0:
        raise DataError("ROC undefined: ground truth contains a single class")
    thresholds = np.linspace(1.0, 0.0, int(n_thresholds))
    tpr = (pos.size - np.searchsorted(pos, thresholds, side="left")) / pos.size
    fpr = (neg.size - np.searchsorted(neg, thresholds, side="left")) / neg.size
    pts = np.empty((n_thresholds + 1, 2))
    pts[0] = (0.0, 0.0)
    pts[1:, 0] = fpr
    pts[1:, 1] = tpr
    return pts


def auroc(roc_points) -> float:
    """Trapezoidal area under the ROC curve over FPR in [0, 1]."""
    pts = np.asarray(roc_points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ArgumentError("need an ordered list of (FPR, TPR) points")
    return float(np.trapezoid(pts[:, 1], pts[:, 0]))


def evaluate(pred: SegmentationMask, field, truth: SegmentationMask,
             n_thresholds: int = DEFAULT_THRESHOLDS) -> MetricsReport:
    """Assemble IoU, ME and (when a score field is given) ROC/AUROC."""
    tp, fp, tn, fn = confusion_counts(pred, truth)
    union = tp + fp + fn
    iou = 1.0 if union == 0 else tp / union
    me = (fp + fn) / (tp + fp + tn + fn)
    pts = None
    area = None
    if field is not None:
        pts = roc_curve(field, truth, n_thresholds)
        area = auroc(pts)
        pts = tuple(map(tuple, pts))
    return MetricsReport(iou=iou, me=me, counts=(tp, fp, tn, fn),
                         auroc=area, roc_points=pts)
