"""Evaluation metrics: box IoU, bitwise mask IoU, localization pixel errors,
and their aggregate reports."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatchError
from .masks import BinaryMask, BoundingBox, FrameMeasurement, Label, LabelMask, class_plane

#: Stabilizing constant for the bitwise IoU denominator.
DEFAULT_IOU_C = 1e-6

#: Classes scored by segmentation_eval, in report order.
EVAL_CLASSES = (Label.PUPIL, Label.IRIS, Label.SCLERA)


class MeanStd(NamedTuple):
    mean: float
    std: float


class FrameErrors(NamedTuple):
    """Per-frame localization errors, in pixels."""

    pupil_center_l2: float
    iris_center_l2: float
    pupil_rx_l1: float
    pupil_ry_l1: float
    iris_rx_l1: float
    iris_ry_l1: float


@dataclass(frozen=True)
class ErrorReport:
    """Mean and population std of each localization error over n frames."""

    pupil_center_l2: MeanStd
    iris_center_l2: MeanStd
    pupil_rx_l1: MeanStd
    pupil_ry_l1: MeanStd
    iris_rx_l1: MeanStd
    iris_ry_l1: MeanStd
    n: int


@dataclass(frozen=True)
class IoUReport:
    """Per-class and overall mean/std bitwise IoU over n mask pairs.

    The overall row averages the three class IoUs within each pair first,
    then takes mean/std across pairs.
    """

    pupil: MeanStd
    iris: MeanStd
    sclera: MeanStd
    overall: MeanStd
    n: int


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint or both empty."""
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def bitwise_iou(a: BinaryMask, b: BinaryMask, c: float = DEFAULT_IOU_C) -> float:
    """Pixelwise IoU with a stabilizing constant: sum(and) / (sum(or) + c)."""
    if a.bits.shape != b.bits.shape:
        raise DimensionMismatchError(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    inter = int(np.count_nonzero(a.bits & b.bits))
    union = int(np.count_nonzero(a.bits | b.bits))
    return inter / (union + c)


def frame_error(pred: FrameMeasurement, gt: FrameMeasurement) -> FrameErrors:
    """Six localization errors between a predicted and ground-truth frame:
    Euclidean center distances plus absolute per-axis radius differences."""
    return FrameErrors(
        pupil_center_l2=math.hypot(pred.pupil.cx - gt.pupil.cx, pred.pupil.cy - gt.pupil.cy),
        iris_center_l2=math.hypot(pred.iris.cx - gt.iris.cx, pred.iris.cy - gt.iris.cy),
        pupil_rx_l1=abs(pred.pupil.rx - gt.pupil.rx),
        pupil_ry_l1=abs(pred.pupil.ry - gt.pupil.ry),
        iris_rx_l1=abs(pred.iris.rx - gt.iris.rx),
        iris_ry_l1=abs(pred.iris.ry - gt.iris.ry),
    )


def aggregate(errors: Sequence[FrameErrors]) -> ErrorReport:
    """Per-metric arithmetic mean and population standard deviation."""
    if not errors:
        raise ValueError("cannot aggregate an empty error list")
    table = np.asarray(errors, dtype=np.float64)
    means = table.mean(axis=0)
    stds = table.std(axis=0)  # population (ddof=0)
    pairs = [MeanStd(float(m), float(s)) for m, s in zip(means, stds)]
    return ErrorReport(*pairs, n=len(errors))


def segmentation_eval(preds: Sequence[LabelMask], gts: Sequence[LabelMask]) -> IoUReport:
    """Per-class bitwise IoU between paired masks, averaged over pairs."""
    if len(preds) != len(gts):
        raise ValueError(f"got {len(preds)} predictions but {len(gts)} ground truths")
    if not preds:
        raise ValueError("cannot evaluate an empty mask list")
    per_class = np.empty((len(preds), len(EVAL_CLASSES)), dtype=np.float64)
    for i, (pred, gt) in enumerate(zip(preds, gts)):
        for j, label in enumerate(EVAL_CLASSES):
            per_class[i, j] = bitwise_iou(class_plane(pred, label), class_plane(gt, label))
    overall = per_class.mean(axis=1)
    cols = [MeanStd(float(per_class[:, j].mean()), float(per_class[:, j].std())) for j in range(3)]
    return IoUReport(
        pupil=cols[0],
        iris=cols[1],
        sclera=cols[2],
        overall=MeanStd(float(overall.mean()), float(overall.std())),
        n=len(preds),
    )


def iou_report_to_csv(report: IoUReport) -> bytes:
    """Serialize an IoUReport as CSV, rows pupil/iris/sclera/overall."""
    lines = ["class,mean_iou,std,n"]
    for name in ("pupil", "iris", "sclera", "overall"):
        ms: MeanStd = getattr(report, name)
        lines.append(f"{name},{ms.mean:.4f},{ms.std:.4f},{report.n}")
    return ("\n".join(lines) + "\n").encode("ascii")


def error_report_to_csv(report: ErrorReport) -> bytes:
    """Serialize an ErrorReport as CSV, one row per error metric."""
    lines = ["metric,mean,std,n"]
    for name in (
        "pupil_center_l2",
        "iris_center_l2",
        "pupil_rx_l1",
        "pupil_ry_l1",
        "iris_rx_l1",
        "iris_ry_l1",
    ):
        ms: MeanStd = getattr(report, name)
        lines.append(f"{name},{ms.mean:.4f},{ms.std:.4f},{report.n}")
    return ("\n".join(lines) + "\n").encode("ascii")
