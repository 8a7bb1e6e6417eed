"""Per-study lesion segmentation metrics: foreground Dice, FPV and FNV.

FPV sums the volume of predicted components that share no voxel with the
ground truth; FNV sums the volume of ground-truth components that share no
voxel with the prediction.  Volumes are accumulated as integer voxel counts
and converted to millilitres once.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .labeling import DEFAULT_CONNECTIVITY, label_components, overlap_table
from .volume import BinaryMask, check_compatible


@dataclass(frozen=True)
class StudyMetrics:
    dsc: float | None  # None when the ground truth is empty
    fpv_ml: float
    fnv_ml: float
    gt_positive: bool

    def to_dict(self) -> dict:
        return asdict(self)


def dice_score(pred: BinaryMask, gt: BinaryMask) -> float | None:
    check_compatible(pred, gt)
    n_gt = gt.count()
    if n_gt == 0:
        return None
    inter = int(np.count_nonzero(pred.values & gt.values))
    return 2.0 * inter / (pred.count() + n_gt)


def _unmatched_voxels(source: BinaryMask, other: BinaryMask, conn) -> int:
    """Voxels of ``source`` components that never touch ``other``."""
    check_compatible(source, other)
    if not source.values.any():
        return 0
    comps = label_components(source, conn)
    overlap = overlap_table(comps, other)
    return int(comps.sizes[overlap == 0].sum())


def false_positive_volume(pred: BinaryMask, gt: BinaryMask, conn=DEFAULT_CONNECTIVITY) -> float:
    return _unmatched_voxels(pred, gt, conn) * pred.voxel_volume_ml()


def false_negative_volume(pred: BinaryMask, gt: BinaryMask, conn=DEFAULT_CONNECTIVITY) -> float:
    return _unmatched_voxels(gt, pred, conn) * gt.voxel_volume_ml()


def evaluate_study(pred: BinaryMask, gt: BinaryMask, conn=DEFAULT_CONNECTIVITY) -> StudyMetrics:
    dsc = dice_score(pred, gt)
    return StudyMetrics(
        dsc=dsc,
        fpv_ml=false_positive_volume(pred, gt, conn),
        fnv_ml=false_negative_volume(pred, gt, conn),
        gt_positive=dsc is not None,
    )
