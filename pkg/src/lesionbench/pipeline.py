"""Inference-time processing: 2D/3D softmax fusion, thresholding, clean-up.

The fixed order is fuse -> binarize -> postprocess.  Only the foreground
channel is carried; for two classes the background channel is its
complement, so fusing it alone is equivalent to fusing the full softmax.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import BottomExceedsGrid, InvalidThreshold
from .labeling import DEFAULT_CONNECTIVITY, Connectivity, label_array
from .volume import BinaryMask, ProbabilityMap, check_compatible

DEFAULT_ALPHA = 0.55
DEFAULT_THRESHOLD = 0.5
DEFAULT_MIN_VOXELS = 4
DEFAULT_BOTTOM_SLICES = 3


class BottomRule(str, enum.Enum):
    # drop components lying wholly inside the bottom slab
    CONTAINED = "contained"
    # drop components with any voxel in the bottom slab
    TOUCHING = "touching"


@dataclass(frozen=True)
class FusionConfig:
    alpha: float = DEFAULT_ALPHA  # weight of the 3D map

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class PostprocessConfig:
    min_component_voxels: int = DEFAULT_MIN_VOXELS
    bottom_slices: int = DEFAULT_BOTTOM_SLICES
    conn: Connectivity = field(default=DEFAULT_CONNECTIVITY)
    bottom_rule: BottomRule = BottomRule.CONTAINED

    def __post_init__(self):
        if self.min_component_voxels < 1:
            raise ValueError("min_component_voxels must be >= 1")
        if self.bottom_slices < 0:
            raise ValueError("bottom_slices must be >= 0")
        object.__setattr__(self, "conn", Connectivity.parse(self.conn))
        object.__setattr__(self, "bottom_rule", BottomRule(self.bottom_rule))


def fuse_softmax(p3d: ProbabilityMap, p2d: ProbabilityMap, cfg: FusionConfig = FusionConfig()) -> ProbabilityMap:
    """Voxel-wise ``alpha * p3d + (1 - alpha) * p2d``.

    The result is clipped to the voxel-wise ``[min, max]`` of the inputs so
    that rounding can never leave the convex hull (and equal inputs come
    back unchanged).
    """
    check_compatible(p3d, p2d)
    a, b = p3d.values, p2d.values
    alpha = cfg.alpha
    out = alpha * a + (1.0 - alpha) * b
    np.clip(out, np.minimum(a, b), np.maximum(a, b), out=out)
    return ProbabilityMap(out, p3d.spacing)


def binarize(p: ProbabilityMap, threshold: float = DEFAULT_THRESHOLD) -> BinaryMask:
    """Foreground wherever ``p >= threshold`` (ties go to foreground)."""
    if not 0.0 < threshold < 1.0:
        raise InvalidThreshold(f"threshold must lie strictly inside (0, 1), got {threshold}")
    return BinaryMask(p.values >= threshold, p.spacing)


def postprocess(mask: BinaryMask, cfg: PostprocessConfig = PostprocessConfig()) -> BinaryMask:
    """Remove bottom-slab components, then components below the size floor.

    Both rules delete whole components of the input labeling, and deleting
    one component never alters another, so the result is idempotent and a
    subset of ``mask``.
    """
    if cfg.bottom_slices >= mask.nz:
        raise BottomExceedsGrid(
            f"bottom_slices={cfg.bottom_slices} but the grid has only {mask.nz} slices"
        )
    labels, sizes, z_extent = label_array(mask.values, cfg.conn)
    n = len(sizes)
    if n == 0:
        return mask
    drop = np.zeros(n + 1, dtype=bool)
    if cfg.bottom_slices > 0:
        if cfg.bottom_rule is BottomRule.CONTAINED:
            drop[1:] |= z_extent[:, 1] < cfg.bottom_slices
        else:
            drop[1:] |= z_extent[:, 0] < cfg.bottom_slices
    drop[1:] |= sizes < cfg.min_component_voxels
    if not drop.any():
        return mask
    keep = ~drop
    keep[0] = False
    return BinaryMask(keep[labels], mask.spacing)
