"""3D grids with physical spacing, plus mask / probability-map file I/O.

Arrays are held as ``values[z, y, x]`` in C order, so z is the slowest
(slice) axis and ``values.ravel()`` is the row-major voxel payload.  Slice
``z == 0`` is the bottom of the field of view.

Two on-disk formats are understood:

* NIfTI-1 (``.nii`` / ``.nii.gz``), reoriented to the closest canonical
  (RAS+) orientation on load so that the third voxel axis runs inferior to
  superior.
* ``LBV1`` raw volumes: a 29 byte little-endian header
  (``b"LBV1"``, u32 nx, ny, nz, f32 dx, dy, dz, u8 kind) followed by the
  payload.  Kind 0 is a u8 mask, 1 a f32 probability map, 2 a u32 label
  volume.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimsMismatch,
    MissingSpacing,
    NonBinaryMask,
    OutOfRangeProbability,
    SpacingMismatch,
    UnreadableFile,
    UnsupportedFormat,
    UnwritablePath,
)

BINARY_TOL = 1e-6
PROBABILITY_TOL = 1e-6
SPACING_TOL_MM = 1e-3

LBV_MAGIC = b"LBV1"
LBV_HEADER = struct.Struct("<4s3I3fB")
KIND_MASK, KIND_PROBABILITY, KIND_LABELS = 0, 1, 2
_PAYLOAD_DTYPES = {
    KIND_MASK: np.dtype("<u1"),
    KIND_PROBABILITY: np.dtype("<f4"),
    KIND_LABELS: np.dtype("<u4"),
}


@dataclass(frozen=True)
class Spacing:
    """Voxel edge lengths in millimetres."""

    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        for name in ("dx", "dy", "dz"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise MissingSpacing(f"spacing {name}={v!r} must be positive and finite")
            object.__setattr__(self, name, float(v))

    def voxel_volume_ml(self) -> float:
        return self.dx * self.dy * self.dz / 1000.0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)


class VolumeGrid:
    """Immutable scalar grid ``values[z, y, x]`` with voxel spacing."""

    def __init__(self, values, spacing: Spacing | tuple):
        arr = np.asarray(values)
        if arr.ndim != 3:
            raise ValueError(f"expected a 3D array, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"every dimension must be >= 1, got shape {arr.shape}")
        if not isinstance(spacing, Spacing):
            spacing = Spacing(*spacing)
        arr = arr.view()
        arr.flags.writeable = False
        self._values = arr
        self._spacing = spacing

    @classmethod
    def from_flat(cls, dims, spacing, flat):
        """Build from ``(nx, ny, nz)`` and a row-major payload (z slowest)."""
        nx, ny, nz = (int(d) for d in dims)
        flat = np.asarray(flat).ravel()
        if flat.size != nx * ny * nz:
            raise ValueError(
                f"payload holds {flat.size} values but dims {dims} need {nx * ny * nz}"
            )
        return cls(flat.reshape(nz, ny, nx), spacing)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def spacing(self) -> Spacing:
        return self._spacing

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self._values.shape
        return (nx, ny, nz)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self._values.shape

    @property
    def nz(self) -> int:
        return self._values.shape[0]

    def voxel_volume_ml(self) -> float:
        return self._spacing.voxel_volume_ml()

    def __repr__(self):
        return (
            f"{type(self).__name__}(dims={self.dims}, spacing={self._spacing.as_tuple()}, "
            f"dtype={self._values.dtype})"
        )


def _to_binary(arr: np.ndarray) -> np.ndarray:
    if arr.dtype == np.bool_:
        return arr.astype(np.uint8)
    if arr.dtype == np.uint8:
        if arr.size and arr.max() > 1:
            raise NonBinaryMask(f"mask contains value {int(arr.max())}")
        return arr
    if np.issubdtype(arr.dtype, np.integer):
        if arr.size and (arr.min() < 0 or arr.max() > 1):
            bad = arr[(arr < 0) | (arr > 1)][0]
            raise NonBinaryMask(f"mask contains value {bad}")
        return arr.astype(np.uint8)
    rounded = np.rint(arr)
    off = ~np.isfinite(arr) | (np.abs(arr - rounded) > BINARY_TOL) | (rounded < 0) | (rounded > 1)
    if off.any():
        raise NonBinaryMask(f"mask contains value {arr[off].flat[0]!r}")
    return rounded.astype(np.uint8)


class BinaryMask(VolumeGrid):
    """Grid whose voxels are exactly 0 or 1, stored as uint8."""

    def __init__(self, values, spacing):
        super().__init__(_to_binary(np.asarray(values)), spacing)

    def count(self) -> int:
        return int(np.count_nonzero(self._values))

    def volume_ml(self) -> float:
        return self.count() * self.voxel_volume_ml()


def _to_probability(arr: np.ndarray) -> np.ndarray:
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    if arr.size:
        lo, hi = arr.min(), arr.max()
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise OutOfRangeProbability("probability map contains non-finite values")
        if lo < -PROBABILITY_TOL or hi > 1 + PROBABILITY_TOL:
            bad = lo if lo < -PROBABILITY_TOL else hi
            raise OutOfRangeProbability(f"probability {float(bad)!r} outside [0, 1]")
        if lo < 0 or hi > 1:
            arr = np.clip(arr, 0, 1)
    return arr


class ProbabilityMap(VolumeGrid):
    """Foreground softmax probabilities in [0, 1].

    Values within 1e-6 of the interval are clamped; anything further out
    is rejected.  The floating dtype of the input is preserved.
    """

    def __init__(self, values, spacing):
        super().__init__(_to_probability(np.asarray(values)), spacing)


def check_compatible(a, b) -> None:
    """Raise unless ``a`` and ``b`` share dims and spacing (1e-3 mm per axis)."""
    if tuple(a.dims) != tuple(b.dims):
        raise DimsMismatch(f"dims {tuple(a.dims)} != {tuple(b.dims)}")
    for axis, u, v in zip("xyz", a.spacing.as_tuple(), b.spacing.as_tuple()):
        if abs(u - v) > SPACING_TOL_MM:
            raise SpacingMismatch(f"spacing along {axis}: {u} mm != {v} mm")


# --------------------------------------------------------------------------- I/O

def _is_nifti_name(path: Path) -> bool:
    name = path.name.lower()
    return name.endswith(".nii") or name.endswith(".nii.gz")


def _read_lbv(raw: bytes, path: Path):
    if len(raw) < LBV_HEADER.size:
        raise UnreadableFile(f"{path}: truncated LBV1 header")
    _, nx, ny, nz, dx, dy, dz, kind = LBV_HEADER.unpack_from(raw)
    if kind not in _PAYLOAD_DTYPES:
        raise UnsupportedFormat(f"{path}: unknown LBV1 kind byte {kind}")
    if min(nx, ny, nz) < 1:
        raise UnreadableFile(f"{path}: dims ({nx}, {ny}, {nz}) must be >= 1")
    dtype = _PAYLOAD_DTYPES[kind]
    payload = raw[LBV_HEADER.size:]
    expected = nx * ny * nz * dtype.itemsize
    if len(payload) != expected:
        raise UnreadableFile(
            f"{path}: dims ({nx}, {ny}, {nz}) need {expected} payload bytes, found {len(payload)}"
        )
    values = np.frombuffer(payload, dtype=dtype).reshape(nz, ny, nx)
    try:
        spacing = Spacing(dx, dy, dz)
    except MissingSpacing as exc:
        raise MissingSpacing(f"{path}: {exc}") from None
    return values, spacing, kind


def _raw_pixdim(path: Path) -> tuple[float, float, float]:
    """pixdim[1:4] straight from the header; nibabel would silently repair zeros."""
    import gzip

    try:
        with open(path, "rb") as fh:
            gz = fh.read(2) == b"\x1f\x8b"
        with (gzip.open if gz else open)(path, "rb") as fh:
            hdr = fh.read(348)
    except (OSError, EOFError) as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    if len(hdr) < 348:
        raise UnreadableFile(f"{path}: truncated NIfTI header")
    for endian in "<>":
        if struct.unpack_from(endian + "i", hdr, 0)[0] == 348:
            return struct.unpack_from(endian + "3f", hdr, 80)
    raise UnreadableFile(f"{path}: not a NIfTI-1 header")


def _read_nifti(path: Path):
    import nibabel as nib

    pixdim = _raw_pixdim(path)
    if not all(math.isfinite(z) and z > 0 for z in pixdim):
        raise MissingSpacing(f"{path}: pixdim {pixdim} is not a valid spacing")

    try:
        img = nib.load(str(path))
    except Exception as exc:  # nibabel raises a zoo of types for bad headers
        raise UnreadableFile(f"{path}: {exc}") from exc
    if not isinstance(img, nib.Nifti1Image):
        raise UnsupportedFormat(f"{path}: not a NIfTI-1 image")
    shape = img.shape
    if len(shape) > 3 and all(s == 1 for s in shape[3:]):
        data = np.asanyarray(img.dataobj).reshape(shape[:3])
        header = img.header.copy()
        header.set_data_shape(shape[:3])
        img = nib.Nifti1Image(data, img.affine, header)
    if len(img.shape) != 3:
        raise UnsupportedFormat(f"{path}: expected a 3D image, got shape {shape}")
    img = nib.as_closest_canonical(img)
    try:
        data = np.asanyarray(img.dataobj)
    except Exception as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    spacing = Spacing(*(float(z) for z in img.header.get_zooms()[:3]))
    return np.ascontiguousarray(data.transpose(2, 1, 0)), spacing


def load_volume(path, kind: str = "mask"):
    """Load a mask (``kind="mask"``) or probability map (``kind="probability"``)."""
    if kind not in ("mask", "probability"):
        raise ValueError(f"kind must be 'mask' or 'probability', not {kind!r}")
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(4)
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc.strerror or exc}") from exc

    if head == LBV_MAGIC:
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise UnreadableFile(f"{path}: {exc.strerror or exc}") from exc
        values, spacing, file_kind = _read_lbv(raw, path)
        if file_kind == KIND_LABELS:
            raise UnsupportedFormat(f"{path}: label volumes cannot be loaded as {kind}")
    elif head[:2] == b"\x1f\x8b" or _is_nifti_name(path):
        values, spacing = _read_nifti(path)
    else:
        raise UnsupportedFormat(f"{path}: neither LBV1 nor NIfTI-1")

    cls = BinaryMask if kind == "mask" else ProbabilityMap
    try:
        return cls(values, spacing)
    except (NonBinaryMask, OutOfRangeProbability) as exc:
        raise type(exc)(f"{path}: {exc}") from None


def _write(path: Path, grid: VolumeGrid, kind: int, array: np.ndarray) -> None:
    try:
        if _is_nifti_name(path):
            import nibabel as nib

            dx, dy, dz = grid.spacing.as_tuple()
            img = nib.Nifti1Image(
                np.asarray(array).transpose(2, 1, 0), np.diag([dx, dy, dz, 1.0])
            )
            img.header.set_data_dtype(array.dtype)
            img.header.set_xyzt_units("mm")
            nib.save(img, str(path))
        else:
            nx, ny, nz = grid.dims
            header = LBV_HEADER.pack(LBV_MAGIC, nx, ny, nz, *grid.spacing.as_tuple(), kind)
            with open(path, "wb") as fh:
                fh.write(header)
                fh.write(np.ascontiguousarray(array, dtype=_PAYLOAD_DTYPES[kind]).tobytes())
    except OSError as exc:
        raise UnwritablePath(f"{path}: {exc.strerror or exc}") from exc


def save_mask(mask: BinaryMask, path) -> None:
    """Write a mask as uint8 (LBV1 unless the name ends in .nii / .nii.gz)."""
    _write(Path(path), mask, KIND_MASK, mask.values.astype(np.uint8, copy=False))


def save_probability(prob: ProbabilityMap, path) -> None:
    """Write a probability map as float32."""
    _write(Path(path), prob, KIND_PROBABILITY, prob.values.astype(np.float32, copy=False))


def save_labels(labels: np.ndarray, spacing: Spacing, path) -> None:
    """Debug export of a label volume (uint32 payload, LBV1 kind 2 or NIfTI)."""
    arr = np.asarray(labels).astype(np.uint32, copy=False)
    _write(Path(path), VolumeGrid(arr, spacing), KIND_LABELS, arr)


def load_labels(path) -> tuple[np.ndarray, Spacing]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc.strerror or exc}") from exc
    if raw[:4] != LBV_MAGIC:
        raise UnsupportedFormat(f"{path}: label volumes are read from LBV1 files only")
    values, spacing, kind = _read_lbv(raw, path)
    if kind != KIND_LABELS:
        raise UnsupportedFormat(f"{path}: LBV1 kind {kind} is not a label volume")
    return values, spacing
