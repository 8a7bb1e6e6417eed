"""Connected-component labeling of 3D binary masks.

Two raster passes over ``mask[z, y, x]``: the first assigns provisional
labels from already-visited neighbours and records equivalences in a
union-find forest (path compression, union by size); the second resolves
each provisional label to its root and renumbers roots in the order their
first voxel is met, which gives deterministic raster-order numbering.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import product

import numba
import numpy as np

from .volume import BinaryMask, Spacing, check_compatible


class Connectivity(enum.IntEnum):
    FACE6 = 6
    EDGE18 = 18
    VERTEX26 = 26

    @classmethod
    def parse(cls, value) -> "Connectivity":
        if isinstance(value, cls):
            return value
        if isinstance(value, str) and value.upper() in cls.__members__:
            return cls[value.upper()]
        try:
            return cls(int(value))
        except (TypeError, ValueError):
            raise ValueError(f"connectivity must be one of 6, 18, 26; got {value!r}") from None

    def offsets(self) -> list[tuple[int, int, int]]:
        """All ``(dz, dy, dx)`` neighbour offsets for this connectivity."""
        max_l1 = {6: 1, 18: 2, 26: 3}[int(self)]
        return [
            o for o in product((-1, 0, 1), repeat=3)
            if o != (0, 0, 0) and sum(map(abs, o)) <= max_l1
        ]

    def backward_offsets(self) -> np.ndarray:
        """Offsets to neighbours already visited by a z-y-x raster scan."""
        back = [o for o in self.offsets() if o < (0, 0, 0)]
        return np.array(back, dtype=np.int64)


DEFAULT_CONNECTIVITY = Connectivity.EDGE18


@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    """Per-voxel component ids plus per-component statistics.

    ``labels[z, y, x]`` is 0 on background and 1..n_components on
    foreground.  ``sizes[c - 1]`` and ``z_extent[c - 1]`` (inclusive
    ``(min_z, max_z)``) describe component ``c``.
    """

    labels: np.ndarray
    spacing: Spacing
    sizes: np.ndarray
    z_extent: np.ndarray

    @property
    def n_components(self) -> int:
        return len(self.sizes)

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.labels.shape
        return (nx, ny, nz)


@numba.njit(cache=True, nogil=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True, nogil=True)
def _union(parent, rank_size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return ra
    if rank_size[ra] < rank_size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    rank_size[ra] += rank_size[rb]
    return ra


@numba.njit(cache=True, nogil=True)
def _label_kernel(mask, offsets, labels, parent, rank_size):
    nz, ny, nx = mask.shape
    n_off = offsets.shape[0]
    n_prov = 0
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if mask[z, y, x] == 0:
                    continue
                cur = 0
                for k in range(n_off):
                    zz = z + offsets[k, 0]
                    yy = y + offsets[k, 1]
                    xx = x + offsets[k, 2]
                    # backward offsets never step past the far edge in z
                    if zz < 0 or yy < 0 or yy >= ny or xx < 0 or xx >= nx:
                        continue
                    lab = labels[zz, yy, xx]
                    if lab == 0:
                        continue
                    if cur == 0:
                        cur = lab
                    elif lab != cur:
                        cur = _union(parent, rank_size, cur, lab)
                if cur == 0:
                    n_prov += 1
                    parent[n_prov] = n_prov
                    rank_size[n_prov] = 1
                    cur = n_prov
                labels[z, y, x] = cur

    final = np.zeros(n_prov + 1, dtype=np.int32)
    sizes = np.zeros(n_prov + 1, dtype=np.int64)
    zmin = np.zeros(n_prov + 1, dtype=np.int64)
    zmax = np.zeros(n_prov + 1, dtype=np.int64)
    n_final = 0
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                lab = labels[z, y, x]
                if lab == 0:
                    continue
                root = _find(parent, lab)
                f = final[root]
                if f == 0:
                    n_final += 1
                    f = n_final
                    final[root] = f
                    zmin[f] = z
                labels[z, y, x] = f
                sizes[f] += 1
                zmax[f] = z
    return n_final, sizes, zmin, zmax


def label_array(mask: np.ndarray, conn=DEFAULT_CONNECTIVITY):
    """Label a raw ``[z, y, x]`` 0/1 array.

    Returns ``(labels, sizes, z_extent)`` with ``labels`` as int32.
    """
    conn = Connectivity.parse(conn)
    m = np.ascontiguousarray(mask)
    if m.dtype != np.uint8:
        m = (m != 0).astype(np.uint8)
    n_fg = int(np.count_nonzero(m))
    labels = np.zeros(m.shape, dtype=np.int32)
    parent = np.empty(n_fg + 1, dtype=np.int32)
    rank_size = np.empty(n_fg + 1, dtype=np.int32)
    n, sizes, zmin, zmax = _label_kernel(m, conn.backward_offsets(), labels, parent, rank_size)
    z_extent = np.stack([zmin[1:n + 1], zmax[1:n + 1]], axis=1)
    return labels, sizes[1:n + 1].copy(), z_extent


def label_components(mask: BinaryMask, conn=DEFAULT_CONNECTIVITY) -> ComponentLabeling:
    """Label the connected foreground components of ``mask``.

    >>> import numpy as np
    >>> m = np.zeros((2, 2, 2), np.uint8); m[0, 0, 0] = m[1, 1, 1] = 1
    >>> label_components(BinaryMask(m, (1, 1, 1)), 6).n_components
    2
    >>> label_components(BinaryMask(m, (1, 1, 1)), 26).n_components
    1
    """
    labels, sizes, z_extent = label_array(mask.values, conn)
    labels.flags.writeable = False
    return ComponentLabeling(labels, mask.spacing, sizes, z_extent)


def overlap_table(a: ComponentLabeling, b: BinaryMask) -> np.ndarray:
    """Count, for each component of ``a``, the voxels where ``b`` is 1.

    Entry ``c - 1`` belongs to component ``c``; a component overlaps ``b``
    iff its count is at least 1.
    """
    check_compatible(a, b)
    hit = a.labels[b.values.view(bool)]
    return np.bincount(hit, minlength=a.n_components + 1)[1:].astype(np.int64)
