"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the package's labeling or metric code.
"""
from collections import deque
from itertools import product

import numpy as np


def neighbour_offsets(conn):
    """All (dz, dy, dx) with max |d| == 1 and number of nonzero axes bounded."""
    nonzero_max = {6: 1, 18: 2, 26: 3}[int(conn)]
    return [
        d for d in product((-1, 0, 1), repeat=3)
        if any(d) and sum(1 for v in d if v) <= nonzero_max
    ]


def flood_fill_labels(mask, conn):
    """Breadth-first flood fill. Returns (labels, n) with arbitrary numbering."""
    mask = np.asarray(mask) != 0
    nz, ny, nx = mask.shape
    offsets = neighbour_offsets(conn)
    labels = np.zeros(mask.shape, dtype=np.int64)
    n = 0
    for start in zip(*np.nonzero(mask)):
        if labels[start]:
            continue
        n += 1
        labels[start] = n
        queue = deque([start])
        while queue:
            z, y, x = queue.popleft()
            for dz, dy, dx in offsets:
                q = (z + dz, y + dy, x + dx)
                if 0 <= q[0] < nz and 0 <= q[1] < ny and 0 <= q[2] < nx and mask[q] and not labels[q]:
                    labels[q] = n
                    queue.append(q)
    return labels, n


def same_partition(labels_a, labels_b):
    """True iff the two labelings agree on background and group voxels identically."""
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if not np.array_equal(a == 0, b == 0):
        return False
    fg = a != 0
    pairs = set(zip(a[fg].tolist(), b[fg].tolist()))
    return len(pairs) == len(set(a[fg].tolist())) == len(set(b[fg].tolist()))


def brute_dice(pred, gt):
    pred = np.asarray(pred).ravel().tolist()
    gt = np.asarray(gt).ravel().tolist()
    n_gt = sum(gt)
    if n_gt == 0:
        return None
    inter = sum(1 for p, g in zip(pred, gt) if p and g)
    return 2 * inter / (sum(pred) + n_gt)


def brute_unmatched_volume(source, other, conn, voxel_ml):
    """Volume of flood-fill components of ``source`` with no voxel in ``other``."""
    labels, n = flood_fill_labels(source, conn)
    other = np.asarray(other) != 0
    total = 0
    for c in range(1, n + 1):
        voxels = list(zip(*np.nonzero(labels == c)))
        if not any(other[v] for v in voxels):
            total += len(voxels)
    return total * voxel_ml
