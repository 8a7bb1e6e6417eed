import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_mask
from oracles import flood_fill_labels, same_partition

from lesionbench.errors import DimsMismatch
from lesionbench.labeling import Connectivity, label_components, overlap_table
from lesionbench.volume import BinaryMask

CONNS = [Connectivity.FACE6, Connectivity.EDGE18, Connectivity.VERTEX26]


def mask_of(arr, spacing=(1, 1, 1)):
    return BinaryMask(np.asarray(arr, dtype=np.uint8), spacing)


masks = arrays(
    np.uint8,
    st.tuples(*[st.integers(1, 7)] * 3),
    elements=st.integers(0, 1),
)


@pytest.mark.parametrize("conn", CONNS)
def test_empty_mask(conn):
    lab = label_components(mask_of(np.zeros((3, 4, 5))), conn)
    assert lab.n_components == 0
    assert not lab.labels.any()


def test_diagonal_pair():
    m = np.zeros((2, 2, 2))
    m[0, 0, 0] = m[1, 1, 1] = 1
    assert label_components(mask_of(m), 6).n_components == 2
    assert label_components(mask_of(m), 18).n_components == 2
    assert label_components(mask_of(m), 26).n_components == 1


def test_edge_pair_joins_at_18():
    m = np.zeros((1, 2, 2))
    m[0, 0, 0] = m[0, 1, 1] = 1
    assert label_components(mask_of(m), 6).n_components == 2
    assert label_components(mask_of(m), 18).n_components == 1


def test_offset_counts():
    assert [len(c.offsets()) for c in CONNS] == [6, 18, 26]
    assert [len(c.backward_offsets()) for c in CONNS] == [3, 9, 13]
    assert set(Connectivity.FACE6.offsets()) < set(Connectivity.EDGE18.offsets()) < set(
        Connectivity.VERTEX26.offsets()
    )


def test_parse():
    assert Connectivity.parse("18") is Connectivity.EDGE18
    assert Connectivity.parse("face6") is Connectivity.FACE6
    with pytest.raises(ValueError):
        Connectivity.parse(7)


def test_raster_order_numbering():
    m = np.zeros((3, 1, 6), np.uint8)
    m[2, 0, 0] = 1  # first in raster order only on the top slice
    m[0, 0, 4:] = 1
    m[1, 0, 1] = 1
    lab = label_components(mask_of(m), 6)
    assert lab.labels[0, 0, 4] == 1
    assert lab.labels[1, 0, 1] == 2
    assert lab.labels[2, 0, 0] == 3
    assert lab.sizes.tolist() == [2, 1, 1]
    assert lab.z_extent.tolist() == [[0, 0], [1, 1], [2, 2]]


def test_u_shape_merges_late():
    # two arms meet only at the far end; exercises the equivalence merge
    m = np.zeros((1, 5, 5), np.uint8)
    m[0, :, 0] = 1
    m[0, :, 4] = 1
    m[0, 4, :] = 1
    lab = label_components(mask_of(m), 6)
    assert lab.n_components == 1
    assert lab.sizes.tolist() == [13]


def test_z_extent_spans_slices():
    m = np.zeros((6, 2, 2), np.uint8)
    m[1:5, 0, 0] = 1
    lab = label_components(mask_of(m), 6)
    assert lab.z_extent.tolist() == [[1, 4]]


@pytest.mark.parametrize("conn", CONNS)
def test_matches_flood_fill(rng, conn):
    for _ in range(150):
        arr = random_mask(rng, max_side=10)
        lab = label_components(mask_of(arr), conn)
        ref, n = flood_fill_labels(arr, conn)
        assert lab.n_components == n
        assert same_partition(lab.labels, ref)


@settings(max_examples=150, deadline=None)
@given(masks)
def test_invariants(arr):
    counts = []
    for conn in CONNS:
        lab = label_components(mask_of(arr), conn)
        assert np.array_equal(lab.labels == 0, arr == 0)
        assert (lab.sizes >= 1).all()
        assert lab.sizes.sum() == arr.sum()
        if lab.n_components:
            assert np.array_equal(np.bincount(lab.labels.ravel())[1:], lab.sizes)
            # first voxel of each label appears in increasing label order
            flat = lab.labels.ravel()
            firsts = [int(np.argmax(flat == c)) for c in range(1, lab.n_components + 1)]
            assert firsts == sorted(firsts)
        counts.append(lab.n_components)
    assert counts[0] >= counts[1] >= counts[2]


def test_overlap_full_and_empty():
    m = np.zeros((3, 3, 3), np.uint8)
    m[0, 0, :2] = 1
    m[2, 2, 2] = 1
    lab = label_components(mask_of(m), 6)
    assert overlap_table(lab, mask_of(m)).tolist() == [2, 1]
    assert overlap_table(lab, mask_of(np.zeros_like(m))).tolist() == [0, 0]


def test_overlap_checks_grid():
    lab = label_components(mask_of(np.ones((2, 2, 2))), 6)
    with pytest.raises(DimsMismatch):
        overlap_table(lab, mask_of(np.ones((2, 2, 3))))


def test_overlap_matches_voxel_loop(rng):
    for _ in range(200):
        a = random_mask(rng, max_side=8)
        b = (rng.random(a.shape) < 0.3).astype(np.uint8)
        lab = label_components(mask_of(a), 18)
        counts = overlap_table(lab, mask_of(b))
        expected = [0] * lab.n_components
        for idx in np.ndindex(a.shape):
            if a[idx] and b[idx]:
                expected[lab.labels[idx] - 1] += 1
        assert counts.tolist() == expected
        assert counts.sum() == int(np.sum(a & b))


@pytest.mark.perf
def test_throughput_random_400x400x700():
    import time

    from lesionbench.labeling import label_array

    label_array(np.ones((2, 2, 2), np.uint8))
    rng = np.random.default_rng(3)
    m = (rng.random((700, 400, 400), dtype=np.float32) < 0.3).astype(np.uint8)
    t0 = time.perf_counter()
    label_array(m, 18)
    assert time.perf_counter() - t0 < 5.0
