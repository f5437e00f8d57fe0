import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from demri_eval.errors import InvalidGeometryError, InvalidLabelError
from demri_eval.model import (
    LABEL_CODES,
    SEL_CAVITY,
    SEL_INFARCT_PLUS_PMO,
    SEL_MYOCARDIUM_TOTAL,
    SEL_PMO,
    LabelMap,
    TissueSelector,
    Volume3D,
    region_mask,
    tissue_presence,
    voxel_volume_cm3,
)

label_arrays = hnp.arrays(np.uint8, hnp.array_shapes(min_dims=3, max_dims=3, max_side=5), elements=st.integers(0, 4))


def test_region_mask_empty_selection():
    m = LabelMap(np.zeros((3, 3, 2)))
    assert not region_mask(m, SEL_PMO).any()


def test_region_mask_full_selection():
    m = LabelMap(np.full((3, 3, 2), 2))
    assert region_mask(m, SEL_MYOCARDIUM_TOTAL).all()


def test_region_mask_set_membership():
    m = LabelMap(np.array([[2, 3], [4, 0]])[:, :, None])
    expected = np.array([[False, True], [True, False]])[:, :, None]
    np.testing.assert_array_equal(region_mask(m, SEL_INFARCT_PLUS_PMO), expected)


@pytest.mark.parametrize("spacing, expected", [
    ((2, 2, 10), 0.04),
    ((1, 1, 1), 0.001),
    ((1.25, 1.25, 10), 0.015625),
])
def test_voxel_volume(spacing, expected):
    assert voxel_volume_cm3(spacing) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("spacing", [(0, 1, 1), (1, -1, 1), (1, 1, float("nan"))])
def test_voxel_volume_rejects_bad_spacing(spacing):
    with pytest.raises(InvalidGeometryError):
        voxel_volume_cm3(spacing)


def test_presence_empty():
    case, per_slice = tissue_presence(LabelMap(np.zeros((4, 4, 3))), SEL_PMO)
    assert case is False and per_slice == [False] * 3


def test_presence_single_slice():
    lab = np.zeros((4, 4, 5), dtype=int)
    lab[1, 1, 2] = 4
    assert tissue_presence(LabelMap(lab), SEL_PMO) == (True, [False, False, True, False, False])


def test_presence_all_myocardium():
    assert tissue_presence(LabelMap(np.full((2, 2, 4), 2)), SEL_MYOCARDIUM_TOTAL) == (True, [True] * 4)


def test_labelmap_rejects_bad_code():
    with pytest.raises(InvalidLabelError, match="7"):
        LabelMap(np.array([[[0, 7]]]))


def test_volume_rejects_empty_axis():
    with pytest.raises(InvalidGeometryError):
        Volume3D(np.zeros((0, 3, 3)))


def test_volume_is_read_only():
    v = Volume3D(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        v.data[0, 0, 0] = 1


def test_selector_rejects_empty_and_invalid():
    with pytest.raises(ValueError):
        TissueSelector.of("none", [])
    with pytest.raises(InvalidLabelError):
        TissueSelector.of("bad", [9])


@given(label_arrays)
def test_union_of_disjoint_selectors(arr):
    m = LabelMap(arr)
    union = SEL_CAVITY | SEL_PMO
    np.testing.assert_array_equal(region_mask(m, union), region_mask(m, SEL_CAVITY) | region_mask(m, SEL_PMO))


@given(label_arrays)
def test_code_counts_sum_to_total(arr):
    m = LabelMap(arr)
    total = sum(int(region_mask(m, TissueSelector.of(str(c), [c])).sum()) for c in LABEL_CODES)
    assert total == arr.size


@settings(max_examples=50)
@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 5))
def test_voxel_volume_linear_in_each_axis(sx, sy, sz, k):
    base = voxel_volume_cm3((sx, sy, sz))
    assert voxel_volume_cm3((k * sx, sy, sz)) == pytest.approx(k * base, rel=1e-12)
    assert voxel_volume_cm3((sx, k * sy, sz)) == pytest.approx(k * base, rel=1e-12)
    assert voxel_volume_cm3((sx, sy, k * sz)) == pytest.approx(k * base, rel=1e-12)
