from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from demri_eval.errors import DegenerateSliceWarning
from demri_eval.model import LabelMap, Volume3D
from demri_eval.preprocess import align_slices, center_crop, resample_inplane, slice_shifts, zscore_slice


def test_zscore_known_values():
    v = Volume3D(np.array([[1.0, 2.0, 3.0]])[:, :, None])
    np.testing.assert_allclose(zscore_slice(v).data[0, :, 0], [-1.2247, 0, 1.2247], atol=1e-4)


def test_zscore_constant_slice_warns():
    v = Volume3D(np.stack([np.full((3, 3), 5.0), np.arange(9.0).reshape(3, 3)], axis=2))
    with pytest.warns(DegenerateSliceWarning):
        out = zscore_slice(v)
    assert not out.data[:, :, 0].any()
    assert out.data[:, :, 1].std() == pytest.approx(1.0)


slices = hnp.arrays(np.float64, (6, 5, 3), elements=st.floats(-1e3, 1e3, allow_nan=False))


@settings(max_examples=60)
@given(slices)
def test_zscore_moments_and_idempotence(arr):
    arr = arr + np.arange(30).reshape(6, 5, 1) * 1e-2  # keep slices non-constant
    once = zscore_slice(Volume3D(arr))
    np.testing.assert_allclose(once.data.mean(axis=(0, 1)), 0, atol=1e-6)
    np.testing.assert_allclose(once.data.std(axis=(0, 1)), 1, atol=1e-6)
    np.testing.assert_allclose(zscore_slice(once).data, once.data, atol=1e-6)


def test_crop_6_to_4_keeps_middle():
    a = np.arange(36.0).reshape(6, 6, 1)
    np.testing.assert_array_equal(center_crop(Volume3D(a), 4, 4).data, a[1:5, 1:5])


def test_crop_identity():
    a = np.random.default_rng(0).normal(size=(5, 7, 2))
    np.testing.assert_array_equal(center_crop(Volume3D(a), 5, 7).data, a)


def test_crop_pads_with_zero_border():
    a = np.ones((3, 3, 1))
    out = center_crop(Volume3D(a), 5, 5).data[:, :, 0]
    assert out[1:4, 1:4].all()
    assert out.sum() == 9


def test_crop_odd_remainder_left_biased():
    a = np.arange(5.0).reshape(5, 1, 1)
    assert center_crop(Volume3D(a), 2, 1).data[:, 0, 0].tolist() == [1.0, 2.0]


def test_crop_rejects_nonpositive():
    with pytest.raises(ValueError):
        center_crop(Volume3D(np.ones((3, 3, 1))), 0, 3)


def test_crop_labelmap_and_idempotence():
    m = LabelMap(np.random.default_rng(1).integers(0, 5, (9, 8, 2)))
    once = center_crop(m, 5, 6)
    assert isinstance(once, LabelMap) and once.shape == (5, 6, 2)
    assert center_crop(once, 5, 6) == once


def _bilinear_oracle(img, r, c):
    """Textbook bilinear interpolation in exact rationals."""
    r0, c0 = min(int(r), len(img) - 2), min(int(c), len(img[0]) - 2)
    fr, fc = r - r0, c - c0
    return (img[r0][c0] * (1 - fr) * (1 - fc) + img[r0][c0 + 1] * (1 - fr) * fc
            + img[r0 + 1][c0] * fr * (1 - fc) + img[r0 + 1][c0 + 1] * fr * fc)


def test_resample_2x2_to_4x4_matches_exact_oracle():
    img = [[Fraction(0), Fraction(0)], [Fraction(2), Fraction(2)]]
    coords = [Fraction(i, 3) for i in range(4)]  # corner-aligned 2 -> 4 samples
    expected = np.array([[float(_bilinear_oracle(img, r, c)) for c in coords] for r in coords])
    # frozen: rows 0, 2/3, 4/3, 2
    np.testing.assert_allclose(expected[:, 0], [0, 2 / 3, 4 / 3, 2], rtol=0, atol=1e-15)
    v = Volume3D(np.array([[0.0, 0.0], [2.0, 2.0]])[:, :, None], (2.0, 2.0, 10.0))
    out = resample_inplane(v, 1.0, 1.0)
    assert out.shape == (4, 4, 1)
    assert out.spacing == (1.0, 1.0, 10.0)
    np.testing.assert_allclose(out.data[:, :, 0], expected, atol=1e-12)


def test_resample_identity_and_constant():
    a = np.random.default_rng(2).normal(size=(6, 5, 2))
    v = Volume3D(a, (1.5, 1.5, 8.0))
    np.testing.assert_array_equal(resample_inplane(v, 1.5, 1.5).data, a)
    const = resample_inplane(Volume3D(np.full((6, 5, 1), 3.25), (1.5, 1.5, 8.0)), 0.7, 2.1)
    assert const.shape == (13, 4, 1)
    np.testing.assert_allclose(const.data, 3.25)


def _ring(shape, center, r_in=3, r_out=5, slices=1):
    rr, cc = np.ogrid[: shape[0], : shape[1]]
    d = np.hypot(rr - center[0], cc - center[1])
    return ((d >= r_in) & (d <= r_out)).astype(np.uint8) * 2


def test_shift_example_minus_three():
    lab = np.stack([_ring((30, 30), c) for c in [(13, 10), (10, 10), (7, 10)]], axis=2)
    assert slice_shifts(LabelMap(lab)) == [(-3, 0), (0, 0), (3, 0)]


def test_aligned_stack_zero_shift():
    lab = np.stack([_ring((30, 30), (15, 15))] * 3, axis=2)
    assert slice_shifts(LabelMap(lab)) == [(0, 0)] * 3


def test_empty_slice_passes_through():
    lab = np.stack([_ring((30, 30), (12, 15)), np.zeros((30, 30), np.uint8), _ring((30, 30), (18, 15))], axis=2)
    img = np.random.default_rng(3).normal(size=lab.shape)
    v2, m2 = align_slices(Volume3D(img), LabelMap(lab))
    np.testing.assert_array_equal(v2.data[:, :, 1], img[:, :, 1])


def test_align_preserves_multisets_and_couples_image():
    rng = np.random.default_rng(4)
    lab = np.stack([_ring((40, 40), (20 + dx, 20 + dy)) for dx, dy in [(-4, 2), (0, 0), (3, -3)]], axis=2)
    img = rng.normal(size=lab.shape) + lab
    v2, m2 = align_slices(Volume3D(img), LabelMap(lab))
    for k in range(3):
        assert np.bincount(m2.labels[:, :, k].ravel(), minlength=5).tolist() == np.bincount(lab[:, :, k].ravel(), minlength=5).tolist()
        np.testing.assert_array_equal(np.sort(v2.data[:, :, k][m2.labels[:, :, k] == 2]),
                                      np.sort(img[:, :, k][lab[:, :, k] == 2]))
    assert slice_shifts(m2) == [(0, 0)] * 3
