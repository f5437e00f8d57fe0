"""Per-slice intensity normalization, cropping, resampling and alignment."""
from __future__ import annotations

import warnings

import numpy as np

from .errors import DegenerateSliceWarning
from .model import SEL_MYOCARDIUM_TOTAL, LabelMap, Volume3D, check_same_grid, region_mask

DEGENERATE_STD = 1e-12


def zscore_slice(v: Volume3D) -> Volume3D:
    """Normalize every slice to zero mean and unit (population) std.

    Constant slices become zero and trigger a :class:`DegenerateSliceWarning`.
    """
    data = v.data
    mean = data.mean(axis=(0, 1), keepdims=True)
    std = data.std(axis=(0, 1), keepdims=True)
    flat = std[0, 0] <= DEGENERATE_STD
    if flat.any():
        warnings.warn(
            f"constant slice(s) {np.flatnonzero(flat).tolist()} set to zero",
            DegenerateSliceWarning,
            stacklevel=2,
        )
    out = np.where(flat, 0.0, (data - mean) / np.where(flat, 1.0, std))
    return v.with_data(out)


def _crop_or_pad(arr: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    out = np.zeros((target_h, target_w) + arr.shape[2:], dtype=arr.dtype)
    src, dst = [], []
    for old, new in zip(arr.shape[:2], (target_h, target_w)):
        if old >= new:
            start = (old - new) // 2
            src.append(slice(start, start + new))
            dst.append(slice(0, new))
        else:
            start = (new - old) // 2
            src.append(slice(0, old))
            dst.append(slice(start, start + old))
    out[tuple(dst)] = arr[tuple(src)]
    return out


def center_crop(v, target_h: int, target_w: int):
    """Crop (or zero-pad) every slice to ``target_h x target_w`` about its centre.

    Works on :class:`Volume3D` and :class:`LabelMap` alike. Odd remainders put
    the extra row/column on the far side.
    """
    if int(target_h) < 1 or int(target_w) < 1:
        raise ValueError(f"crop target must be positive, got {(target_h, target_w)}")
    if isinstance(v, LabelMap):
        return v.with_labels(_crop_or_pad(v.labels, int(target_h), int(target_w)))
    return v.with_data(_crop_or_pad(v.data, int(target_h), int(target_w)))


def bilinear_sample(img: np.ndarray, rows: np.ndarray, cols: np.ndarray, fill: float | None = 0.0) -> np.ndarray:
    """Sample a 2D image at fractional ``(row, col)`` positions.

    Points outside ``[0, n-1]`` take ``fill``; with ``fill=None`` they are
    clamped to the border instead.
    """
    h, w = img.shape
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    tol = 1e-9
    outside = (rows < -tol) | (rows > h - 1 + tol) | (cols < -tol) | (cols > w - 1 + tol)
    r = np.clip(rows, 0, h - 1)
    c = np.clip(cols, 0, w - 1)
    r0 = np.minimum(np.floor(r).astype(np.intp), max(h - 2, 0))
    c0 = np.minimum(np.floor(c).astype(np.intp), max(w - 2, 0))
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = r - r0
    fc = c - c0
    val = (
        img[r0, c0] * (1 - fr) * (1 - fc)
        + img[r0, c1] * (1 - fr) * fc
        + img[r1, c0] * fr * (1 - fc)
        + img[r1, c1] * fr * fc
    )
    if fill is not None:
        val = np.where(outside, fill, val)
    return val


def _resize_axis_coords(old: int, new: int) -> np.ndarray:
    if new == 1 or old == 1:
        return np.zeros(new) if old == 1 else np.full(new, (old - 1) / 2.0)
    return np.arange(new) * ((old - 1) / (new - 1))


def resample_inplane(v: Volume3D, new_sx: float, new_sy: float) -> Volume3D:
    """Bilinear in-plane resampling to a new pixel spacing.

    New extents are ``round(n * old / new)``; corner pixel centres map onto
    corner pixel centres.
    """
    if not (new_sx > 0 and new_sy > 0):
        raise ValueError(f"target spacing must be positive, got {(new_sx, new_sy)}")
    sx, sy, sz = v.spacing
    nx, ny, nz = v.shape
    mx = max(1, int(np.floor(nx * sx / new_sx + 0.5)))
    my = max(1, int(np.floor(ny * sy / new_sy + 0.5)))
    if (mx, my) == (nx, ny):
        return Volume3D(v.data, (new_sx, new_sy, sz))
    rr, cc = np.meshgrid(_resize_axis_coords(nx, mx), _resize_axis_coords(ny, my), indexing="ij")
    out = np.stack([bilinear_sample(v.data[:, :, k], rr, cc, fill=None) for k in range(nz)], axis=2)
    return Volume3D(out, (new_sx, new_sy, sz))


def _shift2d(arr: np.ndarray, dx: int, dy: int) -> np.ndarray:
    out = np.zeros_like(arr)
    nx, ny = arr.shape
    if abs(dx) >= nx or abs(dy) >= ny:
        return out
    src_x = slice(max(0, -dx), nx - max(0, dx))
    dst_x = slice(max(0, dx), nx - max(0, -dx))
    src_y = slice(max(0, -dy), ny - max(0, dy))
    dst_y = slice(max(0, dy), ny - max(0, -dy))
    out[dst_x, dst_y] = arr[src_x, src_y]
    return out


def slice_shifts(m: LabelMap) -> list[tuple[int, int]]:
    """Integer ``(dx, dy)`` moving each slice's myocardium centroid onto the stack mean.

    Slices without myocardium get ``(0, 0)`` and do not enter the mean.
    """
    myo = region_mask(m, SEL_MYOCARDIUM_TOTAL)
    centroids = {}
    for k in range(m.n_slices):
        xs, ys = np.nonzero(myo[:, :, k])
        if len(xs):
            centroids[k] = (xs.mean(), ys.mean())
    if not centroids:
        return [(0, 0)] * m.n_slices
    ref = np.mean(list(centroids.values()), axis=0)
    shifts = []
    for k in range(m.n_slices):
        if k not in centroids:
            shifts.append((0, 0))
            continue
        d = ref - np.asarray(centroids[k])
        shifts.append(tuple(int(np.floor(x + 0.5)) for x in d))
    return shifts


def align_slices(v: Volume3D, m: LabelMap) -> tuple[Volume3D, LabelMap]:
    """Translate slices so their myocardial centroids line up.

    Image and labels receive the same integer shift; uncovered pixels are 0.
    """
    check_same_grid(v, m)
    shifts = slice_shifts(m)
    data = np.stack([_shift2d(v.data[:, :, k], *shifts[k]) for k in range(v.n_slices)], axis=2)
    labels = np.stack([_shift2d(m.labels[:, :, k], *shifts[k]) for k in range(m.n_slices)], axis=2)
    return v.with_data(data), m.with_labels(labels)
