"""Mix-up, foreground-affine mix-up and lossless rotation/flip augmentation.

One-hot masks carry the class axis last: shape ``(H, W, L)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateForegroundError
from .model import LabelMap, Volume3D
from .preprocess import bilinear_sample

DEFAULT_ALPHA = 0.2


def sample_lambda(rng: np.random.Generator, alpha: float = DEFAULT_ALPHA) -> float:
    """Draw a mixing coefficient from ``Beta(alpha, alpha)``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return float(rng.beta(alpha, alpha))


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return lam


def mixup(x_i, x_j, y_i, y_j, lam: float):
    """Blend two images and their one-hot masks with weight ``lam`` on ``i``."""
    lam = _check_lambda(lam)
    x_i, x_j = np.asarray(x_i, dtype=np.float64), np.asarray(x_j, dtype=np.float64)
    y_i, y_j = np.asarray(y_i, dtype=np.float64), np.asarray(y_j, dtype=np.float64)
    if x_i.shape != x_j.shape or y_i.shape != y_j.shape:
        raise ValueError(f"shape mismatch: images {x_i.shape}/{x_j.shape}, masks {y_i.shape}/{y_j.shape}")
    if y_i.shape[:-1] != x_i.shape:
        raise ValueError(f"mask shape {y_i.shape} does not match image shape {x_i.shape} + (L,)")
    return lam * x_i + (1 - lam) * x_j, lam * y_i + (1 - lam) * y_j


@dataclass(frozen=True)
class AffineMixupParams:
    """Similarity transform carrying slice ``j``'s foreground onto slice ``i``'s."""

    scale: float
    spread_i: float
    spread_j: float
    centroid_i: tuple[float, float]
    centroid_j: tuple[float, float]
    matrix: np.ndarray

    @property
    def translation(self) -> tuple[float, float]:
        return float(self.matrix[0, 2]), float(self.matrix[1, 2])


def _centroid_and_spread(mask: np.ndarray, which: str):
    pts = np.argwhere(np.asarray(mask, dtype=bool)).astype(np.float64)
    if len(pts) == 0:
        raise DegenerateForegroundError(f"foreground of slice {which} is empty")
    c = pts.mean(axis=0)
    spread = float(np.sqrt(((pts - c) ** 2).sum(axis=1)).mean())
    if spread == 0.0:
        raise DegenerateForegroundError(f"foreground of slice {which} is a single pixel")
    return (float(c[0]), float(c[1])), spread


def foreground_affine(mask_i, mask_j) -> AffineMixupParams:
    """Fit scale and translation between the foregrounds (cavity + myocardium).

    ``s = l_i / l_j`` where ``l`` is the mean pixel distance to the
    foreground centroid; the translation maps centroid ``j`` onto centroid ``i``.
    """
    (cxi, cyi), li = _centroid_and_spread(mask_i, "i")
    (cxj, cyj), lj = _centroid_and_spread(mask_j, "j")
    s = li / lj
    T = np.array([
        [s, 0.0, cxi - s * cxj],
        [0.0, s, cyi - s * cyj],
        [0.0, 0.0, 1.0],
    ])
    return AffineMixupParams(s, li, lj, (cxi, cyi), (cxj, cyj), T)


def _inverse_coords(shape, T):
    rr, cc = np.meshgrid(np.arange(shape[0], dtype=np.float64), np.arange(shape[1], dtype=np.float64), indexing="ij")
    s, tx, ty = T[0, 0], T[0, 2], T[1, 2]
    return (rr - tx) / s, (cc - ty) / s


def warp_image(img, T) -> np.ndarray:
    """Apply ``T`` to a 2D image (bilinear, zero outside)."""
    img = np.asarray(img, dtype=np.float64)
    src_r, src_c = _inverse_coords(img.shape, T)
    return bilinear_sample(img, src_r, src_c, fill=0.0)


def warp_onehot(y, T) -> np.ndarray:
    """Apply ``T`` to a one-hot ``(H, W, L)`` mask by nearest neighbour.

    Pixels mapped from outside the grid become class 0.
    """
    y = np.asarray(y, dtype=np.float64)
    h, w, n_cls = y.shape
    src_r, src_c = _inverse_coords((h, w), T)
    ri = np.floor(src_r + 0.5).astype(np.intp)
    ci = np.floor(src_c + 0.5).astype(np.intp)
    inside = (ri >= 0) & (ri < h) & (ci >= 0) & (ci < w)
    out = np.zeros_like(y)
    out[..., 0] = 1.0
    out[inside] = y[ri[inside], ci[inside]]
    return out


def foreground_from_onehot(y, foreground_classes=(1, 2, 3, 4)) -> np.ndarray:
    y = np.asarray(y)
    classes = [c for c in foreground_classes if c < y.shape[-1]]
    return y[..., classes].sum(axis=-1) > 0.5


def affine_mixup(x_i, x_j, y_i, y_j, lam: float, fg_i=None, fg_j=None,
                 foreground_classes=(1, 2, 3, 4)):
    """Mix ``x_i`` with ``x_j`` after aligning ``j``'s foreground onto ``i``'s.

    ``fg_i``/``fg_j`` default to the union of ``foreground_classes`` in the
    one-hot masks.
    """
    lam = _check_lambda(lam)
    x_i, x_j = np.asarray(x_i, dtype=np.float64), np.asarray(x_j, dtype=np.float64)
    if fg_i is None:
        fg_i = foreground_from_onehot(y_i, foreground_classes)
    if fg_j is None:
        fg_j = foreground_from_onehot(y_j, foreground_classes)
    params = foreground_affine(fg_i, fg_j)
    return mixup(x_i, warp_image(x_j, params.matrix), y_i, warp_onehot(y_j, params.matrix), lam)


def _rotate_flip_array(arr: np.ndarray, k: int, flip_axis) -> np.ndarray:
    out = np.rot90(arr, -k, axes=(0, 1))
    if flip_axis is not None:
        out = np.flip(out, axis=flip_axis)
    return np.ascontiguousarray(out)


def rotate_flip(obj, k: int, flip_axis: int | None = None):
    """Rotate every slice by ``k`` clockwise quarter turns, then optionally flip.

    Accepts :class:`Volume3D`, :class:`LabelMap` or a bare 2D/3D array.
    In-plane spacings swap on odd ``k``.
    """
    if k not in (0, 1, 2, 3):
        raise ValueError(f"k must be in 0..3, got {k}")
    if flip_axis not in (None, 0, 1):
        raise ValueError(f"flip_axis must be None, 0 or 1, got {flip_axis}")
    if isinstance(obj, (Volume3D, LabelMap)):
        sx, sy, sz = obj.spacing
        spacing = (sy, sx, sz) if k % 2 else (sx, sy, sz)
        if isinstance(obj, LabelMap):
            return LabelMap(_rotate_flip_array(obj.labels, k, flip_axis), spacing)
        return Volume3D(_rotate_flip_array(obj.data, k, flip_axis), spacing)
    return _rotate_flip_array(np.asarray(obj), k, flip_axis)
