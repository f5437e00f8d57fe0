"""Grey-level co-occurrence texture features over the myocardium."""
from __future__ import annotations

import numpy as np

from . import kernels
from .model import SEL_MYOCARDIUM_TOTAL, LabelMap, Volume3D, check_same_grid, region_mask

# (dx, dy) in-plane offsets at distance 1 for 0, 45, 90 and 135 degrees
DEFAULT_OFFSETS = ((0, 1), (-1, 1), (-1, 0), (-1, -1))
FEATURES = ("contrast", "homogeneity", "energy", "correlation")


def quantize(values: np.ndarray, levels: int) -> np.ndarray:
    """Equal-width binning of ``values`` over their own min-max range."""
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.int32)
    q = np.floor((values - lo) / (hi - lo) * levels).astype(np.int32)
    return np.clip(q, 0, levels - 1)


def glcm(v: Volume3D, region: np.ndarray, levels: int = 8, offset=(0, 1), backend=None) -> np.ndarray:
    """Symmetric, normalized co-occurrence matrix of ``region`` for one offset."""
    region = np.asarray(region, dtype=bool)
    check_same_grid(v, region)
    if levels < 2:
        raise ValueError("levels must be >= 2")
    if not region.any():
        raise ValueError("GLCM region is empty")
    q = np.zeros(region.shape, dtype=np.int32)
    q[region] = quantize(v.data[region], levels)
    counts = kernels.glcm_counts(q, region, offset[0], offset[1], levels, backend).astype(np.float64)
    sym = counts + counts.T
    total = sym.sum()
    return sym / total if total > 0 else sym


def glcm_properties(P: np.ndarray) -> dict:
    """Contrast, homogeneity, energy (angular second moment) and correlation."""
    n = P.shape[0]
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    diff2 = (i - j) ** 2
    mu_i, mu_j = (i * P).sum(), (j * P).sum()
    sd_i = np.sqrt((((i - mu_i) ** 2) * P).sum())
    sd_j = np.sqrt((((j - mu_j) ** 2) * P).sum())
    if sd_i < 1e-15 or sd_j < 1e-15:
        corr = 1.0
    else:
        corr = float((((i - mu_i) * (j - mu_j)) * P).sum() / (sd_i * sd_j))
    return {
        "contrast": float((diff2 * P).sum()),
        "homogeneity": float((P / (1.0 + diff2)).sum()),
        "energy": float((P**2).sum()),
        "correlation": corr,
    }


def glcm_feature_names(offsets=DEFAULT_OFFSETS) -> list[str]:
    return [f"{feat}_{dx}_{dy}" for dx, dy in offsets for feat in FEATURES]


def glcm_features(v: Volume3D, m: LabelMap, levels: int = 8, offsets=DEFAULT_OFFSETS, backend=None) -> np.ndarray:
    """Texture vector over the myocardium: four properties per offset.

    Order follows :func:`glcm_feature_names`. Pairs never cross slices.
    """
    check_same_grid(v, m)
    region = region_mask(m, SEL_MYOCARDIUM_TOTAL)
    out = []
    for off in offsets:
        props = glcm_properties(glcm(v, region, levels, off, backend))
        out.extend(props[f] for f in FEATURES)
    return np.asarray(out)
