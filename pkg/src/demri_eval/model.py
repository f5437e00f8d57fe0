"""Volumes, label maps and tissue selectors.

Axis order is ``(x, y, z)``; ``z`` indexes short-axis slices from base to
apex. Spacing is in millimetres.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidGeometryError, InvalidLabelError

BACKGROUND = 0
CAVITY = 1
NORMAL_MYOCARDIUM = 2
INFARCT = 3
PMO = 4
LABEL_CODES = (BACKGROUND, CAVITY, NORMAL_MYOCARDIUM, INFARCT, PMO)

#: Centre-to-centre slice distance used when no header supplies one.
DEFAULT_SLICE_SPACING_MM = 10.0


def _check_spacing(spacing) -> tuple[float, float, float]:
    try:
        sp = tuple(float(s) for s in spacing)
    except TypeError as exc:
        raise InvalidGeometryError(f"spacing must be a 3-sequence, got {spacing!r}") from exc
    if len(sp) != 3:
        raise InvalidGeometryError(f"spacing must have 3 components, got {len(sp)}")
    if not all(np.isfinite(s) and s > 0 for s in sp):
        raise InvalidGeometryError(f"spacing components must be positive, got {sp}")
    return sp


def _as_3d(arr: np.ndarray, what: str) -> np.ndarray:
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3:
        raise InvalidGeometryError(f"{what} must be 2D or 3D, got {arr.ndim}D")
    if min(arr.shape) < 1:
        raise InvalidGeometryError(f"{what} has an empty axis: shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class Volume3D:
    """Scalar image on a regular grid.

    ``data`` is stored as a read-only float64 array; 2D input is promoted to a
    single slice.
    """

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, DEFAULT_SLICE_SPACING_MM)

    def __post_init__(self):
        data = _as_3d(np.array(self.data, dtype=np.float64), "volume data")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def n_slices(self) -> int:
        return self.data.shape[2]

    def with_data(self, data, spacing=None) -> "Volume3D":
        return Volume3D(data, self.spacing if spacing is None else spacing)


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Integer tissue map (codes 0-4) sharing a volume's grid."""

    labels: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, DEFAULT_SLICE_SPACING_MM)

    def __post_init__(self):
        raw = np.asarray(self.labels)
        if raw.dtype.kind == "f":
            if not np.all(np.isfinite(raw)) or np.any(raw != np.round(raw)):
                raise InvalidLabelError("label map holds non-integer values")
        labels = _as_3d(np.array(raw, dtype=np.int64), "label map")
        bad = (labels < 0) | (labels > PMO)
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise InvalidLabelError(f"invalid label code {labels[idx]} at voxel {idx}")
        labels = labels.astype(np.uint8)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.labels.shape

    @property
    def n_slices(self) -> int:
        return self.labels.shape[2]

    def with_labels(self, labels) -> "LabelMap":
        return LabelMap(labels, self.spacing)

    def __eq__(self, other):
        if not isinstance(other, LabelMap):
            return NotImplemented
        return (
            self.spacing == other.spacing
            and self.shape == other.shape
            and bool(np.array_equal(self.labels, other.labels))
        )

    __hash__ = None


@dataclass(frozen=True)
class TissueSelector:
    """Named, non-empty set of label codes."""

    name: str
    codes: frozenset

    def __post_init__(self):
        codes = frozenset(int(c) for c in self.codes)
        if not codes:
            raise ValueError("a tissue selector needs at least one code")
        if not codes <= set(LABEL_CODES):
            raise InvalidLabelError(f"selector {self.name!r} has invalid codes {sorted(codes - set(LABEL_CODES))}")
        object.__setattr__(self, "codes", codes)

    @classmethod
    def of(cls, name: str, codes: Iterable[int]) -> "TissueSelector":
        return cls(name, frozenset(codes))

    def __or__(self, other: "TissueSelector") -> "TissueSelector":
        return TissueSelector(f"{self.name}|{other.name}", self.codes | other.codes)


SEL_CAVITY = TissueSelector.of("cavity", {CAVITY})
SEL_MYOCARDIUM_TOTAL = TissueSelector.of("myocardium", {NORMAL_MYOCARDIUM, INFARCT, PMO})
SEL_INFARCT_PLUS_PMO = TissueSelector.of("infarct", {INFARCT, PMO})
SEL_PMO = TissueSelector.of("pmo", {PMO})


def region_mask(m: LabelMap, sel: TissueSelector) -> np.ndarray:
    """Boolean mask of the voxels whose code belongs to ``sel``."""
    return np.isin(m.labels, sorted(sel.codes))


def voxel_volume_cm3(spacing: Sequence[float]) -> float:
    sx, sy, sz = _check_spacing(spacing)
    return sx * sy * sz / 1000.0


def tissue_presence(m: LabelMap, sel: TissueSelector) -> tuple[bool, list[bool]]:
    """Whether ``sel`` occurs in the case, and in each slice."""
    per_slice = [bool(v) for v in region_mask(m, sel).any(axis=(0, 1))]
    return any(per_slice), per_slice


def check_same_grid(a, b) -> None:
    """Raise :class:`InvalidGeometryError` unless ``a`` and ``b`` share extents."""
    sa = a.shape if hasattr(a, "shape") else np.shape(a)
    sb = b.shape if hasattr(b, "shape") else np.shape(b)
    if tuple(sa) != tuple(sb):
        raise InvalidGeometryError(f"grid mismatch: {tuple(sa)} vs {tuple(sb)}")
