"""Evaluation harness and classical reference pipelines for DE-MRI."""

__version__ = "0.1.0"

from .errors import DemriError  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .model import (  # noqa: E402
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

__all__ = [
    "BACKEND",
    "DemriError",
    "LabelMap",
    "SEL_CAVITY",
    "SEL_INFARCT_PLUS_PMO",
    "SEL_MYOCARDIUM_TOTAL",
    "SEL_PMO",
    "TissueSelector",
    "Volume3D",
    "region_mask",
    "tissue_presence",
    "voxel_volume_cm3",
]
