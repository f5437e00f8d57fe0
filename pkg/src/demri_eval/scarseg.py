"""Classical scar segmentation inside a known myocardium.

Pipeline: per-slice z-score, Rayleigh (healthy) + Gaussian (scar) mixture
fitted by EM on myocardial intensities, Bayes threshold, marker watershed,
then PMO and small-component clean-up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import DegenerateFitError, InsufficientDataError
from .model import (
    CAVITY,
    INFARCT,
    NORMAL_MYOCARDIUM,
    PMO,
    SEL_CAVITY,
    SEL_INFARCT_PLUS_PMO,
    SEL_MYOCARDIUM_TOTAL,
    LabelMap,
    Volume3D,
    check_same_grid,
    region_mask,
)
from .preprocess import zscore_slice

MIN_SAMPLES = 20
MIN_SIGMA = 1e-9
NEAR_DEGENERATE_WEIGHT = 0.02
NO_SCAR = math.inf

_FULL = ndimage.generate_binary_structure(3, 3)
_FACE = ndimage.generate_binary_structure(3, 1)


@dataclass
class RayleighGaussianMixture:
    """Two-component intensity model; ``weight`` belongs to the Gaussian (scar)."""

    weight: float
    rayleigh_scale: float
    gauss_mean: float
    gauss_std: float
    log_likelihood: float = -math.inf
    n_iter: int = 0
    converged: bool = False
    history: list = field(default_factory=list)

    @property
    def rayleigh_mode(self) -> float:
        return self.rayleigh_scale

    @property
    def near_degenerate(self) -> bool:
        return min(self.weight, 1.0 - self.weight) < NEAR_DEGENERATE_WEIGHT

    def component_logpdfs(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Weighted log densities ``(log((1-w) R(x)), log(w N(x)))``."""
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore"):
            log_r = np.where(
                x > 0,
                np.log(np.where(x > 0, x, 1.0)) - 2 * np.log(self.rayleigh_scale) - x**2 / (2 * self.rayleigh_scale**2),
                -np.inf,
            )
            log_g = -0.5 * ((x - self.gauss_mean) / self.gauss_std) ** 2 - np.log(self.gauss_std * math.sqrt(2 * math.pi))
            return np.log1p(-self.weight) + log_r, np.log(self.weight) + log_g

    def posterior_scar(self, x) -> np.ndarray:
        """``P(Gaussian | x)``."""
        a, b = self.component_logpdfs(x)
        with np.errstate(invalid="ignore"):
            post = np.exp(b - np.logaddexp(a, b))
        return np.where(np.isneginf(b), 0.0, np.nan_to_num(post, nan=0.0))

    def loglik(self, x) -> float:
        a, b = self.component_logpdfs(x)
        return float(np.logaddexp(a, b).sum())


def _initial_mixture(x: np.ndarray) -> RayleighGaussianMixture:
    low = x[x <= np.median(x)]
    high = x[x >= np.percentile(x, 90)]
    scale = math.sqrt(float(np.mean(low**2)) / 2.0)
    std = float(high.std())
    if scale < MIN_SIGMA or std < MIN_SIGMA:
        raise DegenerateFitError("samples are (nearly) constant; cannot initialise the mixture")
    return RayleighGaussianMixture(0.1, scale, float(high.mean()), std)


def fit_mixture_em(intensities, max_iter: int = 500, tol: float = 1e-8) -> RayleighGaussianMixture:
    """Fit the Rayleigh + Gaussian mixture by expectation-maximization.

    Stops once the log-likelihood changes by less than ``tol`` (absolute) or
    after ``max_iter`` iterations. ``history`` holds the log-likelihood of
    the initial guess followed by one value per iteration.
    """
    x = np.asarray(intensities, dtype=np.float64).ravel()
    if x.size < MIN_SAMPLES:
        raise InsufficientDataError(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ValueError("intensities must be finite and non-negative")
    mix = _initial_mixture(x)
    ll = mix.loglik(x)
    history = [ll]
    x2 = x * x
    for it in range(1, max_iter + 1):
        a, b = mix.component_logpdfs(x)
        norm = np.logaddexp(a, b)
        g = np.exp(b - norm)
        r = 1.0 - g
        sr, sg = r.sum(), g.sum()
        if sr <= 0 or sg <= 0:
            raise DegenerateFitError("a mixture component lost all responsibility")
        scale = math.sqrt(float((r * x2).sum()) / (2 * sr))
        mean = float((g * x).sum() / sg)
        std = math.sqrt(float((g * (x - mean) ** 2).sum() / sg))
        weight = float(sg / x.size)
        if scale < MIN_SIGMA or std < MIN_SIGMA:
            raise DegenerateFitError(f"component collapsed (rayleigh={scale:.3g}, gauss std={std:.3g})")
        mix = RayleighGaussianMixture(weight, scale, mean, std)
        new_ll = mix.loglik(x)
        history.append(new_ll)
        done = abs(new_ll - ll) < tol
        ll = new_ll
        if done:
            mix.converged = True
            break
    mix.log_likelihood = ll
    mix.n_iter = len(history) - 1
    mix.history = history
    return mix


def scar_threshold(mix: RayleighGaussianMixture, n_grid: int = 4096) -> float:
    """Smallest intensity at or above the Rayleigh mode where ``P(scar | x) >= 0.5``.

    The search runs up to six Gaussian standard deviations past the scar
    mean; no crossing there returns ``inf``.
    """
    if mix.weight <= 0:
        return NO_SCAR
    lo = mix.rayleigh_mode
    hi = max(lo, mix.gauss_mean + 6 * mix.gauss_std)
    grid = np.linspace(lo, hi, n_grid)
    post = mix.posterior_scar(grid)
    above = np.flatnonzero(post >= 0.5)
    if above.size == 0:
        return NO_SCAR
    i = int(above[0])
    if i == 0:
        return float(lo)
    left, right = float(grid[i - 1]), float(grid[i])
    for _ in range(200):
        mid = 0.5 * (left + right)
        if mid <= left or mid >= right:
            break
        if mix.posterior_scar(mid) >= 0.5:
            right = mid
        else:
            left = mid
    return right


NORMAL_SEED, SCAR_SEED = 1, 2


def watershed_refine(v: Volume3D, myo_mask, threshold: float, normal_level: float, backend=None) -> np.ndarray:
    """Delineate scar with a per-slice marker watershed on negated intensity.

    Scar markers are myocardial voxels at or above ``threshold``; healthy
    markers are those below ``normal_level`` (the Rayleigh mode). Returns a
    boolean mask contained in ``myo_mask``.
    """
    myo = np.asarray(myo_mask, dtype=bool)
    check_same_grid(v, myo)
    if not myo.any():
        raise ValueError("myocardium mask is empty")
    data = v.data
    scar = np.zeros(myo.shape, dtype=bool)
    if not math.isfinite(threshold):
        return scar
    for k in range(v.n_slices):
        inside = myo[:, :, k]
        img = data[:, :, k]
        markers = np.zeros(img.shape, dtype=np.int32)
        markers[inside & (img < normal_level)] = NORMAL_SEED
        markers[inside & (img >= threshold)] = SCAR_SEED
        if not (markers == SCAR_SEED).any():
            continue
        labels = kernels.flood_2d(-img, markers, inside, backend)
        scar[:, :, k] = labels == SCAR_SEED
    return scar & myo


def remove_small_components(m: LabelMap, min_voxels: int) -> LabelMap:
    """Relabel scar (infarct + PMO) components smaller than ``min_voxels`` as healthy.

    Components use 26-connectivity over the union of codes 3 and 4.
    """
    if min_voxels < 1:
        raise ValueError("min_voxels must be >= 1")
    scar = region_mask(m, SEL_INFARCT_PLUS_PMO)
    comps, n = ndimage.label(scar, structure=_FULL)
    if n == 0 or min_voxels == 1:
        return m
    sizes = np.bincount(comps.ravel(), minlength=n + 1)
    small = np.flatnonzero(sizes < min_voxels)
    small = small[small > 0]
    if small.size == 0:
        return m
    labels = m.labels.copy()
    labels[np.isin(comps, small)] = NORMAL_MYOCARDIUM
    return m.with_labels(labels)


def _outer_contour(m: LabelMap) -> np.ndarray:
    myo = region_mask(m, SEL_MYOCARDIUM_TOTAL)
    cav = region_mask(m, SEL_CAVITY)
    out = np.zeros(myo.shape, dtype=bool)
    square = np.ones((3, 3), dtype=bool)
    cross = ndimage.generate_binary_structure(2, 1)
    for k in range(m.n_slices):
        if not myo[:, :, k].any():
            continue
        padded = np.pad(myo[:, :, k], 2)
        closed = ndimage.binary_closing(padded, structure=square)[2:-2, 2:-2]
        filled = ndimage.binary_fill_holes(closed | cav[:, :, k])
        out[:, :, k] = filled & ~ndimage.binary_erosion(filled, structure=cross, border_value=0)
    return out


def pmo_contact_filter(m: LabelMap) -> LabelMap:
    """Demote implausible PMO to infarct.

    A PMO component (26-connected) with no face contact to infarct or cavity
    is relabelled; so are PMO voxels on the outer myocardial contour, taken
    after a morphological closing of the wall.
    """
    labels = m.labels.copy()
    pmo = labels == PMO
    if not pmo.any():
        return m
    comps, n = ndimage.label(pmo, structure=_FULL)
    contact = ndimage.binary_dilation(np.isin(labels, [INFARCT, CAVITY]), structure=_FACE)
    touched = np.unique(comps[contact & (comps > 0)])
    isolated = np.setdiff1d(np.arange(1, n + 1), touched)
    labels[np.isin(comps, isolated)] = INFARCT
    labels[(labels == PMO) & _outer_contour(m)] = INFARCT
    return m.with_labels(labels)


@dataclass
class ClassicalSegmentation:
    labels: LabelMap
    mixture: RayleighGaussianMixture | None
    threshold: float
    normal_level: float
    shift: float
    note: str = ""


def myocardium_from_input(m: LabelMap) -> np.ndarray:
    """Myocardium of an input mask: codes 2-4, or code 1 for a binary mask."""
    codes = set(np.unique(m.labels).tolist())
    if codes <= {0, 1}:
        return m.labels == 1
    return region_mask(m, SEL_MYOCARDIUM_TOTAL)


def segment_classical(v: Volume3D, myo_input: LabelMap, min_component: int = 10,
                      max_iter: int = 500, tol: float = 1e-8, backend=None) -> ClassicalSegmentation:
    """Run the full classical scar pipeline inside a given myocardium.

    Intensities are z-scored per slice, then shifted so the darkest
    myocardial voxel sits at 0 before the mixture fit. Holes enclosed by
    scar within a slice are labelled PMO.
    """
    check_same_grid(v, myo_input)
    myo = myocardium_from_input(myo_input)
    if not myo.any():
        raise ValueError("myocardium mask is empty")
    codes = set(np.unique(myo_input.labels).tolist())
    labels = np.zeros(myo.shape, dtype=np.uint8)
    if not codes <= {0, 1}:
        labels[myo_input.labels == CAVITY] = CAVITY
    labels[myo] = NORMAL_MYOCARDIUM

    vz = zscore_slice(v)
    samples = vz.data[myo]
    shift = float(samples.min())
    mix = None
    note = ""
    try:
        mix = fit_mixture_em(samples - shift, max_iter=max_iter, tol=tol)
        threshold = scar_threshold(mix)
        normal_level = mix.rayleigh_mode + shift
        threshold = threshold + shift
    except (DegenerateFitError, InsufficientDataError) as exc:
        threshold, normal_level, note = NO_SCAR, NO_SCAR, f"no scar: {exc}"
    if mix is not None and mix.weight < NEAR_DEGENERATE_WEIGHT:
        threshold, note = NO_SCAR, "no scar: scar component weight below 2%"

    scar = watershed_refine(vz, myo, threshold, normal_level, backend) if math.isfinite(threshold) else np.zeros_like(myo)
    labels[scar] = INFARCT
    for k in range(labels.shape[2]):
        holes = ndimage.binary_fill_holes(scar[:, :, k]) & ~scar[:, :, k] & myo[:, :, k]
        labels[:, :, k][holes] = PMO
    out = LabelMap(labels, v.spacing)
    out = pmo_contact_filter(out)
    out = remove_small_components(out, min_component)
    return ClassicalSegmentation(out, mix, threshold, normal_level, shift, note)
