"""Synthetic data: DE-MRI ring phantoms and a clinical population.

The clinical generator draws each class independently from the per-class
marginals of a reference DE-MRI cohort (50 normal, 100 pathological).
"""
from __future__ import annotations

import math

import numpy as np

from .clinical import ClinicalRecord
from .model import CAVITY, INFARCT, NORMAL_MYOCARDIUM, PMO, LabelMap, Volume3D


def ring_phantom(rng: np.random.Generator, shape=(64, 64, 8), spacing=(1.5, 1.5, 10.0),
                 pim: float = 0.18, r_inner: float = 12.0, r_outer: float = 19.0,
                 healthy_scale: float = 30.0, scar_mean: float = 200.0, scar_std: float = 20.0,
                 blood_mean: float = 150.0, background_scale: float = 15.0,
                 pmo_fraction: float = 0.0):
    """Short-axis ring phantom with a bright transmural scar sector.

    Healthy myocardium draws from Rayleigh(``healthy_scale``), scar from
    Normal(``scar_mean``, ``scar_std``). ``pim`` sets the sector angle.
    With ``pmo_fraction > 0`` a dark mid-wall core of that angular share of
    the sector is labelled PMO. Returns ``(Volume3D, LabelMap)``.
    """
    nx, ny, nz = shape
    cx = (nx - 1) / 2 + rng.uniform(-2, 2)
    cy = (ny - 1) / 2 + rng.uniform(-2, 2)
    xx, yy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    rad = np.hypot(xx - cx, yy - cy)
    ang = np.arctan2(yy - cy, xx - cx)
    centre = rng.uniform(-math.pi, math.pi)
    half = math.pi * pim
    dang = np.angle(np.exp(1j * (ang - centre)))
    wall = (rad >= r_inner) & (rad < r_outer)
    sector = wall & (np.abs(dang) < half)
    labels2d = np.zeros((nx, ny), dtype=np.uint8)
    labels2d[rad < r_inner] = CAVITY
    labels2d[wall] = NORMAL_MYOCARDIUM
    labels2d[sector] = INFARCT
    if pmo_fraction > 0:
        mid = (r_inner + r_outer) / 2
        core = sector & (np.abs(rad - mid) < (r_outer - r_inner) / 4) & (np.abs(dang) < half * pmo_fraction)
        labels2d[core] = PMO
    labels = np.repeat(labels2d[:, :, None], nz, axis=2)

    img = rng.rayleigh(background_scale, size=shape)
    cav = labels == CAVITY
    img[cav] = rng.normal(blood_mean, 20.0, size=int(cav.sum()))
    healthy = (labels == NORMAL_MYOCARDIUM) | (labels == PMO)
    img[healthy] = rng.rayleigh(healthy_scale, size=int(healthy.sum()))
    scar = labels == INFARCT
    img[scar] = rng.normal(scar_mean, scar_std, size=int(scar.sum()))
    return Volume3D(np.clip(img, 0, None), spacing), LabelMap(labels, spacing)


# per-class marginals: (non-pathological, pathological)
COHORT_MARGINALS = {
    "female_rate": (38 / 50, 23 / 100),
    "age": ((66.0, 14.0), (59.0, 12.0)),
    "tobacco": ((0.18, 0.22, 0.60), (0.44, 0.21, 0.35)),  # yes, no, former
    "overweight": (0.62, 0.53),
    "hypertension": (0.58, 0.31),
    "diabetes": (0.20, 0.10),
    "history_cad": (0.04, 0.12),
    "st_elevation": (0.30, 0.80),
    "troponin": ((7.68, 12.91), (101.04, 101.35)),
    "killip": ((0.76, 0.22, 0.02, 0.00), (0.83, 0.12, 0.02, 0.03)),
    "lvef": ((49.62, 13.49), (47.74, 13.17)),
    "ntprobnp": ((2136.0, 3696.0), (1314.0, 2109.0)),
}
# infarct volume (PMO included) of pathological cases, cm^3
INFARCT_VOLUME = (23.55, 19.28)
PATHOLOGICAL_RATE = 100 / 150


def _lognormal(rng, mean, std, size=None):
    """Log-normal draws with the given arithmetic mean and standard deviation."""
    s2 = math.log1p((std / mean) ** 2)
    mu = math.log(mean) - s2 / 2
    return rng.lognormal(mu, math.sqrt(s2), size)


def clinical_population(rng: np.random.Generator, n: int = 1000, pathological_rate: float = PATHOLOGICAL_RATE):
    """Draw ``n`` labelled records plus their true infarct volumes (cm^3).

    Continuous clinical features are normal with the reference moments,
    clipped to their physical range. Infarct volume, positive in every
    pathological case, is log-normal with matched moments.
    """
    records, volumes = [], []
    labels = rng.random(n) < pathological_rate
    for i, sick in enumerate(labels):
        c = int(sick)
        sex = "F" if rng.random() < COHORT_MARGINALS["female_rate"][c] else "M"
        age = float(np.clip(rng.normal(*COHORT_MARGINALS["age"][c]), 18, 100))
        tobacco = ("yes", "no", "former")[rng.choice(3, p=COHORT_MARGINALS["tobacco"][c])]
        flags = {k: bool(rng.random() < COHORT_MARGINALS[k][c])
                 for k in ("overweight", "hypertension", "diabetes", "history_cad", "st_elevation")}
        troponin = max(0.0, float(rng.normal(*COHORT_MARGINALS["troponin"][c])))
        killip = int(rng.choice(4, p=COHORT_MARGINALS["killip"][c])) + 1
        lvef = float(np.clip(rng.normal(*COHORT_MARGINALS["lvef"][c]), 5, 90))
        ntprobnp = max(0.0, float(rng.normal(*COHORT_MARGINALS["ntprobnp"][c])))
        records.append(ClinicalRecord(
            case_id=f"S{i:04d}", sex=sex, age=round(age, 1), tobacco=tobacco,
            troponin=round(troponin, 3), killip=killip, lvef=round(lvef, 2), ntprobnp=round(ntprobnp, 1),
            label=bool(sick), **flags,
        ))
        volumes.append(float(_lognormal(rng, *INFARCT_VOLUME)) if sick else 0.0)
    return records, np.asarray(volumes)
