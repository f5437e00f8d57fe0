"""Clinical records: CSV ingestion and feature encoding.

CSV schema (header row required, order free)::

    case_id,sex,age,tobacco,overweight,hypertension,diabetes,history_cad,
    st_elevation,troponin,killip,lvef,ntprobnp[,label]

``sex`` is ``M``/``F``; ``tobacco`` is ``yes``/``no``/``former``; booleans and
``label`` are ``0``/``1`` (``1`` = pathological). Units: age in years,
troponin ng/mL, LVEF %, NT-proBNP pg/mL. Empty cells or ``NA`` mark missing
values, imputed at encoding time.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ClinicalTableError, SchemaError, ZeroVarianceWarning

FEATURE_COLUMNS = (
    "sex", "age", "tobacco", "overweight", "hypertension", "diabetes",
    "history_cad", "st_elevation", "troponin", "killip", "lvef", "ntprobnp",
)
CSV_COLUMNS = ("case_id", *FEATURE_COLUMNS)
LABEL_COLUMN = "label"
BOOL_FEATURES = ("overweight", "hypertension", "diabetes", "history_cad", "st_elevation")
NUMERIC_FEATURES = ("age", "troponin", "killip", "lvef", "ntprobnp")
TOBACCO_LEVELS = ("yes", "no", "former")
MISSING = {"", "na", "nan", "null"}

ENCODED_NAMES = (
    "sex_male", "age", "tobacco_yes", "tobacco_no", "tobacco_former",
    *BOOL_FEATURES, "troponin", "killip", "lvef", "ntprobnp",
)


@dataclass(frozen=True)
class ClinicalRecord:
    case_id: str
    sex: str | None = None
    age: float | None = None
    tobacco: str | None = None
    overweight: bool | None = None
    hypertension: bool | None = None
    diabetes: bool | None = None
    history_cad: bool | None = None
    st_elevation: bool | None = None
    troponin: float | None = None
    killip: int | None = None
    lvef: float | None = None
    ntprobnp: float | None = None
    label: bool | None = None

    def missing(self) -> list[str]:
        return [c for c in FEATURE_COLUMNS if getattr(self, c) is None]


def _parse_bool(s: str) -> bool:
    t = s.lower()
    if t in ("1", "true", "yes"):
        return True
    if t in ("0", "false", "no"):
        return False
    raise ValueError(f"expected 0/1, got {s!r}")


def _parse_number(s: str, lo: float, hi: float = math.inf) -> float:
    x = float(s)
    if not math.isfinite(x) or x < lo or x > hi:
        raise ValueError(f"{s} outside [{lo}, {hi}]")
    return x


def _parse_cell(column: str, raw: str):
    s = raw.strip()
    if s.lower() in MISSING:
        return None
    if column == "sex":
        t = s.upper()
        if t not in ("M", "F"):
            raise ValueError(f"sex must be M or F, got {s!r}")
        return t
    if column == "tobacco":
        t = s.lower()
        if t not in TOBACCO_LEVELS:
            raise ValueError(f"tobacco must be one of {TOBACCO_LEVELS}, got {s!r}")
        return t
    if column in BOOL_FEATURES or column == LABEL_COLUMN:
        return _parse_bool(s)
    if column == "age":
        return _parse_number(s, 0, 130)
    if column == "troponin":
        return _parse_number(s, 0)
    if column == "ntprobnp":
        return _parse_number(s, 0)
    if column == "lvef":
        return _parse_number(s, 0, 100)
    if column == "killip":
        x = _parse_number(s, 1, 4)
        if x != int(x):
            raise ValueError(f"killip must be an integer 1-4, got {s!r}")
        return int(x)
    raise KeyError(column)


def parse_clinical_table(path) -> list[ClinicalRecord]:
    """Read and validate a clinical CSV.

    Every invalid cell is collected before raising a single
    :class:`ClinicalTableError`; a missing column or empty file raises
    :class:`SchemaError`.
    """
    text = Path(path).read_text(encoding="utf-8-sig")
    rows = list(csv.reader(text.splitlines()))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise SchemaError(f"{path}: empty clinical table")
    header = [h.strip().lower() for h in rows[0]]
    missing_cols = [c for c in CSV_COLUMNS if c not in header]
    if missing_cols:
        raise SchemaError(f"{path}: missing column(s) {missing_cols}")
    col = {name: header.index(name) for name in header}
    records, errors, seen = [], [], set()
    for rownum, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            errors.append((rownum, "*", f"expected {len(header)} cells, got {len(row)}"))
            continue
        values = {}
        case_id = row[col["case_id"]].strip()
        if not case_id:
            errors.append((rownum, "case_id", "empty case id"))
        elif case_id in seen:
            errors.append((rownum, "case_id", f"duplicate case id {case_id!r}"))
        seen.add(case_id)
        for name in FEATURE_COLUMNS + ((LABEL_COLUMN,) if LABEL_COLUMN in col else ()):
            try:
                values[name] = _parse_cell(name, row[col[name]])
            except ValueError as exc:
                errors.append((rownum, name, str(exc)))
        records.append(ClinicalRecord(case_id=case_id, **values))
    if errors:
        raise ClinicalTableError(errors)
    return records


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def write_clinical_table(records: Sequence[ClinicalRecord], path, with_label: bool = True) -> None:
    columns = CSV_COLUMNS + ((LABEL_COLUMN,) if with_label else ())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in columns])


@dataclass
class FeatureStats:
    """Training-set statistics reused to encode test data."""

    means: dict
    stds: dict
    medians: dict
    modes: dict
    extra_names: tuple = ()

    @property
    def feature_names(self) -> tuple:
        return ENCODED_NAMES + tuple(self.extra_names)

    def to_dict(self) -> dict:
        return {
            "means": self.means, "stds": self.stds, "medians": self.medians,
            "modes": {k: (v if not isinstance(v, np.bool_) else bool(v)) for k, v in self.modes.items()},
            "extra_names": list(self.extra_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureStats":
        return cls(
            means={k: float(v) for k, v in d["means"].items()},
            stds={k: float(v) for k, v in d["stds"].items()},
            medians={k: float(v) for k, v in d["medians"].items()},
            modes=dict(d["modes"]),
            extra_names=tuple(d.get("extra_names", ())),
        )


@dataclass
class FeatureMatrix:
    X: np.ndarray
    stats: FeatureStats
    imputed: list = field(default_factory=list)

    @property
    def names(self) -> tuple:
        return self.stats.feature_names


def _mode(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    uniq = sorted(set(vals), key=lambda v: (-vals.count(v), str(v)))
    return uniq[0]


def fit_feature_stats(records: Sequence[ClinicalRecord], extra=None, extra_names=()) -> FeatureStats:
    means, stds, medians, modes = {}, {}, {}, {}
    columns = {name: [getattr(r, name) for r in records] for name in FEATURE_COLUMNS}
    if extra is not None:
        extra = np.asarray(extra, dtype=np.float64).reshape(len(records), -1)
        for j, name in enumerate(extra_names):
            columns[name] = [float(x) for x in extra[:, j]]
    for name in (*NUMERIC_FEATURES, *extra_names):
        vals = np.array([v for v in columns[name] if v is not None], dtype=np.float64)
        if vals.size == 0:
            means[name], stds[name], medians[name] = 0.0, 0.0, 0.0
            continue
        means[name] = float(vals.mean())
        stds[name] = float(vals.std())
        medians[name] = float(np.median(vals))
    for name in ("sex", "tobacco", *BOOL_FEATURES):
        modes[name] = _mode(columns[name])
    return FeatureStats(means, stds, medians, modes, tuple(extra_names))


def encode_features(records: Sequence[ClinicalRecord], stats: FeatureStats | None = None,
                    extra=None, extra_names=()) -> FeatureMatrix:
    """Encode records as a dense matrix with ``ENCODED_NAMES`` column order.

    Numeric features (and any ``extra`` columns) are z-scored with
    ``stats``; when ``stats`` is None they are fitted on ``records``.
    Missing values take the training median (numeric) or mode (categorical)
    and are listed per record in ``imputed``.
    """
    if not records:
        raise ValueError("no records to encode")
    if stats is None:
        stats = fit_feature_stats(records, extra, extra_names)
    names = stats.extra_names
    if extra is None and names:
        raise ValueError(f"stats expect extra feature(s) {names}")
    if extra is not None:
        extra = np.asarray(extra, dtype=np.float64).reshape(len(records), -1)
        if extra.shape[1] != len(names):
            raise ValueError(f"expected {len(names)} extra column(s), got {extra.shape[1]}")
    flat = [n for n in (*NUMERIC_FEATURES, *names) if stats.stds.get(n, 0.0) <= 0.0]
    if flat:
        warnings.warn(f"zero-variance feature(s) {flat} encoded as 0", ZeroVarianceWarning, stacklevel=2)

    def z(name, value):
        sd = stats.stds.get(name, 0.0)
        return 0.0 if sd <= 0.0 else (value - stats.means[name]) / sd

    X = np.zeros((len(records), len(ENCODED_NAMES) + len(names)))
    imputed = []
    for i, r in enumerate(records):
        filled = []

        def get(name):
            v = getattr(r, name)
            if v is None:
                filled.append(name)
                v = stats.medians.get(name) if name in NUMERIC_FEATURES else stats.modes.get(name)
                if v is None:
                    raise ValueError(f"record {r.case_id}: {name} missing and no training value to impute")
            return v

        row = [1.0 if get("sex") == "M" else 0.0, z("age", get("age"))]
        tob = get("tobacco")
        row += [1.0 if tob == level else 0.0 for level in TOBACCO_LEVELS]
        row += [1.0 if get(b) else 0.0 for b in BOOL_FEATURES]
        row += [z(name, float(get(name))) for name in ("troponin", "killip", "lvef", "ntprobnp")]
        if extra is not None:
            row += [z(name, extra[i, j]) for j, name in enumerate(names)]
        X[i] = row
        imputed.append(filled)
    return FeatureMatrix(X, stats, imputed)
