"""Challenge evaluation metrics, per case and per submission.

Myocardium metrics use the full wall (codes 2-4); infarct metrics include
PMO (codes 3-4); PMO metrics use code 4 alone.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import EmptyMaskWarning, InvalidGeometryError
from .model import (
    CAVITY,
    INFARCT,
    NORMAL_MYOCARDIUM,
    PMO,
    SEL_INFARCT_PLUS_PMO,
    SEL_MYOCARDIUM_TOTAL,
    SEL_PMO,
    LabelMap,
    region_mask,
    voxel_volume_cm3,
)

REPORT_SCHEMA = "demri-eval-report/1"

#: The nine ranked metrics in leaderboard column order, with their direction.
RANKED_METRICS = (
    ("myo_dice", "higher_better"),
    ("myo_vol_diff", "lower_better"),
    ("myo_hausdorff", "lower_better"),
    ("infarct_dice", "higher_better"),
    ("infarct_vol_diff", "lower_better"),
    ("infarct_pct_diff", "lower_better"),
    ("pmo_dice", "higher_better"),
    ("pmo_vol_diff", "lower_better"),
    ("pmo_pct_diff", "lower_better"),
)
RANKED_NAMES = tuple(name for name, _ in RANKED_METRICS)

_FACE = ndimage.generate_binary_structure(3, 1)
_FULL = ndimage.generate_binary_structure(3, 3)


def _pair(truth_mask, pred_mask):
    a = np.asarray(truth_mask, dtype=bool)
    b = np.asarray(pred_mask, dtype=bool)
    if a.shape != b.shape:
        raise InvalidGeometryError(f"mask extents differ: {a.shape} vs {b.shape}")
    return a, b


def dice(truth_mask, pred_mask) -> float:
    """Dice overlap; two empty masks score 1.0."""
    a, b = _pair(truth_mask, pred_mask)
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / total


def boundary_voxels(mask) -> np.ndarray:
    """Mask voxels with at least one face neighbour outside the mask (or grid)."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim == 2:
        m = m[:, :, None]
    interior = ndimage.binary_erosion(m, structure=_FACE, border_value=0)
    return m & ~interior


def grid_diagonal_mm(shape, spacing) -> float:
    return float(math.sqrt(sum((n * s) ** 2 for n, s in zip(shape, spacing))))


def _surface_points(mask, spacing) -> np.ndarray:
    return np.argwhere(boundary_voxels(mask)).astype(np.float64) * np.asarray(spacing, dtype=np.float64)


def hausdorff3d(truth_mask, pred_mask, spacing, backend=None) -> float:
    """Symmetric Hausdorff distance (mm) between the two mask surfaces.

    If exactly one mask is empty the grid's physical diagonal is returned and
    an :class:`EmptyMaskWarning` is emitted; two empty masks give 0.
    """
    a, b = _pair(truth_mask, pred_mask)
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    empty_a, empty_b = not a.any(), not b.any()
    if empty_a and empty_b:
        return 0.0
    if empty_a or empty_b:
        warnings.warn("Hausdorff distance of an empty mask; using grid diagonal", EmptyMaskWarning, stacklevel=2)
        return grid_diagonal_mm(a.shape, spacing)
    pa = _surface_points(a, spacing)
    pb = _surface_points(b, spacing)
    d2 = max(kernels.directed_hausdorff_sq(pa, pb, backend), kernels.directed_hausdorff_sq(pb, pa, backend))
    return math.sqrt(d2)


def volume_cm3(mask, spacing) -> float:
    return int(np.count_nonzero(mask)) * voxel_volume_cm3(spacing)


def pim_percent(m: LabelMap) -> float:
    """Percentage of the myocardial wall labelled infarct or PMO."""
    wall = int(region_mask(m, SEL_MYOCARDIUM_TOTAL).sum())
    if wall == 0:
        warnings.warn("no myocardium; PIM defined as 0", EmptyMaskWarning, stacklevel=2)
        return 0.0
    return 100.0 * int(region_mask(m, SEL_INFARCT_PLUS_PMO).sum()) / wall


def pmo_presence_accuracy(cases: Sequence[tuple[LabelMap, LabelMap]]) -> tuple[float, float]:
    """Case-wise and slice-wise PMO detection accuracy, in percent."""
    if not cases:
        raise ValueError("need at least one case")
    case_hits = slice_hits = slice_total = 0
    for truth, pred in cases:
        t = region_mask(truth, SEL_PMO).any(axis=(0, 1))
        p = region_mask(pred, SEL_PMO).any(axis=(0, 1))
        if t.shape != p.shape:
            raise InvalidGeometryError(f"slice counts differ: {t.shape[0]} vs {p.shape[0]}")
        case_hits += int(t.any() == p.any())
        slice_hits += int((t == p).sum())
        slice_total += t.shape[0]
    return 100.0 * case_hits / len(cases), 100.0 * slice_hits / slice_total


def _components_without_contact(labels: np.ndarray, comp_codes, contact_codes) -> int:
    comps, n = ndimage.label(np.isin(labels, comp_codes), structure=_FULL)
    if n == 0:
        return 0
    contact = np.isin(labels, contact_codes)
    # a component touches a contact voxel iff its face-dilation overlaps one
    touching = ndimage.binary_dilation(contact, structure=_FACE)
    touched = np.unique(comps[touching & (comps > 0)])
    return n - len(touched)


def consistency_violations(m: LabelMap) -> int:
    """Count scar components that break tissue containment.

    A PMO component must touch infarct; an infarct component must touch
    normal myocardium or cavity. Contact means sharing a face.
    """
    lab = m.labels
    return (
        _components_without_contact(lab, [PMO], [INFARCT])
        + _components_without_contact(lab, [INFARCT], [NORMAL_MYOCARDIUM, CAVITY])
    )


@dataclass(frozen=True)
class ClassificationMetrics:
    """Confusion-matrix rates in percent; ``None`` where the denominator is 0."""

    sensitivity: float | None
    specificity: float | None
    precision: float | None
    accuracy: float
    tp: int
    fn: int
    tn: int
    fp: int


def _pct(num, den):
    return None if den == 0 else 100.0 * num / den


def classification_metrics(truths: Sequence[bool], preds: Sequence[bool]) -> ClassificationMetrics:
    t = np.asarray(truths, dtype=bool)
    p = np.asarray(preds, dtype=bool)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError(f"truth and prediction lengths differ: {t.shape} vs {p.shape}")
    if len(t) == 0:
        raise ValueError("need at least one case")
    tp = int((t & p).sum())
    fn = int((t & ~p).sum())
    tn = int((~t & ~p).sum())
    fp = int((~t & p).sum())
    return ClassificationMetrics(
        sensitivity=_pct(tp, tp + fn),
        specificity=_pct(tn, tn + fp),
        precision=_pct(tp, tp + fp),
        accuracy=100.0 * (tp + tn) / len(t),
        tp=tp, fn=fn, tn=tn, fp=fp,
    )


def confusion_to_metrics(tp: int, fn: int, tn: int, fp: int) -> ClassificationMetrics:
    truths = [True] * (tp + fn) + [False] * (tn + fp)
    preds = [True] * tp + [False] * fn + [False] * tn + [True] * fp
    return classification_metrics(truths, preds)


@dataclass
class CaseMetrics:
    case_id: str
    status: str = "ok"  # ok | missing | error
    message: str = ""
    myo_dice: float = 0.0
    myo_vol_truth: float = 0.0
    myo_vol_pred: float = 0.0
    myo_vol_diff: float = 0.0
    myo_hausdorff: float = 0.0
    infarct_dice: float = 0.0
    infarct_vol_truth: float = 0.0
    infarct_vol_pred: float = 0.0
    infarct_vol_diff: float = 0.0
    infarct_pct_truth: float = 0.0
    infarct_pct_pred: float = 0.0
    infarct_pct_diff: float = 0.0
    pmo_dice: float = 0.0
    pmo_vol_truth: float = 0.0
    pmo_vol_pred: float = 0.0
    pmo_vol_diff: float = 0.0
    pmo_pct_truth: float = 0.0
    pmo_pct_pred: float = 0.0
    pmo_pct_diff: float = 0.0
    pmo_case_hit: bool = False
    pmo_slice_correct: int = 0
    pmo_slice_total: int = 0
    consistency_violations: int = 0

    def ranked(self) -> dict:
        return {name: getattr(self, name) for name in RANKED_NAMES}


def _pct_of_wall(m: LabelMap, sel) -> float:
    wall = int(region_mask(m, SEL_MYOCARDIUM_TOTAL).sum())
    return 0.0 if wall == 0 else 100.0 * int(region_mask(m, sel).sum()) / wall


def _tissue(truth: LabelMap, pred: LabelMap, sel) -> dict:
    tm, pm = region_mask(truth, sel), region_mask(pred, sel)
    vt, vp = volume_cm3(tm, truth.spacing), volume_cm3(pm, truth.spacing)
    return {"dice": dice(tm, pm), "vol_truth": vt, "vol_pred": vp, "vol_diff": abs(vt - vp)}


def evaluate_case(truth: LabelMap, pred: LabelMap, case_id: str = "case") -> CaseMetrics:
    """All per-case metrics; a grid mismatch yields a worst-scored error entry."""
    if truth.shape != pred.shape:
        return worst_case_metrics(truth, case_id, "error", f"grid mismatch: truth {truth.shape}, prediction {pred.shape}")
    cm = CaseMetrics(case_id)
    for prefix, sel in (("myo", SEL_MYOCARDIUM_TOTAL), ("infarct", SEL_INFARCT_PLUS_PMO), ("pmo", SEL_PMO)):
        for key, val in _tissue(truth, pred, sel).items():
            setattr(cm, f"{prefix}_{key}", val)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyMaskWarning)
        cm.myo_hausdorff = hausdorff3d(
            region_mask(truth, SEL_MYOCARDIUM_TOTAL), region_mask(pred, SEL_MYOCARDIUM_TOTAL), truth.spacing
        )
    for prefix, sel in (("infarct", SEL_INFARCT_PLUS_PMO), ("pmo", SEL_PMO)):
        pt, pp = _pct_of_wall(truth, sel), _pct_of_wall(pred, sel)
        setattr(cm, f"{prefix}_pct_truth", pt)
        setattr(cm, f"{prefix}_pct_pred", pp)
        setattr(cm, f"{prefix}_pct_diff", abs(pt - pp))
    t_pmo = region_mask(truth, SEL_PMO).any(axis=(0, 1))
    p_pmo = region_mask(pred, SEL_PMO).any(axis=(0, 1))
    cm.pmo_case_hit = bool(t_pmo.any() == p_pmo.any())
    cm.pmo_slice_correct = int((t_pmo == p_pmo).sum())
    cm.pmo_slice_total = int(t_pmo.shape[0])
    cm.consistency_violations = consistency_violations(pred)
    return cm


def worst_case_metrics(truth: LabelMap, case_id: str, status: str = "missing", message: str = "") -> CaseMetrics:
    """Score a case as if nothing usable was predicted.

    Dice 0 for every tissue, Hausdorff equal to the grid diagonal, volume and
    percentage differences equal to the truth values, every PMO slice wrong.
    """
    cm = CaseMetrics(case_id, status=status, message=message)
    for prefix, sel in (("myo", SEL_MYOCARDIUM_TOTAL), ("infarct", SEL_INFARCT_PLUS_PMO), ("pmo", SEL_PMO)):
        vt = volume_cm3(region_mask(truth, sel), truth.spacing)
        setattr(cm, f"{prefix}_vol_truth", vt)
        setattr(cm, f"{prefix}_vol_diff", vt)
    for prefix, sel in (("infarct", SEL_INFARCT_PLUS_PMO), ("pmo", SEL_PMO)):
        pt = _pct_of_wall(truth, sel)
        setattr(cm, f"{prefix}_pct_truth", pt)
        setattr(cm, f"{prefix}_pct_diff", pt)
    cm.myo_hausdorff = grid_diagonal_mm(truth.shape, truth.spacing)
    cm.pmo_slice_total = truth.n_slices
    return cm


@dataclass
class SubmissionMetrics:
    submission_id: str
    n_cases: int
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)
    pmo_case_accuracy: float = 0.0
    pmo_slice_accuracy: float = 0.0
    n_missing: int = 0
    n_errors: int = 0

    def value(self, name: str) -> float:
        return self.mean[name]


def aggregate(cases: Sequence[CaseMetrics], submission_id: str = "submission") -> SubmissionMetrics:
    """Means and population standard deviations over all cases."""
    if not cases:
        raise ValueError("need at least one case")
    sm = SubmissionMetrics(submission_id, len(cases))
    for name in RANKED_NAMES:
        vals = np.array([getattr(c, name) for c in cases], dtype=np.float64)
        sm.mean[name] = float(vals.mean())
        sm.std[name] = float(vals.std())
    sm.pmo_case_accuracy = 100.0 * sum(c.pmo_case_hit for c in cases) / len(cases)
    total = sum(c.pmo_slice_total for c in cases)
    sm.pmo_slice_accuracy = 100.0 * sum(c.pmo_slice_correct for c in cases) / total if total else 0.0
    sm.n_missing = sum(c.status == "missing" for c in cases)
    sm.n_errors = sum(c.status == "error" for c in cases)
    return sm


def evaluate_submission(pairs: Iterable, submission_id: str = "submission") -> tuple[SubmissionMetrics, list[CaseMetrics]]:
    """Evaluate ``(case_id, truth, prediction_or_None)`` triples.

    Plain ``(truth, prediction)`` pairs are accepted too and numbered.
    """
    cases = []
    for k, item in enumerate(pairs):
        if len(item) == 2:
            case_id, (truth, pred) = f"case_{k:03d}", item
        else:
            case_id, truth, pred = item
        if pred is None:
            cases.append(worst_case_metrics(truth, case_id, "missing", "no prediction"))
        else:
            cases.append(evaluate_case(truth, pred, case_id))
    return aggregate(cases, submission_id), cases


def fmt_float(x):
    """Round to 6 significant digits for stable serialized output; non-finite -> None."""
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.6g}")


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, str):
        return obj
    return fmt_float(obj)


def report_dict(summary: SubmissionMetrics, cases: Sequence[CaseMetrics]) -> dict:
    """JSON-ready evaluation report (schema ``demri-eval-report/1``)."""
    return _clean({
        "schema": REPORT_SCHEMA,
        "submission_id": summary.submission_id,
        "summary": {
            "n_cases": summary.n_cases,
            "n_missing": summary.n_missing,
            "n_errors": summary.n_errors,
            "mean": {k: summary.mean[k] for k in RANKED_NAMES},
            "std": {k: summary.std[k] for k in RANKED_NAMES},
            "pmo_case_accuracy": summary.pmo_case_accuracy,
            "pmo_slice_accuracy": summary.pmo_slice_accuracy,
        },
        "cases": [asdict(c) for c in cases],
    })


def summary_from_report(doc: dict) -> SubmissionMetrics:
    """Rebuild :class:`SubmissionMetrics` from a report; checks the schema tag."""
    from .errors import SchemaError

    if not isinstance(doc, dict) or doc.get("schema") != REPORT_SCHEMA:
        found = doc.get("schema") if isinstance(doc, dict) else type(doc).__name__
        raise SchemaError(f"report schema {found!r} is not {REPORT_SCHEMA!r}")
    try:
        s = doc["summary"]
        mean = {k: float(s["mean"][k]) for k in RANKED_NAMES}
        std = {k: float(s["std"].get(k) or 0.0) for k in RANKED_NAMES}
        return SubmissionMetrics(
            submission_id=str(doc.get("submission_id", "submission")),
            n_cases=int(s["n_cases"]),
            mean=mean,
            std=std,
            pmo_case_accuracy=float(s.get("pmo_case_accuracy") or 0.0),
            pmo_slice_accuracy=float(s.get("pmo_slice_accuracy") or 0.0),
            n_missing=int(s.get("n_missing", 0)),
            n_errors=int(s.get("n_errors", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed report: {exc}") from exc


CASE_FIELDS = tuple(f.name for f in fields(CaseMetrics))
