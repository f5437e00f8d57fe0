"""Command-line entry point: ``demri-eval <command> ...``.

Exit codes: 0 clean, 2 partial (case-level errors, report still written),
1 fatal.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .classifiers import ClinicalModel, train_clinical_model
from .clinical import parse_clinical_table
from .errors import DemriError, SchemaError
from .metrics import (
    RANKED_NAMES,
    aggregate,
    classification_metrics,
    evaluate_case,
    report_dict,
    summary_from_report,
    volume_cm3,
    worst_case_metrics,
)
from .model import SEL_INFARCT_PLUS_PMO, LabelMap, region_mask
from .nifti import discover_cases, read_labelmap, read_volume, write_labelmap
from .ranking import build_leaderboard
from .scarseg import segment_classical

log = logging.getLogger("demri_eval")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


class FatalError(Exception):
    pass


def _spacing_arg(text):
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected sx,sy,sz, got {text!r}")
    if len(parts) != 3 or not all(p > 0 for p in parts):
        raise argparse.ArgumentTypeError(f"expected three positive spacings, got {text!r}")
    return parts


def _jobs(value):
    if value is not None:
        return max(1, value)
    env = os.environ.get("DEMRI_EVAL_JOBS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise FatalError(f"DEMRI_EVAL_JOBS must be an integer, got {env!r}")


def _with_spacing(m: LabelMap, spacing):
    return m if spacing is None else LabelMap(m.labels, spacing)


def _evaluate_pair(args):
    pair, spacing = args
    try:
        truth = _with_spacing(read_labelmap(pair.truth_path), spacing)
    except (OSError, DemriError) as exc:
        return None, f"cannot read ground truth {pair.truth_path}: {exc}"
    if pair.prediction_path is None:
        return worst_case_metrics(truth, pair.case_id, "missing", "no prediction file"), None
    try:
        pred = _with_spacing(read_labelmap(pair.prediction_path), spacing or truth.spacing)
    except (OSError, DemriError) as exc:
        return worst_case_metrics(truth, pair.case_id, "error", f"unreadable prediction: {exc}"), None
    return evaluate_case(truth, pred, pair.case_id), None


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def cmd_eval_seg(args) -> int:
    truth_dir, pred_dir = Path(args.truth), Path(args.pred)
    for d in (truth_dir, pred_dir):
        if not d.is_dir():
            raise FatalError(f"not a directory: {d}")
    pairs = discover_cases(truth_dir, pred_dir)
    work = [(p, args.spacing_override) for p in pairs]
    jobs = _jobs(args.jobs)
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate_pair, work))
    else:
        results = [_evaluate_pair(w) for w in work]
    fatal = [msg for _, msg in results if msg]
    if fatal:
        raise FatalError(fatal[0])
    cases = [cm for cm, _ in results]
    summary = aggregate(cases, args.submission_id or pred_dir.name)
    _write_json(args.out, report_dict(summary, cases))
    for cm in cases:
        if cm.status != "ok":
            log.warning("case %s scored worst-possible (%s): %s", cm.case_id, cm.status, cm.message)
    print(f"{summary.n_cases} cases, {summary.n_missing} missing, {summary.n_errors} errors -> {args.out}")
    for name in RANKED_NAMES:
        print(f"  {name:18s} {summary.mean[name]:.6g} +/- {summary.std[name]:.6g}")
    print(f"  pmo_case_accuracy  {summary.pmo_case_accuracy:.6g}")
    print(f"  pmo_slice_accuracy {summary.pmo_slice_accuracy:.6g}")
    return EXIT_PARTIAL if (summary.n_missing or summary.n_errors) else EXIT_OK


def cmd_rank(args) -> int:
    summaries = []
    for path in args.reports:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise FatalError(f"cannot read report {path}: {exc}")
        try:
            summaries.append(summary_from_report(doc))
        except SchemaError as exc:
            raise FatalError(f"{path}: {exc}")
    board = build_leaderboard(summaries)
    out = Path(args.out)
    out.write_text(board.to_csv())
    json_out = Path(args.json_out) if args.json_out else out.with_suffix(".json")
    json_out.write_text(board.to_json())
    for e in board:
        print(f"{e.position:3d}  {e.submission_id:30s} rank_sum={e.rank_sum}")
    return EXIT_OK


def _read_labels_csv(path) -> dict:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise FatalError(f"cannot read {path}: {exc}")
    if not rows or "case_id" not in rows[0] or "label" not in rows[0]:
        raise FatalError(f"{path}: needs case_id and label columns")
    out = {}
    for row in rows:
        lab = row["label"].strip().lower()
        if lab not in ("0", "1", "true", "false"):
            raise FatalError(f"{path}: bad label {row['label']!r} for case {row['case_id']}")
        out[row["case_id"].strip()] = lab in ("1", "true")
    return out


def _fmt_pct(x):
    return "n/a" if x is None else f"{x:.2f}"


def cmd_eval_classif(args) -> int:
    truth = _read_labels_csv(args.truth)
    pred = _read_labels_csv(args.pred)
    if set(truth) != set(pred):
        missing = sorted(set(truth) ^ set(pred))
        raise FatalError(f"case ids differ between files: {missing[:5]}")
    ids = sorted(truth)
    cm = classification_metrics([truth[i] for i in ids], [pred[i] for i in ids])
    print(f"sensitivity {_fmt_pct(cm.sensitivity)}")
    print(f"specificity {_fmt_pct(cm.specificity)}")
    print(f"precision {_fmt_pct(cm.precision)}")
    print(f"accuracy {_fmt_pct(cm.accuracy)}")
    return EXIT_OK


def cmd_segment(args) -> int:
    try:
        image = read_volume(args.image)
        myo = read_labelmap(args.myo)
    except (OSError, DemriError) as exc:
        raise FatalError(str(exc))
    if image.shape != myo.shape:
        raise FatalError(f"image {image.shape} and mask {myo.shape} grids differ")
    myo = LabelMap(myo.labels, image.spacing)
    res = segment_classical(image, myo, min_component=args.min_component)
    write_labelmap(res.labels, args.out)
    if res.mixture is not None:
        mx = res.mixture
        print(f"mixture: weight={mx.weight:.4g} rayleigh={mx.rayleigh_scale:.4g} "
              f"gauss=({mx.gauss_mean:.4g}, {mx.gauss_std:.4g}) iterations={mx.n_iter}")
    print(f"threshold (z-scored units): {res.threshold:.6g}" + (f"  [{res.note}]" if res.note else ""))
    return EXIT_OK


def _scar_volumes(records, seg_dir=None, volumes_csv=None):
    if seg_dir:
        vols = []
        for r in records:
            for suffix in (".nii", ".nii.gz"):
                p = Path(seg_dir) / f"{r.case_id}{suffix}"
                if p.exists():
                    break
            else:
                raise FatalError(f"no segmentation for case {r.case_id} in {seg_dir}")
            try:
                m = read_labelmap(p)
            except DemriError as exc:
                raise FatalError(str(exc))
            vols.append(volume_cm3(region_mask(m, SEL_INFARCT_PLUS_PMO), m.spacing))
        return np.asarray(vols), "segmentation"
    if volumes_csv:
        with open(volumes_csv, newline="") as fh:
            table = {row["case_id"].strip(): float(row["scar_volume_cm3"]) for row in csv.DictReader(fh)}
        try:
            return np.asarray([table[r.case_id] for r in records]), "table"
        except KeyError as exc:
            raise FatalError(f"no scar volume for case {exc.args[0]} in {volumes_csv}")
    return None, None


def _load_records(path):
    try:
        return parse_clinical_table(path)
    except OSError as exc:
        raise FatalError(f"cannot read {path}: {exc}")


def cmd_train(args) -> int:
    records = _load_records(args.clinical)
    volumes, source = _scar_volumes(records, args.seg_dir, args.volumes)
    model = train_clinical_model(records, volumes, source, lr=args.lr, epochs=args.epochs, l2=args.l2)
    model.save(args.out)
    X = model.encode(records, volumes)
    acc = 100.0 * np.mean(model.logistic.predict(X) == np.array([r.label for r in records]))
    kind = f"fused ({source} volumes)" if model.fused else "clinical-only"
    print(f"trained {kind} model on {len(records)} records, training accuracy {acc:.2f}% -> {args.out}")
    return EXIT_OK


def cmd_classify(args) -> int:
    records = _load_records(args.clinical)
    model = ClinicalModel.load(args.model)
    volumes, source = _scar_volumes(records, args.seg_dir, args.volumes)
    if model.fused and volumes is None:
        raise FatalError("model is fused; pass --seg-dir or --volumes")
    if not model.fused and volumes is not None:
        raise FatalError("model is clinical-only; drop --seg-dir/--volumes")
    scores = model.predict_proba(records, volumes)
    if source:
        log.info("scar volumes taken from %s", source)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "label", "score"])
        for r, s in zip(records, scores):
            w.writerow([r.case_id, int(s >= 0.5), f"{s:.6g}"])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="demri-eval", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--seed", type=int, default=0, help="seed for any stochastic step (all commands are deterministic)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("eval-seg", help="score a segmentation submission against ground truth")
    s.add_argument("--truth", required=True)
    s.add_argument("--pred", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--spacing-override", type=_spacing_arg)
    s.add_argument("--submission-id")
    s.add_argument("--jobs", type=int, help="worker processes (default: $DEMRI_EVAL_JOBS or 1)")
    s.set_defaults(func=cmd_eval_seg)

    s = sub.add_parser("rank", help="build a leaderboard from evaluation reports")
    s.add_argument("--reports", nargs="+", required=True)
    s.add_argument("--out", required=True, help="leaderboard CSV")
    s.add_argument("--json-out", help="leaderboard JSON (default: CSV path with .json)")
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("eval-classif", help="score normal/pathological predictions")
    s.add_argument("--truth", required=True)
    s.add_argument("--pred", required=True)
    s.set_defaults(func=cmd_eval_classif)

    s = sub.add_parser("segment-classical", help="mixture-model scar segmentation inside a myocardium mask")
    s.add_argument("--image", required=True)
    s.add_argument("--myo", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--min-component", type=int, default=10)
    s.set_defaults(func=cmd_segment)

    for name, func, helptext in (("train", cmd_train, "train a clinical (optionally fused) logistic model"),
                                 ("classify", cmd_classify, "classify cases with a trained model")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--clinical", required=True)
        if name == "train":
            s.add_argument("--out", required=True, help="model JSON")
            s.add_argument("--lr", type=float, default=0.5)
            s.add_argument("--epochs", type=int, default=2000)
            s.add_argument("--l2", type=float, default=1e-3)
        else:
            s.add_argument("--model", required=True)
            s.add_argument("--out", help="predictions CSV (default: stdout)")
        g = s.add_mutually_exclusive_group()
        g.add_argument("--seg-dir", help="label maps named <case_id>.nii[.gz]; scar volumes are fused")
        g.add_argument("--volumes", help="CSV with case_id,scar_volume_cm3; scar volumes are fused")
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    np.random.seed(args.seed)
    try:
        return args.func(args)
    except FatalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except (DemriError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
