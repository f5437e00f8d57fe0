import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from demri_eval.cli import main
from demri_eval.clinical import write_clinical_table
from demri_eval.metrics import dice
from demri_eval.model import SEL_INFARCT_PLUS_PMO, LabelMap, region_mask
from demri_eval.nifti import read_labelmap, write_labelmap, write_volume
from demri_eval.synthetic import clinical_population, ring_phantom


@pytest.fixture
def dataset(tmp_path):
    rng = np.random.default_rng(0)
    truth = tmp_path / "truth"
    truth.mkdir()
    for i in range(3):
        write_labelmap(LabelMap(rng.integers(0, 5, (10, 10, 3)), (1.5, 1.5, 10)), truth / f"Case_{i:03d}.nii.gz")
    return tmp_path, truth


def test_eval_seg_identical(dataset, capsys):
    tmp, truth = dataset
    assert main(["eval-seg", "--truth", str(truth), "--pred", str(truth), "--out", str(tmp / "r.json")]) == 0
    doc = json.loads((tmp / "r.json").read_text())
    assert doc["schema"] == "demri-eval-report/1"
    assert doc["summary"]["mean"]["myo_dice"] == 1.0 and doc["summary"]["mean"]["myo_hausdorff"] == 0.0
    assert len(doc["cases"]) == 3


def test_eval_seg_missing_prediction_exit_2(dataset, caplog):
    tmp, truth = dataset
    pred = tmp / "pred"
    pred.mkdir()
    for name in ["Case_000.nii.gz", "Case_001.nii.gz"]:
        (pred / name).write_bytes((truth / name).read_bytes())
    code = main(["eval-seg", "--truth", str(truth), "--pred", str(pred), "--out", str(tmp / "r.json")])
    assert code == 2
    assert "Case_002" in caplog.text
    cases = json.loads((tmp / "r.json").read_text())["cases"]
    assert [c["status"] for c in cases] == ["ok", "ok", "missing"]


def test_eval_seg_empty_pred_dir(dataset):
    tmp, truth = dataset
    (tmp / "empty").mkdir()
    assert main(["eval-seg", "--truth", str(truth), "--pred", str(tmp / "empty"), "--out", str(tmp / "r.json")]) == 2
    assert all(c["status"] == "missing" for c in json.loads((tmp / "r.json").read_text())["cases"])


def test_eval_seg_unreadable_exit_1(tmp_path):
    assert main(["eval-seg", "--truth", str(tmp_path / "nope"), "--pred", str(tmp_path), "--out", str(tmp_path / "r.json")]) == 1


def test_eval_seg_parallel_byte_identical(dataset, monkeypatch):
    tmp, truth = dataset
    main(["eval-seg", "--truth", str(truth), "--pred", str(truth), "--out", str(tmp / "a.json")])
    monkeypatch.setenv("DEMRI_EVAL_JOBS", "2")
    main(["eval-seg", "--truth", str(truth), "--pred", str(truth), "--out", str(tmp / "b.json")])
    assert (tmp / "a.json").read_bytes() == (tmp / "b.json").read_bytes()


def _report(tmp, name, values):
    from demri_eval.metrics import RANKED_NAMES, REPORT_SCHEMA
    doc = {"schema": REPORT_SCHEMA, "submission_id": name,
           "summary": {"n_cases": 1, "mean": dict(zip(RANKED_NAMES, values)),
                       "std": dict.fromkeys(RANKED_NAMES, 0.0), "pmo_case_accuracy": 100.0,
                       "pmo_slice_accuracy": 100.0, "n_missing": 0, "n_errors": 0},
           "cases": []}
    p = tmp / f"{name}.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_rank_single_and_duplicates(tmp_path):
    a = _report(tmp_path, "a", [0.8, 1, 1, 0.7, 1, 1, 0.6, 1, 1])
    assert main(["rank", "--reports", a, "--out", str(tmp_path / "b.csv")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "b.csv")))
    assert rows[0]["rank_sum"] == "9" and rows[0]["position"] == "1"
    b = _report(tmp_path, "b", [0.8, 1, 1, 0.7, 1, 1, 0.6, 1, 1])
    main(["rank", "--reports", a, b, "--out", str(tmp_path / "b.csv")])
    assert [r["position"] for r in csv.DictReader(open(tmp_path / "b.csv"))] == ["1", "1"]
    assert json.loads((tmp_path / "b.json").read_text())["schema"] == "demri-eval-leaderboard/1"


def test_rank_three_reports_match_module(tmp_path):
    paths = [_report(tmp_path, "a", [0.9, 1, 1, 0.9, 1, 1, 0.9, 1, 1]),
             _report(tmp_path, "b", [0.8, 2, 2, 0.8, 2, 2, 0.8, 2, 2]),
             _report(tmp_path, "c", [0.8, 3, 1, 0.7, 2, 3, 0.9, 3, 3])]
    main(["rank", "--reports", *paths, "--out", str(tmp_path / "b.csv")])
    rows = list(csv.DictReader(open(tmp_path / "b.csv")))
    assert [(r["submission_id"], r["rank_sum"]) for r in rows] == [("a", "9"), ("b", "20"), ("c", "21")]


def test_rank_schema_mismatch(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"schema": "demri-eval-report/0"}))
    assert main(["rank", "--reports", str(p), "--out", str(tmp_path / "b.csv")]) == 1


def _labels(path, values):
    with open(path, "w") as fh:
        fh.write("case_id,label\n")
        for i, v in enumerate(values):
            fh.write(f"c{i:02d},{int(v)}\n")
    return str(path)


def test_eval_classif_confusion_30_3_16_1(tmp_path, capsys):
    truth = [1] * 33 + [0] * 17
    pred = [1] * 30 + [0] * 3 + [0] * 16 + [1]
    main(["eval-classif", "--truth", _labels(tmp_path / "t.csv", truth), "--pred", _labels(tmp_path / "p.csv", pred)])
    assert capsys.readouterr().out.split() == ["sensitivity", "90.91", "specificity", "94.12",
                                               "precision", "96.77", "accuracy", "92.00"]


def test_eval_classif_identical_and_inverted(tmp_path, capsys):
    truth = [1, 0] * 5
    t = _labels(tmp_path / "t.csv", truth)
    main(["eval-classif", "--truth", t, "--pred", t])
    assert "accuracy 100.00" in capsys.readouterr().out
    main(["eval-classif", "--truth", t, "--pred", _labels(tmp_path / "p.csv", [1 - x for x in truth])])
    assert "accuracy 0.00" in capsys.readouterr().out


def test_segment_classical_phantom(tmp_path):
    v, truth = ring_phantom(np.random.default_rng(3))
    write_volume(v, tmp_path / "img.nii.gz")
    myo = LabelMap(np.isin(truth.labels, [2, 3, 4]).astype(np.uint8), truth.spacing)
    write_labelmap(myo, tmp_path / "myo.nii.gz")
    assert main(["segment-classical", "--image", str(tmp_path / "img.nii.gz"), "--myo", str(tmp_path / "myo.nii.gz"),
                 "--out", str(tmp_path / "seg.nii.gz")]) == 0
    seg = read_labelmap(tmp_path / "seg.nii.gz")
    assert set(np.unique(seg.labels)) <= {0, 1, 2, 3, 4}
    assert dice(region_mask(truth, SEL_INFARCT_PLUS_PMO), region_mask(seg, SEL_INFARCT_PLUS_PMO)) >= 0.7


def test_segment_classical_healthy_has_no_scar(tmp_path):
    v, truth = ring_phantom(np.random.default_rng(4), pim=0.0)
    write_volume(v, tmp_path / "img.nii")
    write_labelmap(truth, tmp_path / "myo.nii")
    main(["segment-classical", "--image", str(tmp_path / "img.nii"), "--myo", str(tmp_path / "myo.nii"),
          "--out", str(tmp_path / "seg.nii")])
    assert not np.isin(read_labelmap(tmp_path / "seg.nii").labels, [3, 4]).any()


def test_train_and_classify_fused(tmp_path):
    records, volumes = clinical_population(np.random.default_rng(5), 300)
    write_clinical_table(records, tmp_path / "clin.csv")
    with open(tmp_path / "vol.csv", "w") as fh:
        fh.write("case_id,scar_volume_cm3\n")
        fh.writelines(f"{r.case_id},{v}\n" for r, v in zip(records, volumes))
    assert main(["train", "--clinical", str(tmp_path / "clin.csv"), "--volumes", str(tmp_path / "vol.csv"),
                 "--out", str(tmp_path / "m.json")]) == 0
    args = ["classify", "--clinical", str(tmp_path / "clin.csv"), "--model", str(tmp_path / "m.json"),
            "--volumes", str(tmp_path / "vol.csv"), "--out", str(tmp_path / "pred.csv")]
    assert main(args) == 0
    first = (tmp_path / "pred.csv").read_bytes()
    main(args)
    assert (tmp_path / "pred.csv").read_bytes() == first
    rows = list(csv.DictReader(open(tmp_path / "pred.csv")))
    assert list(rows[0]) == ["case_id", "label", "score"]
    acc = np.mean([int(r["label"]) == int(rec.label) for r, rec in zip(rows, records)])
    assert acc > 0.9
    # fused model refuses to run without volumes
    assert main(["classify", "--clinical", str(tmp_path / "clin.csv"), "--model", str(tmp_path / "m.json")]) == 1


def test_classify_with_seg_dir(tmp_path):
    records, _ = clinical_population(np.random.default_rng(6), 40)
    write_clinical_table(records, tmp_path / "clin.csv")
    seg = tmp_path / "seg"
    seg.mkdir()
    for r in records:
        lab = np.full((8, 8, 2), 2, np.uint8)
        if r.label:
            lab[:4] = 3
        write_labelmap(LabelMap(lab, (5, 5, 10)), seg / f"{r.case_id}.nii.gz")
    assert main(["train", "--clinical", str(tmp_path / "clin.csv"), "--seg-dir", str(seg), "--out", str(tmp_path / "m.json")]) == 0
    assert json.loads((tmp_path / "m.json").read_text())["volume_source"] == "segmentation"


def test_module_entry_point_version():
    out = subprocess.run([sys.executable, "-m", "demri_eval", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == "0.1.0"
