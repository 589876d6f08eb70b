import csv

import numpy as np
import pytest

from oarseg.data.types import LabelMap
from oarseg.errors import ClassMismatch, EmptyInput, ShapeMismatch
from oarseg.metrics import (
    ClassScore,
    aggregate,
    dice_score,
    display_name,
    evaluate_case,
    hd95,
    load_report_json,
    save_report_csv,
    save_report_json,
)

from oracles import dice_oracle, hd95_oracle, random_label_pair

NAMES2 = ["background", "organ"]


def _lm(labels, names=NAMES2):
    return LabelMap(labels=np.asarray(labels, dtype=np.int16), class_names=names)


def _single_voxel(shape, where):
    arr = np.zeros(shape, np.int16)
    arr[where] = 1
    return _lm(arr)


# ----------------------------------------------------------------- dice


def test_dice_identity():
    rng = np.random.default_rng(0)
    labels = (rng.random((6, 6, 6)) < 0.3).astype(np.int16)
    assert dice_score(_lm(labels), _lm(labels), 1) == 1.0


def test_dice_disjoint():
    a = _single_voxel((5, 5, 5), (0, 0, 0))
    b = _single_voxel((5, 5, 5), (4, 4, 4))
    assert dice_score(a, b, 1) == 0.0


def test_dice_half_overlap():
    a = np.zeros((4, 4, 4), np.int16)
    b = np.zeros((4, 4, 4), np.int16)
    a[0, 0, 0] = a[0, 0, 1] = 1
    b[0, 0, 1] = b[0, 0, 2] = 1
    assert dice_score(_lm(a), _lm(b), 1) == 0.5  # 2*1/(2+2)


def test_dice_both_empty_is_one():
    empty = _lm(np.zeros((3, 3, 3), np.int16))
    assert dice_score(empty, empty, 1) == 1.0


def test_dice_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        dice_score(_lm(np.zeros((3, 3, 3), np.int16)), _lm(np.zeros((4, 4, 4), np.int16)), 1)


# ------------------------------------------------------------------ hd95


def test_hd95_identical_sets():
    rng = np.random.default_rng(1)
    labels = (rng.random((6, 6, 6)) < 0.4).astype(np.int16)
    labels[2, 2, 2] = 1
    assert hd95(_lm(labels), _lm(labels), 1, (1, 1, 1)) == 0.0


def test_hd95_single_voxels_with_spacing():
    # 3 voxels apart along an axis with 2 mm spacing -> 6 mm
    a = _single_voxel((8, 8, 8), (1, 3, 3))
    b = _single_voxel((8, 8, 8), (4, 3, 3))
    assert hd95(a, b, 1, (2.0, 1.0, 1.0)) == pytest.approx(6.0, abs=1e-12)
    assert hd95(a, b, 1, (2.0, 1.0, 1.0)) == pytest.approx(
        hd95_oracle(a.labels, b.labels, 1, (2.0, 1.0, 1.0)), abs=1e-12
    )


def test_hd95_scales_linearly_with_spacing():
    rng = np.random.default_rng(2)
    a = (rng.random((7, 7, 7)) < 0.25).astype(np.int16)
    b = (rng.random((7, 7, 7)) < 0.25).astype(np.int16)
    a[0, 0, 0] = b[6, 6, 6] = 1
    one = hd95(_lm(a), _lm(b), 1, (1.0, 1.5, 0.5))
    two = hd95(_lm(a), _lm(b), 1, (2.0, 3.0, 1.0))
    assert two == pytest.approx(2 * one, rel=1e-12)


def test_hd95_absent_when_either_empty():
    empty = _lm(np.zeros((4, 4, 4), np.int16))
    one = _single_voxel((4, 4, 4), (1, 1, 1))
    assert hd95(empty, one, 1, (1, 1, 1)) is None
    assert hd95(one, empty, 1, (1, 1, 1)) is None
    assert hd95(empty, empty, 1, (1, 1, 1)) is None


def test_metrics_symmetry_and_translation_invariance():
    rng = np.random.default_rng(3)
    for _ in range(20):
        pred, ref, spacing = random_label_pair(rng, max_extent=10, n_classes=2)
        assert dice_score(_lm3(pred), _lm3(ref), 1) == dice_score(_lm3(ref), _lm3(pred), 1)
        h_ab = hd95(_lm3(pred), _lm3(ref), 1, spacing)
        h_ba = hd95(_lm3(ref), _lm3(pred), 1, spacing)
        assert h_ab == h_ba or (h_ab is None and h_ba is None)
    # translation by a common offset changes nothing
    a = np.zeros((8, 8, 8), np.int16)
    b = np.zeros((8, 8, 8), np.int16)
    a[1:3, 1:3, 1:3] = 1
    b[2:5, 1:4, 2:4] = 1
    base_d = dice_score(_lm(a), _lm(b), 1)
    base_h = hd95(_lm(a), _lm(b), 1, (1, 2, 1))
    shift = lambda arr: np.roll(arr, (2, 3, 1), axis=(0, 1, 2))
    assert dice_score(_lm(shift(a)), _lm(shift(b)), 1) == base_d
    assert hd95(_lm(shift(a)), _lm(shift(b)), 1, (1, 2, 1)) == pytest.approx(base_h, abs=1e-12)


def _lm3(labels):
    return LabelMap(
        labels=np.asarray(labels, np.int16),
        class_names=["background", "c1", "c2", "c3"],
    )


def test_oracle_equivalence_small_batch():
    rng = np.random.default_rng(4)
    for _ in range(30):
        pred, ref, spacing = random_label_pair(rng, max_extent=8, n_classes=2)
        names = ["background", "c1", "c2"]
        lp = LabelMap(labels=pred, class_names=names)
        lr = LabelMap(labels=ref, class_names=names)
        for class_id in (1, 2):
            assert dice_score(lp, lr, class_id) == dice_oracle(pred, ref, class_id)
            got = hd95(lp, lr, class_id, spacing)
            want = hd95_oracle(pred, ref, class_id, spacing)
            if want is None:
                assert got is None
            else:
                assert got == pytest.approx(want, abs=1e-9)


# ---------------------------------------------------------- evaluate_case


def test_evaluate_case_perfect():
    rng = np.random.default_rng(5)
    labels = rng.integers(0, 4, size=(8, 8, 8)).astype(np.int16)
    names = ["background", "a", "b", "c"]
    lm = LabelMap(labels=labels, class_names=names)
    records = evaluate_case(lm, lm, (1, 1, 1))
    assert list(records) == ["a", "b", "c"]
    for score in records.values():
        assert score.dice == 1.0
        assert score.hd95_mm == 0.0


def test_evaluate_case_all_background_prediction():
    rng = np.random.default_rng(6)
    ref = rng.integers(0, 3, size=(6, 6, 6)).astype(np.int16)
    ref[0, 0, 0] = 1
    ref[1, 1, 1] = 2
    names = ["background", "a", "b"]
    pred = LabelMap(labels=np.zeros_like(ref), class_names=names)
    records = evaluate_case(pred, LabelMap(labels=ref, class_names=names), (1, 1, 1))
    for score in records.values():
        assert score.dice == 0.0
        assert score.hd95_mm is None


def test_evaluate_case_random_matches_oracle():
    rng = np.random.default_rng(7)
    pred, ref, spacing = random_label_pair(rng, max_extent=8, n_classes=3)
    names = ["background", "a", "b", "c"]
    records = evaluate_case(
        LabelMap(labels=pred, class_names=names),
        LabelMap(labels=ref, class_names=names),
        spacing,
    )
    for class_id, organ in enumerate(names[1:], start=1):
        assert records[organ].dice == dice_oracle(pred, ref, class_id)
        want = hd95_oracle(pred, ref, class_id, spacing)
        if want is None:
            assert records[organ].hd95_mm is None
        else:
            assert records[organ].hd95_mm == pytest.approx(want, abs=1e-9)


def test_evaluate_case_class_mismatch():
    a = LabelMap(labels=np.zeros((3, 3, 3), np.int16), class_names=["background", "x"])
    b = LabelMap(labels=np.zeros((3, 3, 3), np.int16), class_names=["background", "y"])
    with pytest.raises(ClassMismatch):
        evaluate_case(a, b, (1, 1, 1))


# ---------------------------------------------------------------- aggregate


def test_aggregate_single_case_identity():
    case = {"a": ClassScore(dice=0.7, hd95_mm=3.0), "b": ClassScore(dice=0.4, hd95_mm=None)}
    report = aggregate([case])
    assert report.per_class["a"].dice == 0.7
    assert report.per_class["b"].hd95_mm is None
    assert report.n_cases == 1
    assert report.overall_dice == pytest.approx(0.55)
    assert report.overall_hd95_mm == pytest.approx(3.0)  # absent entries excluded


def test_aggregate_two_cases_mean():
    cases = [
        {"a": ClassScore(dice=0.2, hd95_mm=2.0)},
        {"a": ClassScore(dice=0.8, hd95_mm=4.0)},
    ]
    report = aggregate(cases)
    assert report.per_class["a"].dice == pytest.approx(0.5)
    assert report.per_class["a"].hd95_mm == pytest.approx(3.0)


def test_aggregate_excludes_absent_hd95():
    cases = [
        {"a": ClassScore(dice=1.0, hd95_mm=None)},
        {"a": ClassScore(dice=0.5, hd95_mm=6.0)},
    ]
    report = aggregate(cases)
    assert report.per_class["a"].hd95_mm == pytest.approx(6.0)


def test_aggregate_empty_input():
    with pytest.raises(EmptyInput):
        aggregate([])


def test_aggregate_inconsistent_classes():
    with pytest.raises(ClassMismatch):
        aggregate([{"a": ClassScore(1.0, None)}, {"b": ClassScore(1.0, None)}])


# ------------------------------------------------------------ serialization


def test_report_json_roundtrip(tmp_path):
    report = aggregate(
        [{"lung_r": ClassScore(dice=0.971234, hd95_mm=4.16789), "lung_l": ClassScore(0.9, None)}]
    )
    path = tmp_path / "report.json"
    save_report_json(report, path)
    loaded = load_report_json(path)
    assert loaded.per_class["lung_r"].dice == report.per_class["lung_r"].dice
    assert loaded.per_class["lung_l"].hd95_mm is None
    assert loaded.overall_dice == report.overall_dice


def test_report_csv_nsclc_table_layout(tmp_path):
    # rows Lung R / Lung L / Spinal Cord plus Overall, DICE and HD95 columns
    cases = [
        {
            "spinal_cord": ClassScore(dice=0.84, hd95_mm=11.82),
            "lung_l": ClassScore(dice=0.97, hd95_mm=4.47),
            "lung_r": ClassScore(dice=0.97, hd95_mm=4.16),
        }
    ]
    report = aggregate(cases)
    path = tmp_path / "report.csv"
    save_report_csv(report, path, order=["lung_r", "lung_l", "spinal_cord"])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["organ", "dice", "hd95_mm"]
    assert [r[0] for r in rows[1:]] == ["Lung R", "Lung L", "Spinal Cord", "Overall"]
    assert rows[1][1:] == ["0.97", "4.16"]
    assert all(len(cell.split(".")[-1]) == 2 for row in rows[1:] for cell in row[1:])


def test_display_name():
    assert display_name("spinal_cord") == "Spinal Cord"
    assert display_name("optic_nerve_l") == "Optic Nerve L"
    assert display_name("lung_r") == "Lung R"
    assert display_name("brainstem") == "Brainstem"
