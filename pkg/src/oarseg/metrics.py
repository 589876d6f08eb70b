"""Per-class DICE and 95th-percentile Hausdorff distance (mm), plus
aggregation into the per-organ / Overall table layout used in reports.

HD95 convention: boundary voxels are set voxels with at least one
6-connected neighbor outside the set (the volume border counts as outside);
directed nearest-neighbor distances between boundary voxel centers are
computed in physical mm under anisotropic spacing, pooled over both
directions, and the 95th percentile is taken with linear interpolation.
When either voxel set is empty HD95 is absent (None) and excluded from
aggregation; DICE of two empty sets is 1.0.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import binary_erosion, generate_binary_structure
from scipy.spatial import cKDTree

from .errors import ClassMismatch, EmptyInput, ShapeMismatch
from .data.types import LabelMap

HD_PERCENTILE = 95.0

_FACE_STRUCT = generate_binary_structure(3, 1)  # 6-connectivity


@dataclass
class ClassScore:
    dice: float
    hd95_mm: float | None


@dataclass
class MetricsReport:
    per_class: dict[str, ClassScore]
    overall_dice: float
    overall_hd95_mm: float | None
    n_cases: int


def _binarize(label_map: LabelMap, class_id: int) -> np.ndarray:
    if not 0 <= class_id < len(label_map.class_names):
        raise ClassMismatch(f"class_id {class_id} out of range")
    return label_map.labels == class_id


def dice_score(pred: LabelMap, ref: LabelMap, class_id: int) -> float:
    """2|P∩R| / (|P|+|R|) over the binarized class; 1.0 when both sets are empty."""
    if pred.shape != ref.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs ref {ref.shape}")
    p = _binarize(pred, class_id)
    r = _binarize(ref, class_id)
    denom = int(p.sum()) + int(r.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((p & r).sum()) / denom


def boundary_voxels(mask: np.ndarray) -> np.ndarray:
    """Coordinates (N, 3) of set voxels with a 6-neighbor outside the set."""
    if not mask.any():
        return np.empty((0, 3), dtype=np.int64)
    interior = binary_erosion(mask, structure=_FACE_STRUCT, border_value=0)
    return np.argwhere(mask & ~interior)


def hd95(
    pred: LabelMap, ref: LabelMap, class_id: int, spacing: tuple[float, float, float]
) -> float | None:
    """Pooled symmetric 95th-percentile boundary distance in mm, or None if
    either class voxel set is empty."""
    if pred.shape != ref.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs ref {ref.shape}")
    spacing = np.asarray(spacing, dtype=np.float64)
    pts_p = boundary_voxels(_binarize(pred, class_id)) * spacing
    pts_r = boundary_voxels(_binarize(ref, class_id)) * spacing
    if len(pts_p) == 0 or len(pts_r) == 0:
        return None
    d_pr = cKDTree(pts_r).query(pts_p)[0]
    d_rp = cKDTree(pts_p).query(pts_r)[0]
    pooled = np.concatenate([d_pr, d_rp])
    return float(np.percentile(pooled, HD_PERCENTILE))


def evaluate_case(
    pred: LabelMap, ref: LabelMap, spacing: tuple[float, float, float]
) -> dict[str, ClassScore]:
    """One {dice, hd95} record per foreground class."""
    if pred.class_names != ref.class_names:
        raise ClassMismatch(
            f"class names differ: {pred.class_names} vs {ref.class_names}"
        )
    records = {}
    for class_id, organ in enumerate(ref.class_names):
        if class_id == 0:
            continue
        records[organ] = ClassScore(
            dice=dice_score(pred, ref, class_id),
            hd95_mm=hd95(pred, ref, class_id, spacing),
        )
    return records


def aggregate(cases: list[dict[str, ClassScore]]) -> MetricsReport:
    """Mean per class over cases (absent HD95 excluded), then the unweighted
    mean over classes for the Overall row."""
    if not cases:
        raise EmptyInput("no cases to aggregate")
    organs = list(cases[0])
    for case in cases[1:]:
        if list(case) != organs:
            raise ClassMismatch(f"inconsistent classes: {list(case)} vs {organs}")
    per_class = {}
    for organ in organs:
        dices = [case[organ].dice for case in cases]
        hds = [case[organ].hd95_mm for case in cases if case[organ].hd95_mm is not None]
        per_class[organ] = ClassScore(
            dice=float(np.mean(dices)),
            hd95_mm=float(np.mean(hds)) if hds else None,
        )
    hd_means = [s.hd95_mm for s in per_class.values() if s.hd95_mm is not None]
    return MetricsReport(
        per_class=per_class,
        overall_dice=float(np.mean([s.dice for s in per_class.values()])),
        overall_hd95_mm=float(np.mean(hd_means)) if hd_means else None,
        n_cases=len(cases),
    )


def display_name(organ: str) -> str:
    """'optic_nerve_l' -> 'Optic Nerve L' (single letters upper-cased)."""
    return " ".join(w.upper() if len(w) == 1 else w.capitalize() for w in organ.split("_"))


def _ordered_organs(report: MetricsReport, order: list[str] | None) -> list[str]:
    if order is None:
        return list(report.per_class)
    missing = [o for o in order if o not in report.per_class]
    if missing:
        raise ClassMismatch(f"table order names absent classes: {missing}")
    return list(order)


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "n_cases": report.n_cases,
        "per_class": {
            organ: {"dice": s.dice, "hd95_mm": s.hd95_mm}
            for organ, s in report.per_class.items()
        },
        "overall_dice": report.overall_dice,
        "overall_hd95_mm": report.overall_hd95_mm,
    }


def report_from_dict(payload: dict) -> MetricsReport:
    return MetricsReport(
        per_class={
            organ: ClassScore(dice=rec["dice"], hd95_mm=rec["hd95_mm"])
            for organ, rec in payload["per_class"].items()
        },
        overall_dice=payload["overall_dice"],
        overall_hd95_mm=payload["overall_hd95_mm"],
        n_cases=payload["n_cases"],
    )


def save_report_json(report: MetricsReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")


def load_report_json(path: str | Path) -> MetricsReport:
    return report_from_dict(json.loads(Path(path).read_text()))


def save_report_csv(
    report: MetricsReport, path: str | Path, order: list[str] | None = None
) -> None:
    """Per-organ rows plus an Overall row, DICE and HD95 columns, 2 decimals."""

    def fmt(value: float | None) -> str:
        return "" if value is None else f"{value:.2f}"

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["organ", "dice", "hd95_mm"])
        for organ in _ordered_organs(report, order):
            s = report.per_class[organ]
            writer.writerow([display_name(organ), fmt(s.dice), fmt(s.hd95_mm)])
        writer.writerow(["Overall", fmt(report.overall_dice), fmt(report.overall_hd95_mm)])
