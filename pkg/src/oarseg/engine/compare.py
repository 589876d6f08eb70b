"""Side-by-side Baseline/Enhanced comparison tables."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import DatasetMismatch, MissingCurves
from ..metrics import MetricsReport, display_name, load_report_json
from .train import TrainState


@dataclass
class ComparisonTable:
    label_a: str
    label_b: str
    rows: list[dict]  # organ, dice_a, hd95_a, dice_b, hd95_b, dice_rel_improvement

    def to_dict(self) -> dict:
        return {"label_a": self.label_a, "label_b": self.label_b, "rows": self.rows}

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def save_csv(self, path: str | Path) -> None:
        def fmt(v):
            return "" if v is None else f"{v:.2f}"

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "organ",
                    f"{self.label_a} DICE",
                    f"{self.label_a} HD95",
                    f"{self.label_b} DICE",
                    f"{self.label_b} HD95",
                    "DICE rel. improvement",
                ]
            )
            for row in self.rows:
                writer.writerow(
                    [
                        row["organ"],
                        fmt(row["dice_a"]),
                        fmt(row["hd95_a"]),
                        fmt(row["dice_b"]),
                        fmt(row["hd95_b"]),
                        fmt(row["dice_rel_improvement"]),
                    ]
                )


def compare_reports(
    report_a: MetricsReport,
    report_b: MetricsReport,
    label_a: str = "Baseline",
    label_b: str = "Enhanced",
    order: list[str] | None = None,
) -> ComparisonTable:
    organs_a, organs_b = set(report_a.per_class), set(report_b.per_class)
    if organs_a != organs_b:
        raise DatasetMismatch(
            f"reports score different organ sets: {sorted(organs_a)} vs {sorted(organs_b)}"
        )
    organs = list(order) if order else list(report_a.per_class)
    missing = [o for o in organs if o not in organs_a]
    if missing:
        raise DatasetMismatch(f"table order names absent organs: {missing}")

    def rel(a: float, b: float) -> float | None:
        return None if a == 0 else (b - a) / a

    rows = []
    for organ in organs:
        a, b = report_a.per_class[organ], report_b.per_class[organ]
        rows.append(
            {
                "organ": display_name(organ),
                "dice_a": a.dice,
                "hd95_a": a.hd95_mm,
                "dice_b": b.dice,
                "hd95_b": b.hd95_mm,
                "dice_rel_improvement": rel(a.dice, b.dice),
            }
        )
    rows.append(
        {
            "organ": "Overall",
            "dice_a": report_a.overall_dice,
            "hd95_a": report_a.overall_hd95_mm,
            "dice_b": report_b.overall_dice,
            "hd95_b": report_b.overall_hd95_mm,
            "dice_rel_improvement": rel(report_a.overall_dice, report_b.overall_dice),
        }
    )
    return ComparisonTable(label_a=label_a, label_b=label_b, rows=rows)


def _run_label(state: TrainState) -> str:
    if state.config is not None and state.config.mode in ("baseline", "enhanced"):
        return state.config.mode.capitalize()
    return Path(state.run_dir).name


def _load_run_report(state: TrainState, split: str) -> MetricsReport:
    path = Path(state.run_dir) / f"report_{split}.json"
    if not path.is_file():
        raise MissingCurves(
            f"run {state.run_dir} has no report_{split}.json; evaluate it first"
        )
    return load_report_json(path)


def compare(run_a: TrainState, run_b: TrainState, split: str = "test") -> ComparisonTable:
    """Per-organ DICE/HD95 of two runs over the same dataset and split."""
    cfg_a, cfg_b = run_a.config, run_b.config
    if cfg_a is not None and cfg_b is not None:
        spec_a, spec_b = cfg_a.dataset.spec(), cfg_b.dataset.spec()
        if spec_a.class_names != spec_b.class_names:
            raise DatasetMismatch(
                f"runs use different datasets: {spec_a.name} vs {spec_b.name}"
            )
        order = spec_a.table_order()
    else:
        order = None
    return compare_reports(
        _load_run_report(run_a, split),
        _load_run_report(run_b, split),
        label_a=_run_label(run_a),
        label_b=_run_label(run_b),
        order=order,
    )
