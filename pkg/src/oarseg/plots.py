"""Static figure emission: training curves, learning-rate traces, ablation bars."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import MissingCurves
from .optim.schedule import read_lr_trace


def _read_curves(run_dir: Path) -> dict[str, list[tuple[int, float, float]]]:
    path = run_dir / "curves.csv"
    if not path.is_file():
        raise MissingCurves(f"{run_dir} has no curves.csv")
    curves: dict[str, list[tuple[int, float, float]]] = {"train": [], "val": []}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            curves[row["split"]].append(
                (int(row["epoch"]), float(row["loss"]), float(row["mean_dice"]))
            )
    return curves


def plot_curves(run_dirs: list[str | Path], out_path: str | Path):
    """Loss-vs-epoch and DICE-vs-epoch overlays, one labeled series per run.

    Validation curves are drawn when present, training curves otherwise.
    Returns the saved figure.
    """
    if not run_dirs:
        raise MissingCurves("no run directories given")
    fig, (ax_loss, ax_dice) = plt.subplots(1, 2, figsize=(10, 4))
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        curves = _read_curves(run_dir)
        series = curves["val"] if curves["val"] else curves["train"]
        if not series:
            raise MissingCurves(f"{run_dir} has an empty curves.csv")
        epochs = [e for e, _, _ in series]
        ax_loss.plot(epochs, [l for _, l, _ in series], label=run_dir.name)
        ax_dice.plot(epochs, [d for _, _, d in series], label=run_dir.name)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_dice.set_xlabel("epoch")
    ax_dice.set_ylabel("mean foreground DICE")
    ax_dice.set_ylim(0, 1)
    for ax in (ax_loss, ax_dice):
        ax.legend()
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    return fig


def plot_lr_trace(run_dirs: list[str | Path], out_path: str | Path):
    """lr-vs-iteration overlay from each run's lr_trace.csv."""
    if not run_dirs:
        raise MissingCurves("no run directories given")
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        path = run_dir / "lr_trace.csv"
        if not path.is_file():
            raise MissingCurves(f"{run_dir} has no lr_trace.csv")
        trace = read_lr_trace(path)
        ax.plot([t for t, _ in trace], [lr for _, lr in trace], label=run_dir.name)
    ax.set_xlabel("iteration")
    ax.set_ylabel("learning rate")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    return fig


def plot_ablation_bars(labels: list[str], values: list[float], out_path: str | Path, title: str):
    fig, ax = plt.subplots(figsize=(1.5 + 1.2 * len(labels), 3.5))
    ax.bar(range(len(labels)), values)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("overall DICE")
    ax.set_ylim(0, 1)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    return fig
