"""Training and evaluation driver.

fit() owns the epoch loop: per-iteration learning rate from the cyclic
schedule, one optimizer step per batch, validation and best-checkpoint
selection by mean foreground DICE every epoch, and curve/trace artifacts in
the run directory:

    runs/<run_name>/config.json      resolved config (audit copy)
    runs/<run_name>/best.ckpt        best validation mean-DICE parameters
    runs/<run_name>/last.ckpt        final parameters
    runs/<run_name>/curves.csv       epoch,split,loss,mean_dice
    runs/<run_name>/lr_trace.csv     iteration,lr
    runs/<run_name>/val_class_dice.csv  per-organ validation DICE per epoch
    runs/<run_name>/state.json       compact TrainState summary
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .. import metrics
from ..data import augment, derive_seed, load_dataset, sample_patch, split_patients
from ..data.types import LabelMap, SplitAssignment, Volume
from ..data.preprocess import preprocess
from ..errors import DivergenceError, EmptyInput
from ..models.nets import build_model
from ..optim import combined_loss, lr_at, make_optimizer, set_lr
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig
from .inference import predict_labels, predict_logits

RUNS_DIR_ENV = "OARSEG_RUNS_DIR"
DIVERGENCE_PATIENCE = 10


@dataclass
class BestCheckpoint:
    epoch: int
    val_dice: float
    path: str


@dataclass
class TrainState:
    run_dir: str
    epoch: int = 0
    lr_trace: list[tuple[int, float]] = field(default_factory=list)
    train_curve: list[tuple[int, float, float]] = field(default_factory=list)
    val_curve: list[tuple[int, float, float]] = field(default_factory=list)
    val_class_dice: list[dict[str, float]] = field(default_factory=list)
    best: BestCheckpoint | None = None
    config: ExperimentConfig | None = None

    @classmethod
    def load(cls, run_dir: str | Path) -> "TrainState":
        run_dir = Path(run_dir)
        state = json.loads((run_dir / "state.json").read_text())
        cfg = ExperimentConfig.from_dict(
            json.loads((run_dir / "config.json").read_text())
        )
        train_curve, val_curve = [], []
        with open(run_dir / "curves.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                entry = (int(row["epoch"]), float(row["loss"]), float(row["mean_dice"]))
                (train_curve if row["split"] == "train" else val_curve).append(entry)
        best = None
        if state.get("best") is not None:
            best = BestCheckpoint(**state["best"])
        return cls(
            run_dir=str(run_dir),
            epoch=state["epoch"],
            train_curve=train_curve,
            val_curve=val_curve,
            best=best,
            config=cfg,
        )


def default_runs_dir() -> Path:
    return Path(os.environ.get(RUNS_DIR_ENV, "runs"))


def _round_up(value: int, divisor: int) -> int:
    return int(math.ceil(value / divisor)) * divisor


def _pad_pair(vox: np.ndarray, lab: np.ndarray, divisor: int, dims: tuple[int, ...]):
    pads = [(0, 0)] * vox.ndim
    for ax in dims:
        pads[ax] = (0, (-vox.shape[ax]) % divisor)
    if any(hi for _, hi in pads):
        vox = np.pad(vox, pads, mode="edge")
        lab = np.pad(lab, pads, mode="constant")
    return vox, lab


class _Corpus:
    """Preprocessed dataset plus split, shared by training and evaluation."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.spec = cfg.dataset.spec()
        pairs = load_dataset(cfg.dataset.root, self.spec)
        self.items: dict[str, tuple[Volume, LabelMap]] = {}
        for volume, labels in pairs:
            self.items[volume.patient_id] = preprocess(volume, labels, cfg.augmentation)
        self.split: SplitAssignment = split_patients(
            list(self.items), cfg.dataset.ratios, cfg.split_seed
        )

    def ids_for(self, split: str) -> list[str]:
        return self.split.ids_for(split)


def _train_batches(corpus: _Corpus, epoch: int):
    """Deterministic batch stream for one epoch.

    3D full-volume mode groups same-shape volumes; 3D patch mode draws one
    foreground-biased patch per volume; 2D mode feeds every slice of every
    volume, batched within a volume so shapes agree.
    """
    cfg = corpus.cfg
    divisor = cfg.model.divisor
    rng = np.random.default_rng((cfg.seed, epoch))
    order = list(rng.permutation(sorted(corpus.ids_for("train"))))
    aug_cfg = cfg.augmentation
    use_aug = any(
        p > 0 for p in (aug_cfg.p_contrast, aug_cfg.p_affine, aug_cfg.p_elastic, aug_cfg.p_noise)
    )

    prepared = []
    for pid in order:
        volume, labels = corpus.items[pid]
        if use_aug:
            volume, labels = augment(volume, labels, aug_cfg, derive_seed(cfg.seed, pid, epoch))
        prepared.append((pid, volume.voxels, labels.labels))

    if cfg.model.dim == 3:
        if cfg.patch_size is not None:
            patch = tuple(_round_up(p, divisor) for p in cfg.patch_size)
            samples = [
                sample_patch(vox, lab, patch, rng) for _, vox, lab in prepared
            ]
            for lo in range(0, len(samples), cfg.batch_size):
                chunk = samples[lo : lo + cfg.batch_size]
                yield (
                    np.stack([v for v, _ in chunk]),
                    np.stack([l for _, l in chunk]),
                )
        else:
            by_shape: dict[tuple, list] = {}
            for _, vox, lab in prepared:
                vox, lab = _pad_pair(vox, lab, divisor, dims=(0, 1, 2))
                by_shape.setdefault(vox.shape, []).append((vox, lab))
            for group in by_shape.values():
                for lo in range(0, len(group), cfg.batch_size):
                    chunk = group[lo : lo + cfg.batch_size]
                    yield (
                        np.stack([v for v, _ in chunk]),
                        np.stack([l for _, l in chunk]),
                    )
    else:
        for _, vox, lab in prepared:
            vox, lab = _pad_pair(vox, lab, divisor, dims=(1, 2))
            slice_order = rng.permutation(vox.shape[0])
            for lo in range(0, len(slice_order), cfg.batch_size):
                idx = slice_order[lo : lo + cfg.batch_size]
                yield vox[idx], lab[idx]


def _count_batches(corpus: _Corpus) -> int:
    cfg = corpus.cfg
    n_train = len(corpus.ids_for("train"))
    if cfg.model.dim == 3:
        if cfg.patch_size is not None:
            return math.ceil(n_train / cfg.batch_size)
        by_shape: dict[tuple, int] = {}
        divisor = cfg.model.divisor
        for pid in corpus.ids_for("train"):
            shape = corpus.items[pid][0].shape
            padded = tuple(_round_up(n, divisor) for n in shape)
            by_shape[padded] = by_shape.get(padded, 0) + 1
        return sum(math.ceil(n / cfg.batch_size) for n in by_shape.values())
    total = 0
    for pid in corpus.ids_for("train"):
        total += math.ceil(corpus.items[pid][0].shape[0] / cfg.batch_size)
    return total


def _batch_foreground_dice(pred: torch.Tensor, target: torch.Tensor, num_classes: int) -> float:
    scores = []
    for c in range(1, num_classes):
        p = pred == c
        r = target == c
        denom = int(p.sum()) + int(r.sum())
        scores.append(1.0 if denom == 0 else 2.0 * int((p & r).sum()) / denom)
    return float(np.mean(scores))


def _model_loss(model, x: torch.Tensor, y: torch.Tensor, cfg: ExperimentConfig):
    if cfg.model.deep_supervision and hasattr(model, "forward_heads"):
        heads = model.forward_heads(x)
        loss = sum(combined_loss(h, y, cfg.loss) for h in heads) / len(heads)
        return loss, heads[0]
    logits = model(x)
    return combined_loss(logits, y, cfg.loss), logits


def _validate(model, corpus: _Corpus, cfg: ExperimentConfig):
    """Mean foreground DICE per organ over the validation split, plus the
    mean combined loss on stitched full-volume logits."""
    spec = corpus.spec
    organ_scores: dict[str, list[float]] = {o: [] for o in spec.class_names}
    losses = []
    for pid in corpus.ids_for("val"):
        volume, labels = corpus.items[pid]
        logits = predict_logits(model, volume.voxels, cfg.patch_size)
        pred = LabelMap(
            labels=np.argmax(logits, axis=0).astype(np.int16),
            class_names=labels.class_names,
        )
        for class_id, organ in enumerate(spec.class_names, start=1):
            organ_scores[organ].append(metrics.dice_score(pred, labels, class_id))
        loss = combined_loss(
            torch.from_numpy(logits[None]),
            torch.from_numpy(labels.labels[None].astype(np.int64)),
            cfg.loss,
        )
        losses.append(float(loss))
    class_dice = {o: float(np.mean(s)) for o, s in organ_scores.items()}
    mean_dice = float(np.mean(list(class_dice.values())))
    return float(np.mean(losses)), mean_dice, class_dice


def _write_run_artifacts(state: TrainState, cfg_resolved: dict, spec) -> None:
    run_dir = Path(state.run_dir)
    (run_dir / "config.json").write_text(
        json.dumps(cfg_resolved, indent=2, sort_keys=True) + "\n"
    )
    val_rows = {epoch: (loss, dice) for epoch, loss, dice in state.val_curve}
    with open(run_dir / "curves.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "split", "loss", "mean_dice"])
        for epoch, loss, dice in state.train_curve:
            writer.writerow([epoch, "train", repr(loss), repr(dice)])
            if epoch in val_rows:
                v_loss, v_dice = val_rows[epoch]
                writer.writerow([epoch, "val", repr(v_loss), repr(v_dice)])
    with open(run_dir / "lr_trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "lr"])
        for t, lr in state.lr_trace:
            writer.writerow([t, repr(lr)])
    with open(run_dir / "val_class_dice.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "organ", "dice"])
        for epoch, class_dice in enumerate(state.val_class_dice):
            for organ in spec.class_names:
                writer.writerow([epoch, organ, repr(class_dice[organ])])
    summary = {
        "epoch": state.epoch,
        "best": None
        if state.best is None
        else {
            "epoch": state.best.epoch,
            "val_dice": state.best.val_dice,
            "path": state.best.path,
        },
    }
    (run_dir / "state.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def fit(cfg: ExperimentConfig, runs_dir: str | Path | None = None) -> TrainState:
    """Train per the experiment config; deterministic given cfg.seed."""
    run_dir = Path(runs_dir or default_runs_dir()) / cfg.run_name
    run_dir.mkdir(parents=True, exist_ok=True)

    torch.manual_seed(cfg.seed)
    corpus = _Corpus(cfg)
    model = build_model(cfg.model)

    iters_per_epoch = _count_batches(corpus)
    scheduler = cfg.scheduler.resolved(max(1, iters_per_epoch))
    resolved = cfg.to_dict()
    resolved["scheduler"]["step_size"] = scheduler.step_size

    state = TrainState(run_dir=str(run_dir), config=cfg)
    optimizer = make_optimizer(model.parameters(), lr_at(scheduler, 0)) if cfg.epochs else None

    iteration = 0
    nonfinite_streak = 0
    num_classes = cfg.model.num_classes
    for epoch in range(cfg.epochs):
        model.train()
        losses, dices = [], []
        for vox_np, lab_np in _train_batches(corpus, epoch):
            lr = lr_at(scheduler, iteration)
            state.lr_trace.append((iteration, lr))
            set_lr(optimizer, lr)
            x = torch.from_numpy(vox_np[:, None].astype(np.float32))
            y = torch.from_numpy(lab_np.astype(np.int64))
            optimizer.zero_grad()
            loss, logits = _model_loss(model, x, y, cfg)
            if not torch.isfinite(loss):
                nonfinite_streak += 1
                if nonfinite_streak >= DIVERGENCE_PATIENCE:
                    raise DivergenceError(
                        f"train loss non-finite for {nonfinite_streak} consecutive batches"
                    )
                iteration += 1
                continue
            nonfinite_streak = 0
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
            with torch.no_grad():
                dices.append(
                    _batch_foreground_dice(logits.argmax(dim=1), y, num_classes)
                )
            iteration += 1
        state.train_curve.append(
            (epoch, float(np.mean(losses)) if losses else float("nan"),
             float(np.mean(dices)) if dices else float("nan"))
        )

        if corpus.ids_for("val"):
            val_loss, val_dice, class_dice = _validate(model, corpus, cfg)
            state.val_curve.append((epoch, val_loss, val_dice))
            state.val_class_dice.append(class_dice)
            if state.best is None or val_dice > state.best.val_dice:
                best_path = run_dir / "best.ckpt"
                save_checkpoint(model, {"epoch": epoch, "val_dice": val_dice}, best_path)
                state.best = BestCheckpoint(
                    epoch=epoch, val_dice=val_dice, path=str(best_path)
                )
        state.epoch = epoch + 1

    if cfg.epochs:
        save_checkpoint(model, {"epoch": state.epoch - 1}, run_dir / "last.ckpt")
    _write_run_artifacts(state, resolved, corpus.spec)
    return state


def evaluate_checkpoint(
    ckpt: str | Path,
    split: str,
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
) -> metrics.MetricsReport:
    """Sliding-window (3D) or per-slice (2D) inference over a named split,
    scored with the metrics module. Writes report_<split>.{json,csv} when
    out_dir is given."""
    model, _ = load_checkpoint(ckpt, expected_config=cfg.model)
    corpus = _Corpus(cfg)
    ids = corpus.ids_for(split)
    if not ids:
        raise EmptyInput(f"split {split!r} is empty")
    cases = []
    for pid in ids:
        volume, labels = corpus.items[pid]
        pred_labels = predict_labels(model, volume.voxels, cfg.patch_size)
        pred = LabelMap(labels=pred_labels, class_names=labels.class_names)
        cases.append(metrics.evaluate_case(pred, labels, volume.spacing))
    report = metrics.aggregate(cases)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics.save_report_json(report, out_dir / f"report_{split}.json")
        metrics.save_report_csv(
            report, out_dir / f"report_{split}.csv", order=corpus.spec.table_order()
        )
    return report
