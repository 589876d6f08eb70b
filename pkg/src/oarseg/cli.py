"""Command-line entry point.

    oarseg <verb> --config <path> [--set key=value ...] [--seed N] [--out DIR]

Verbs: prepare, train, evaluate, ablate, compare, plot. Exit codes:
0 success, 2 data error, 64 usage error, 70 internal error. The environment
variable OARSEG_RUNS_DIR overrides the default run root.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import matplotlib.pyplot as plt

from .data import list_patients, load_patient, save_split_manifest, split_patients
from .engine import (
    ExperimentConfig,
    TrainState,
    apply_overrides,
    compare,
    evaluate_checkpoint,
    fit,
    load_config_dict,
)
from .engine.config import DataConfig, checked_kwargs
from .engine.train import default_runs_dir
from .errors import DataError, InvalidConfig, MissingCurves, OarsegError
from .metrics import display_name
from .plots import plot_ablation_bars, plot_curves, plot_lr_trace

EXIT_OK = 0
EXIT_DATA = 2
EXIT_USAGE = 64
EXIT_INTERNAL = 70

LOSS_WEIGHT_GRID = [(1.0, 0.0), (0.8, 0.2), (0.6, 0.4), (0.5, 0.5), (0.4, 0.6), (0.2, 0.8), (0.0, 1.0)]
SCHEDULER_ARMS = ["constant", "triangular", "triangular2", "exp_range"]
SCHEDULER_LABELS = {"constant": "without cyclicLR"}
ENCODER_ARMS = ["resnet34_style", "efficientnet_style"]


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits 64 on usage errors instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_effective_config(args) -> dict:
    payload = load_config_dict(args.config)
    payload = apply_overrides(payload, args.set or [])
    if getattr(args, "seed", None) is not None:
        payload["seed"] = args.seed
    return payload


def _runs_dir(args) -> Path:
    return Path(args.out) if getattr(args, "out", None) else default_runs_dir()


# ---------------------------------------------------------------- prepare


def cmd_prepare(args) -> int:
    payload = _load_effective_config(args)
    data_d = dict(payload["dataset"] if "dataset" in payload else payload)
    if "ratios" in data_d and data_d["ratios"] is not None:
        data_d["ratios"] = tuple(data_d["ratios"])
    data_cfg = DataConfig(**checked_kwargs(DataConfig, data_d, "dataset"))
    spec = data_cfg.spec()
    seed = args.seed if args.seed is not None else payload.get("seed", 0)

    ids = list_patients(data_cfg.root)
    shapes: dict[tuple, int] = {}
    errors: list[tuple[str, str]] = []
    for pid in ids:
        try:
            volume, _ = load_patient(data_cfg.root, pid, spec)
            shapes[volume.shape] = shapes.get(volume.shape, 0) + 1
        except DataError as exc:
            errors.append((pid, str(exc)))
    if errors:
        for pid, msg in errors:
            print(f"{pid}: {msg}", file=sys.stderr)
        print(f"{len(errors)} of {len(ids)} patients failed ingestion", file=sys.stderr)
        return EXIT_DATA

    split_seed = data_cfg.split_seed if data_cfg.split_seed is not None else seed
    split = split_patients(ids, data_cfg.ratios, split_seed)
    out_dir = Path(args.out) if args.out else default_runs_dir() / "prepare" / spec.name
    out_dir.mkdir(parents=True, exist_ok=True)
    save_split_manifest(split, out_dir / "split.json")
    summary = {
        "dataset": spec.name,
        "classes": spec.class_names,
        "patients": len(ids),
        "split_sizes": {"train": split.sizes[0], "val": split.sizes[1], "test": split.sizes[2]},
        "shape_histogram": {str(list(s)): n for s, n in sorted(shapes.items())},
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


# ------------------------------------------------------------------ train


def cmd_train(args) -> int:
    payload = _load_effective_config(args)
    cfg = ExperimentConfig.from_dict(payload)
    runs_dir = _runs_dir(args)
    state = fit(cfg, runs_dir=runs_dir)
    run_dir = Path(state.run_dir)
    if args.set:
        (run_dir / "overrides.json").write_text(json.dumps(args.set, indent=2) + "\n")
    best = "none" if state.best is None else (
        f"epoch {state.best.epoch}, val mean DICE {state.best.val_dice:.4f}"
    )
    print(f"run {cfg.run_name}: {state.epoch} epochs, best checkpoint: {best}")
    print(f"artifacts in {run_dir}")
    return EXIT_OK


# --------------------------------------------------------------- evaluate


def cmd_evaluate(args) -> int:
    payload = _load_effective_config(args)
    cfg = ExperimentConfig.from_dict(payload)
    run_dir = _runs_dir(args) / cfg.run_name
    if args.ckpt:
        ckpt = Path(args.ckpt)
    else:
        ckpt = run_dir / "best.ckpt"
        if not ckpt.is_file():  # runs without a validation split keep only last.ckpt
            ckpt = run_dir / "last.ckpt"
    report = evaluate_checkpoint(ckpt, args.split, cfg, out_dir=run_dir)
    for organ, score in report.per_class.items():
        hd = "n/a" if score.hd95_mm is None else f"{score.hd95_mm:.2f} mm"
        print(f"{display_name(organ):>16}: DICE {score.dice:.3f}  HD95 {hd}")
    hd = "n/a" if report.overall_hd95_mm is None else f"{report.overall_hd95_mm:.2f} mm"
    print(f"{'Overall':>16}: DICE {report.overall_dice:.3f}  HD95 {hd}")
    return EXIT_OK


# ----------------------------------------------------------------- ablate


def _ablation_arms(kind: str, base: dict, only: list[str] | None = None) -> list[tuple[str, dict]]:
    """(label, patched config dict) per sweep arm; `only` filters by label or
    underlying grid value (e.g. `constant` and `without cyclicLR` both work)."""
    arms: list[tuple[str, set[str], dict]] = []
    if kind == "loss_weights":
        for dice_w, ce_w in LOSS_WEIGHT_GRID:
            patch = json.loads(json.dumps(base))
            patch["mode"] = "custom"
            patch.setdefault("loss", {})
            patch["loss"]["dice_weight"] = dice_w
            patch["loss"]["ce_weight"] = ce_w
            label = f"dice{dice_w:g}_ce{ce_w:g}"
            arms.append((label, {label}, patch))
    elif kind == "scheduler":
        for policy in SCHEDULER_ARMS:
            patch = json.loads(json.dumps(base))
            patch["mode"] = "custom"
            patch.setdefault("scheduler", {})
            patch["scheduler"]["policy"] = policy
            label = SCHEDULER_LABELS.get(policy, policy)
            arms.append((label, {label, policy}, patch))
    elif kind == "encoder":
        for encoder in ENCODER_ARMS:
            patch = json.loads(json.dumps(base))
            patch["model"]["encoder"] = encoder
            arms.append((encoder, {encoder}, patch))
    else:
        raise InvalidConfig(f"unknown ablation kind {kind!r}")
    if only is not None:
        arms = [arm for arm in arms if arm[1] & set(only)]
        if not arms:
            raise InvalidConfig(f"--arms selected no arms of the {kind!r} sweep")
    return [(label, patch) for label, _, patch in arms]


def cmd_ablate(args) -> int:
    base = _load_effective_config(args)
    runs_dir = _runs_dir(args)
    base_name = base.get("run_name", "ablation")

    results: list[dict] = []
    failures: list[tuple[str, Exception]] = []
    for label, patch in _ablation_arms(args.kind, base, only=args.arms):
        slug = label.replace(" ", "_")
        patch["run_name"] = f"{base_name}_{args.kind}_{slug}"
        try:
            cfg = ExperimentConfig.from_dict(patch)
            state = fit(cfg, runs_dir=runs_dir)
            ckpt = state.best.path if state.best else str(Path(state.run_dir) / "last.ckpt")
            report = evaluate_checkpoint(ckpt, args.split, cfg, out_dir=state.run_dir)
            results.append(
                {
                    "arm": label,
                    "run_dir": state.run_dir,
                    "overall_dice": report.overall_dice,
                    "overall_hd95_mm": report.overall_hd95_mm,
                    "per_class_dice": {o: s.dice for o, s in report.per_class.items()},
                }
            )
        except Exception as exc:  # keep remaining arms alive
            failures.append((label, exc))
            print(f"arm {label!r} failed: {exc}", file=sys.stderr)

    out_dir = runs_dir / f"{base_name}_{args.kind}_ablation"
    out_dir.mkdir(parents=True, exist_ok=True)
    if results:
        organs = list(results[0]["per_class_dice"])
        with open(out_dir / f"ablation_{args.kind}.csv", "w") as fh:
            arm_cols = ",".join(r["arm"] for r in results)
            fh.write(f"organ,{arm_cols}\n")
            for organ in organs:
                row = ",".join(f"{r['per_class_dice'][organ]:.2f}" for r in results)
                fh.write(f"{display_name(organ)},{row}\n")
            fh.write("Overall," + ",".join(f"{r['overall_dice']:.2f}" for r in results) + "\n")
        ranked = sorted(results, key=lambda r: r["overall_dice"], reverse=True)
        with open(out_dir / f"ablation_{args.kind}_ranked.csv", "w") as fh:
            fh.write("arm,overall_dice,overall_hd95_mm\n")
            for r in ranked:
                hd = "" if r["overall_hd95_mm"] is None else f"{r['overall_hd95_mm']:.2f}"
                fh.write(f"{r['arm']},{r['overall_dice']:.4f},{hd}\n")
        fig = plot_ablation_bars(
            [r["arm"] for r in results],
            [r["overall_dice"] for r in results],
            out_dir / f"ablation_{args.kind}.png",
            title=f"{args.kind} ablation",
        )
        plt.close(fig)
        payload = {"kind": args.kind, "results": results, "failed_arms": [a for a, _ in failures]}
        (out_dir / f"ablation_{args.kind}.json").write_text(json.dumps(payload, indent=2) + "\n")
        for r in ranked:
            print(f"{r['arm']:>24}: overall DICE {r['overall_dice']:.3f}")
        print(f"ablation artifacts in {out_dir}")
        return EXIT_OK
    if failures and all(isinstance(exc, DataError) for _, exc in failures):
        return EXIT_DATA
    return EXIT_INTERNAL


# ---------------------------------------------------------------- compare


def _ensure_report(state: TrainState, split: str) -> None:
    path = Path(state.run_dir) / f"report_{split}.json"
    if path.is_file():
        return
    if state.config is None:
        raise MissingCurves(f"{state.run_dir} lacks report_{split}.json and its config")
    ckpt = Path(state.run_dir) / "best.ckpt"
    if not ckpt.is_file():
        ckpt = Path(state.run_dir) / "last.ckpt"
    evaluate_checkpoint(ckpt, split, state.config, out_dir=state.run_dir)


def cmd_compare(args) -> int:
    state_a = TrainState.load(args.run_a)
    state_b = TrainState.load(args.run_b)
    _ensure_report(state_a, args.split)
    _ensure_report(state_b, args.split)
    table = compare(state_a, state_b, split=args.split)
    out_dir = Path(args.out) if args.out else Path(args.run_b).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = out_dir / f"compare_{Path(args.run_a).name}_vs_{Path(args.run_b).name}_{args.split}"
    table.save_csv(stem.with_suffix(".csv"))
    table.save_json(stem.with_suffix(".json"))
    widths = (18, 10, 10, 10, 10, 12)
    header = ("organ", f"{table.label_a} DICE", f"{table.label_a} HD95",
              f"{table.label_b} DICE", f"{table.label_b} HD95", "rel. impr.")
    print("  ".join(f"{h:>{w}}" for h, w in zip(header, widths)))
    for row in table.rows:
        cells = [
            row["organ"],
            *(
                "" if v is None else f"{v:.2f}"
                for v in (
                    row["dice_a"],
                    row["hd95_a"],
                    row["dice_b"],
                    row["hd95_b"],
                    row["dice_rel_improvement"],
                )
            ),
        ]
        print("  ".join(f"{c:>{w}}" for c, w in zip(cells, widths)))
    print(f"tables written to {stem}.csv / {stem}.json")
    return EXIT_OK


# ------------------------------------------------------------------- plot


def cmd_plot(args) -> int:
    out_dir = Path(args.out) if args.out else Path("figures")
    out_dir.mkdir(parents=True, exist_ok=True)
    fig = plot_curves(args.runs, out_dir / "curves.png")
    plt.close(fig)
    fig = plot_lr_trace(args.runs, out_dir / "lr_trace.png")
    plt.close(fig)
    print(f"figures written to {out_dir}/curves.png and {out_dir}/lr_trace.png")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> _Parser:
    parser = _Parser(prog="oarseg", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON or YAML config file")
        p.add_argument(
            "--set", action="append", metavar="KEY=VALUE", help="dot-path config override"
        )
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output / runs directory")

    p = sub.add_parser("prepare", help="ingest a dataset, write split manifest and summary")
    common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="run a training experiment")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a split")
    common(p)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--ckpt", help="checkpoint path (default: run's best.ckpt)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="run a sweep (loss weights, scheduler, or encoder)")
    common(p)
    p.add_argument("--kind", required=True, choices=["loss_weights", "scheduler", "encoder"])
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument(
        "--arms", type=lambda s: s.split(","), help="comma-separated subset of sweep arms"
    )
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("compare", help="side-by-side table of two runs")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", help="curve and learning-rate figures from run dirs")
    p.add_argument("runs", nargs="*")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"oarseg: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"oarseg: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvalidConfig as exc:
        print(f"oarseg: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OarsegError as exc:
        print(f"oarseg: error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
