"""Experiment configuration: one declarative recipe per run.

`mode` pins the two preset recipes: baseline is DICE-only loss with a
constant learning rate, enhanced is DICE+CE at 0.4/0.6 with the exp_range
cyclic schedule between 0.001 and 0.006. Conflicting explicit settings are
rejected at construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..data.types import DATASET_CLASSES, AugmentationConfig, DatasetSpec
from ..data.synthetic import SYNTHETIC_CLASSES
from ..errors import InvalidConfig
from ..models.config import ModelConfig
from ..optim.losses import LossConfig
from ..optim.schedule import SchedulerConfig

MODES = ("baseline", "enhanced", "custom")

ENHANCED_WEIGHTS = (0.4, 0.6)
ENHANCED_SCHEDULER = {"policy": "exp_range", "base_lr": 0.001, "max_lr": 0.006}
DEFAULT_RATIOS = (0.7, 0.15, 0.15)


def checked_kwargs(cls, payload: dict, section: str) -> dict:
    """Reject unknown config keys with a usage error instead of a TypeError."""
    known = set(cls.__dataclass_fields__)
    unknown = sorted(set(payload) - known)
    if unknown:
        raise InvalidConfig(f"unknown {section} config keys: {unknown}")
    return payload


@dataclass
class DataConfig:
    name: str
    root: str
    class_names: list[str] | None = None
    ratios: tuple[float, float, float] = DEFAULT_RATIOS
    split_seed: int | None = None

    def spec(self) -> DatasetSpec:
        if self.class_names:
            return DatasetSpec(name=self.name, class_names=list(self.class_names))
        if self.name in DATASET_CLASSES:
            return DatasetSpec(name=self.name)
        if self.name == "synthetic":
            return DatasetSpec(name=self.name, class_names=list(SYNTHETIC_CLASSES))
        raise InvalidConfig(f"dataset {self.name!r} needs an explicit class_names list")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "root": str(self.root),
            "class_names": self.spec().class_names,
            "ratios": list(self.ratios),
            "split_seed": self.split_seed,
        }


@dataclass
class ExperimentConfig:
    run_name: str
    dataset: DataConfig
    model: ModelConfig
    loss: LossConfig = field(default_factory=LossConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)
    epochs: int = 1
    batch_size: int | None = None  # default 2 for 3D, 16 for 2D
    patch_size: tuple[int, int, int] | None = None  # None = full volumes
    seed: int = 0
    mode: str = "custom"

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.epochs < 0:
            raise InvalidConfig(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size is None:
            self.batch_size = 2 if self.model.dim == 3 else 16
        if self.batch_size < 1:
            raise InvalidConfig(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patch_size is not None:
            self.patch_size = tuple(int(p) for p in self.patch_size)
            if len(self.patch_size) != 3 or any(p < 1 for p in self.patch_size):
                raise InvalidConfig(f"patch_size must be 3 positive ints, got {self.patch_size}")

        spec = self.dataset.spec()
        if self.model.num_classes != spec.num_classes:
            raise InvalidConfig(
                f"model.num_classes={self.model.num_classes} but dataset "
                f"{spec.name!r} has {spec.num_classes} classes incl. background"
            )

        if self.mode == "baseline":
            if self.loss.ce_weight != 0 or self.loss.dice_weight <= 0:
                raise InvalidConfig(
                    "baseline mode requires a DICE-only loss (ce_weight=0)"
                )
            if self.scheduler.policy != "constant":
                raise InvalidConfig("baseline mode requires the constant scheduler")
        elif self.mode == "enhanced":
            if (self.loss.dice_weight, self.loss.ce_weight) != ENHANCED_WEIGHTS:
                raise InvalidConfig(
                    f"enhanced mode requires DICE/CE weights {ENHANCED_WEIGHTS}"
                )
            want = ENHANCED_SCHEDULER
            got = (self.scheduler.policy, self.scheduler.base_lr, self.scheduler.max_lr)
            if got != (want["policy"], want["base_lr"], want["max_lr"]):
                raise InvalidConfig(
                    "enhanced mode requires exp_range between 0.001 and 0.006"
                )

    @property
    def split_seed(self) -> int:
        return self.seed if self.dataset.split_seed is None else self.dataset.split_seed

    def to_dict(self) -> dict:
        return {
            "run_name": self.run_name,
            "mode": self.mode,
            "seed": self.seed,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "patch_size": list(self.patch_size) if self.patch_size else None,
            "dataset": self.dataset.to_dict(),
            "model": self.model.to_dict(),
            "loss": {
                "dice_weight": self.loss.dice_weight,
                "ce_weight": self.loss.ce_weight,
                "smooth": self.loss.smooth,
                "include_background": self.loss.include_background,
            },
            "scheduler": {
                "policy": self.scheduler.policy,
                "base_lr": self.scheduler.base_lr,
                "max_lr": self.scheduler.max_lr,
                "step_size": self.scheduler.step_size,
                "gamma": self.scheduler.gamma,
            },
            "augmentation": vars(self.augmentation).copy(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        payload = dict(payload)
        mode = payload.get("mode", "custom")
        loss_d = dict(payload.get("loss") or {})
        sched_d = dict(payload.get("scheduler") or {})
        if mode == "baseline":
            loss_d.setdefault("dice_weight", 1.0)
            loss_d.setdefault("ce_weight", 0.0)
            sched_d.setdefault("policy", "constant")
        elif mode == "enhanced":
            loss_d.setdefault("dice_weight", ENHANCED_WEIGHTS[0])
            loss_d.setdefault("ce_weight", ENHANCED_WEIGHTS[1])
            for key, val in ENHANCED_SCHEDULER.items():
                sched_d.setdefault(key, val)

        data_d = dict(payload["dataset"])
        if "ratios" in data_d and data_d["ratios"] is not None:
            data_d["ratios"] = tuple(data_d["ratios"])
        aug_d = payload.get("augmentation") or {}
        aug_d = {
            k: tuple(v) if isinstance(v, list) else v for k, v in dict(aug_d).items()
        }
        known_top = set(cls.__dataclass_fields__)
        unknown = sorted(set(payload) - known_top)
        if unknown:
            raise InvalidConfig(f"unknown experiment config keys: {unknown}")
        if "run_name" not in payload or "dataset" not in payload or "model" not in payload:
            raise InvalidConfig("experiment config needs run_name, dataset, and model")
        return cls(
            run_name=payload["run_name"],
            dataset=DataConfig(**checked_kwargs(DataConfig, data_d, "dataset")),
            model=ModelConfig(**checked_kwargs(ModelConfig, payload["model"], "model")),
            loss=LossConfig(**checked_kwargs(LossConfig, loss_d, "loss")),
            scheduler=SchedulerConfig(**checked_kwargs(SchedulerConfig, sched_d, "scheduler")),
            augmentation=AugmentationConfig(
                **checked_kwargs(AugmentationConfig, aug_d, "augmentation")
            ),
            epochs=payload.get("epochs", 1),
            batch_size=payload.get("batch_size"),
            patch_size=payload.get("patch_size"),
            seed=payload.get("seed", 0),
            mode=mode,
        )


def load_config_dict(path: str | Path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix in (".yaml", ".yml"):
        return yaml.safe_load(text)
    return json.loads(text)


def apply_overrides(payload: dict, overrides: list[str]) -> dict:
    """Apply `a.b.c=value` dot-path patches; values parse as JSON, falling
    back to plain strings."""
    out = json.loads(json.dumps(payload))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise InvalidConfig(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise InvalidConfig(f"override {key!r} crosses a non-mapping node")
        node[parts[-1]] = value
    return out
