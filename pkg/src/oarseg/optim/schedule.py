"""Cyclic learning-rate schedule (triangular / triangular2 / exp_range).

The rate oscillates linearly between base_lr and max_lr over cycles of
2 * step_size iterations. triangular keeps a constant envelope, triangular2
halves the envelope after every cycle, exp_range decays it by gamma each
iteration. The constant policy pins base_lr.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import InvalidConfig

POLICIES = ("constant", "triangular", "triangular2", "exp_range")


@dataclass
class SchedulerConfig:
    policy: str = "exp_range"
    base_lr: float = 0.001
    max_lr: float = 0.006
    step_size: int | None = None  # iterations per half-cycle; None -> 2x iters/epoch at fit time
    gamma: float = 0.9998  # exp_range only

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise InvalidConfig(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if not 0 < self.base_lr <= self.max_lr:
            raise InvalidConfig(
                f"need 0 < base_lr <= max_lr, got base={self.base_lr} max={self.max_lr}"
            )
        if self.step_size is not None and self.step_size < 1:
            raise InvalidConfig(f"step_size must be >= 1, got {self.step_size}")
        if not 0 < self.gamma <= 1:
            raise InvalidConfig(f"gamma must be in (0, 1], got {self.gamma}")

    def resolved(self, iterations_per_epoch: int) -> "SchedulerConfig":
        """Fill a missing step_size with the 2x-iterations-per-epoch default."""
        if self.step_size is not None:
            return self
        return SchedulerConfig(
            policy=self.policy,
            base_lr=self.base_lr,
            max_lr=self.max_lr,
            step_size=max(1, 2 * iterations_per_epoch),
            gamma=self.gamma,
        )


def lr_at(cfg: SchedulerConfig, iteration: int) -> float:
    """Learning rate at a zero-based iteration index (pure closed form)."""
    if iteration < 0:
        raise InvalidConfig(f"iteration must be >= 0, got {iteration}")
    if cfg.policy == "constant":
        return cfg.base_lr
    if cfg.step_size is None:
        raise InvalidConfig("step_size is unresolved; call cfg.resolved(...) first")
    t = iteration
    cycle = math.floor(1 + t / (2 * cfg.step_size))
    x = abs(t / cfg.step_size - 2 * cycle + 1)
    if cfg.policy == "triangular":
        scale = 1.0
    elif cfg.policy == "triangular2":
        scale = 2.0 ** (1 - cycle)
    else:  # exp_range
        scale = cfg.gamma**t
    return cfg.base_lr + (cfg.max_lr - cfg.base_lr) * max(0.0, 1.0 - x) * scale


def write_lr_trace(cfg: SchedulerConfig, iterations: int, path: str | Path) -> None:
    """Dump `iteration,lr` CSV for plotting and exact-value checks."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "lr"])
        for t in range(iterations):
            writer.writerow([t, repr(lr_at(cfg, t))])


def read_lr_trace(path: str | Path) -> list[tuple[int, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [(int(r["iteration"]), float(r["lr"])) for r in rows]
