"""Optimizer construction and per-iteration learning-rate control."""

from __future__ import annotations

import torch

from ..errors import InvalidConfig

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


def make_optimizer(params, lr0: float) -> torch.optim.Optimizer:
    """ADAM with standard moment defaults and no weight decay."""
    if lr0 <= 0:
        raise InvalidConfig(f"lr0 must be > 0, got {lr0}")
    return torch.optim.Adam(params, lr=lr0, betas=ADAM_BETAS, eps=ADAM_EPS, weight_decay=0.0)


def set_lr(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr
