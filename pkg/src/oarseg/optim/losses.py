"""DICE, cross-entropy, and the weighted DICE+CE compound loss."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from ..errors import InvalidConfig, LabelOutOfRange, ShapeMismatch


@dataclass
class LossConfig:
    dice_weight: float = 0.4
    ce_weight: float = 0.6
    smooth: float = 1e-5
    include_background: bool = False

    def __post_init__(self):
        if self.dice_weight < 0 or self.ce_weight < 0:
            raise InvalidConfig("loss weights must be nonnegative")
        if self.dice_weight + self.ce_weight <= 0:
            raise InvalidConfig("dice_weight + ce_weight must be > 0")
        if self.smooth <= 0:
            raise InvalidConfig("smooth must be > 0")

    @classmethod
    def dice_only(cls) -> "LossConfig":
        return cls(dice_weight=1.0, ce_weight=0.0)


def _check_inputs(logits: torch.Tensor, target: torch.Tensor) -> None:
    if logits.ndim != target.ndim + 1:
        raise ShapeMismatch(
            f"logits rank {logits.ndim} incompatible with target rank {target.ndim}"
        )
    if logits.shape[0] != target.shape[0] or logits.shape[2:] != target.shape[1:]:
        raise ShapeMismatch(
            f"logits {tuple(logits.shape)} vs target {tuple(target.shape)}"
        )
    n_classes = logits.shape[1]
    if target.numel():
        lo, hi = int(target.min()), int(target.max())
        if lo < 0 or hi >= n_classes:
            raise LabelOutOfRange(
                f"target labels span [{lo}, {hi}] but logits have {n_classes} channels"
            )


def dice_loss(
    logits: torch.Tensor, target: torch.Tensor, cfg: LossConfig | None = None
) -> torch.Tensor:
    """Soft multi-class DICE loss, 1 - macro-averaged per-class soft dice.

    logits: (B, C, *spatial); target: (B, *spatial) integer labels. Per-class
    sums pool over batch and space; background (class 0) is excluded unless
    cfg.include_background.
    """
    cfg = cfg or LossConfig()
    _check_inputs(logits, target)
    n_classes = logits.shape[1]
    probs = F.softmax(logits, dim=1)
    onehot = F.one_hot(target.long(), num_classes=n_classes)
    onehot = onehot.movedim(-1, 1).to(probs.dtype)

    dims = (0, *range(2, logits.ndim))
    intersect = (probs * onehot).sum(dim=dims)
    denom = probs.sum(dim=dims) + onehot.sum(dim=dims)
    per_class = (2.0 * intersect + cfg.smooth) / (denom + cfg.smooth)
    if not cfg.include_background:
        per_class = per_class[1:]
    return 1.0 - per_class.mean()


def ce_loss(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean per-voxel categorical cross-entropy."""
    _check_inputs(logits, target)
    return F.cross_entropy(logits, target.long())


def combined_loss(
    logits: torch.Tensor, target: torch.Tensor, cfg: LossConfig | None = None
) -> torch.Tensor:
    """cfg.dice_weight * dice_loss + cfg.ce_weight * ce_loss (defaults 0.4/0.6)."""
    cfg = cfg or LossConfig()
    if cfg.ce_weight == 0:
        return cfg.dice_weight * dice_loss(logits, target, cfg)
    if cfg.dice_weight == 0:
        return cfg.ce_weight * ce_loss(logits, target)
    return cfg.dice_weight * dice_loss(logits, target, cfg) + cfg.ce_weight * ce_loss(
        logits, target
    )
