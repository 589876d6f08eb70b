"""Declarative model configuration."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import InvalidConfig

VARIANTS = ("unet2d", "unetpp2d", "resunet2d", "dilated_resunet2d", "resunet3d")
ENCODERS = ("plain", "resnet34_style", "efficientnet_style")
RESIDUAL_VARIANTS = ("resunet2d", "dilated_resunet2d", "resunet3d")

DEFAULT_DILATION = 3


@dataclass
class ModelConfig:
    variant: str
    encoder: str = "plain"
    in_channels: int = 1
    num_classes: int = 2
    base_width: int = 16
    depth: int = 5  # number of downsampling steps
    dilation: int | None = None  # resolved to 3 for dilated_resunet2d, else 1
    norm: str | None = None  # resolved to instance for residual variants, else batch
    deep_supervision: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidConfig(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.encoder not in ENCODERS:
            raise InvalidConfig(f"encoder must be one of {ENCODERS}, got {self.encoder!r}")
        if self.num_classes < 2:
            raise InvalidConfig(f"num_classes must be >= 2, got {self.num_classes}")
        if self.depth < 2:
            raise InvalidConfig(f"depth must be >= 2, got {self.depth}")
        if self.base_width < 4:
            raise InvalidConfig(f"base_width must be >= 4, got {self.base_width}")
        if self.in_channels < 1:
            raise InvalidConfig(f"in_channels must be >= 1, got {self.in_channels}")

        if self.dilation is None:
            self.dilation = DEFAULT_DILATION if self.variant == "dilated_resunet2d" else 1
        if self.variant == "dilated_resunet2d":
            if self.dilation < 2:
                raise InvalidConfig("dilated_resunet2d requires dilation >= 2")
        elif self.dilation != 1:
            raise InvalidConfig(f"variant {self.variant!r} requires dilation == 1")

        if self.norm is None:
            self.norm = "instance" if self.variant in RESIDUAL_VARIANTS else "batch"
        if self.norm not in ("instance", "batch"):
            raise InvalidConfig(f"norm must be 'instance' or 'batch', got {self.norm!r}")

        if self.deep_supervision and self.variant != "unetpp2d":
            raise InvalidConfig("deep_supervision is only supported by unetpp2d")

    @property
    def dim(self) -> int:
        return 3 if self.variant == "resunet3d" else 2

    @property
    def divisor(self) -> int:
        """Required divisor of every spatial extent."""
        return 2**self.depth

    @property
    def stage_widths(self) -> list[int]:
        return [self.base_width * 2**i for i in range(self.depth + 1)]

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "encoder": self.encoder,
            "in_channels": self.in_channels,
            "num_classes": self.num_classes,
            "base_width": self.base_width,
            "depth": self.depth,
            "dilation": self.dilation,
            "norm": self.norm,
            "deep_supervision": self.deep_supervision,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelConfig":
        return cls(**payload)
