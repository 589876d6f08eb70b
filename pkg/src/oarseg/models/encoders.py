"""Encoder (downsampling path) families.

All encoders emit depth+1 feature maps: index i has base_width * 2**i
channels at 1/2**i resolution, so any decoder can consume any family.
The resnet34_style and efficientnet_style families are reduced desk-scale
versions of their namesakes: basic residual stages with the [3, 4, 6, 3]
layout, and inverted-bottleneck stages with squeeze-excitation plus
compound width/depth scaling knobs, respectively.
"""

from __future__ import annotations

import math

import torch.nn as nn

from .blocks import DoubleConvBlock, MBConvBlock, ResidualBlock, make_conv, make_norm, maxpool_nd
from .config import ModelConfig

RESNET34_STAGE_BLOCKS = [3, 4, 6, 3]
EFFNET_STAGE_REPEATS = [1, 2, 2, 3, 3]


def _stage_dilation(cfg: ModelConfig, stage: int) -> int:
    # dilation applies to the two deepest encoder stages and the bottleneck
    return cfg.dilation if stage >= cfg.depth - 2 else 1


class PlainEncoder(nn.Module):
    """The variant's own downsampling path.

    Residual variants use strided residual blocks; the plain U-Nets use
    double-conv blocks with max pooling, as in the original architecture.
    """

    def __init__(self, cfg: ModelConfig, residual: bool):
        super().__init__()
        widths = cfg.stage_widths
        self.out_channels = widths
        self.residual = residual
        stages = []
        in_ch = cfg.in_channels
        for i, width in enumerate(widths):
            dilation = _stage_dilation(cfg, i)
            if residual:
                stride = 1 if i == 0 else 2
                stages.append(
                    ResidualBlock(
                        cfg.dim, in_ch, width, norm=cfg.norm, stride=stride, dilation=dilation
                    )
                )
            else:
                block = DoubleConvBlock(cfg.dim, in_ch, width, norm=cfg.norm, dilation=dilation)
                if i == 0:
                    stages.append(block)
                else:
                    stages.append(nn.Sequential(maxpool_nd(cfg.dim)(2), block))
            in_ch = width
        self.stages = nn.ModuleList(stages)

    def forward(self, x):
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats


class ResNet34StyleEncoder(nn.Module):
    """Basic residual stages with the ResNet34 [3, 4, 6, 3] block layout,
    scaled by base_width and instantiated in the variant's dimensionality."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        widths = cfg.stage_widths
        self.out_channels = widths
        self.stem = nn.Sequential(
            make_conv(cfg.dim, cfg.in_channels, widths[0]),
            make_norm(cfg.dim, cfg.norm, widths[0]),
            nn.ReLU(inplace=True),
        )
        stages = []
        for i in range(1, len(widths)):
            n_blocks = RESNET34_STAGE_BLOCKS[min(i - 1, len(RESNET34_STAGE_BLOCKS) - 1)]
            dilation = _stage_dilation(cfg, i)
            blocks = [
                ResidualBlock(
                    cfg.dim, widths[i - 1], widths[i], norm=cfg.norm, stride=2, dilation=dilation
                )
            ]
            blocks += [
                ResidualBlock(cfg.dim, widths[i], widths[i], norm=cfg.norm, dilation=dilation)
                for _ in range(n_blocks - 1)
            ]
            stages.append(nn.Sequential(*blocks))
        self.stages = nn.ModuleList(stages)

    def forward(self, x):
        x = self.stem(x)
        feats = [x]
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats


class EfficientNetStyleEncoder(nn.Module):
    """Inverted-bottleneck (MBConv) stages with squeeze-excitation.

    width_coef / depth_coef are the compound scaling knobs: they multiply
    the per-stage hidden expansion repeats and widths of the internal
    blocks while the emitted skip channels keep the shared progression.
    """

    def __init__(self, cfg: ModelConfig, width_coef: float = 1.0, depth_coef: float = 1.0):
        super().__init__()
        widths = [max(4, int(round(w * width_coef))) for w in cfg.stage_widths]
        # skips must match the shared progression for the decoder
        self.out_channels = cfg.stage_widths
        self.stem = nn.Sequential(
            make_conv(cfg.dim, cfg.in_channels, cfg.stage_widths[0]),
            make_norm(cfg.dim, cfg.norm, cfg.stage_widths[0]),
            nn.SiLU(inplace=True),
        )
        stages = []
        prev = cfg.stage_widths[0]
        for i in range(1, len(cfg.stage_widths)):
            repeats = EFFNET_STAGE_REPEATS[min(i - 1, len(EFFNET_STAGE_REPEATS) - 1)]
            n_blocks = max(1, math.ceil(repeats * depth_coef))
            hidden = widths[i]
            out = cfg.stage_widths[i]
            dilation = _stage_dilation(cfg, i)
            blocks = [MBConvBlock(cfg.dim, prev, hidden, norm=cfg.norm, stride=2, dilation=dilation)]
            blocks += [
                MBConvBlock(cfg.dim, hidden, hidden, norm=cfg.norm, dilation=dilation)
                for _ in range(n_blocks - 1)
            ]
            if hidden != out:
                blocks.append(
                    nn.Sequential(
                        make_conv(cfg.dim, hidden, out, kernel=1),
                        make_norm(cfg.dim, cfg.norm, out),
                    )
                )
            stages.append(nn.Sequential(*blocks))
            prev = out
        self.stages = nn.ModuleList(stages)

    def forward(self, x):
        x = self.stem(x)
        feats = [x]
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats


def build_encoder(cfg: ModelConfig) -> nn.Module:
    if cfg.encoder == "plain":
        from .config import RESIDUAL_VARIANTS

        return PlainEncoder(cfg, residual=cfg.variant in RESIDUAL_VARIANTS)
    if cfg.encoder == "resnet34_style":
        return ResNet34StyleEncoder(cfg)
    return EfficientNetStyleEncoder(cfg)
