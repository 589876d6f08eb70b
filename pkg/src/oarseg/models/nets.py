"""The five segmentation network variants and the uniform build/forward API.

Every network maps a batch (B, in_channels, *spatial) to per-class logits
(B, num_classes, *spatial); each spatial extent must be divisible by
2**depth.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import ShapeError
from .blocks import DoubleConvBlock, ResidualBlock, UpsampleBlock, conv_nd, init_parameters
from .config import RESIDUAL_VARIANTS, ModelConfig
from .encoders import build_encoder


def _check_batch(cfg: ModelConfig, batch: torch.Tensor) -> None:
    want_rank = cfg.dim + 2
    if batch.ndim != want_rank:
        raise ShapeError(
            f"{cfg.variant} expects rank-{want_rank} input (B, C, *spatial), "
            f"got rank {batch.ndim}"
        )
    if batch.shape[1] != cfg.in_channels:
        raise ShapeError(
            f"expected {cfg.in_channels} input channels, got {batch.shape[1]}"
        )
    divisor = cfg.divisor
    bad = [n for n in batch.shape[2:] if n % divisor != 0]
    if bad:
        raise ShapeError(
            f"spatial extents {tuple(batch.shape[2:])} must be divisible by "
            f"{divisor} (depth {cfg.depth})",
            divisor=divisor,
        )


def _decoder_block(cfg: ModelConfig, in_ch: int, out_ch: int) -> nn.Module:
    if cfg.variant in RESIDUAL_VARIANTS:
        return ResidualBlock(cfg.dim, in_ch, out_ch, norm=cfg.norm)
    return DoubleConvBlock(cfg.dim, in_ch, out_ch, norm=cfg.norm)


class UNet(nn.Module):
    """Encoder-decoder with skip connections; covers the U-Net and ResU-Net
    variants (block type and dimensionality come from the config)."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.config = cfg
        self.encoder = build_encoder(cfg)
        widths = self.encoder.out_channels
        ups, blocks = [], []
        for i in range(cfg.depth - 1, -1, -1):
            ups.append(UpsampleBlock(cfg.dim, widths[i + 1], widths[i]))
            blocks.append(_decoder_block(cfg, widths[i] * 2, widths[i]))
        self.ups = nn.ModuleList(ups)
        self.decoder_blocks = nn.ModuleList(blocks)
        self.head = conv_nd(cfg.dim)(widths[0], cfg.num_classes, kernel_size=1)
        init_parameters(self)

    def forward(self, x):
        _check_batch(self.config, x)
        feats = self.encoder(x)
        out = feats[-1]
        for k, (up, block) in enumerate(zip(self.ups, self.decoder_blocks)):
            skip = feats[self.config.depth - 1 - k]
            out = block(torch.cat([up(out), skip], dim=1))
        return self.head(out)


class UNetPlusPlus(nn.Module):
    """Nested dense skip pathways; node (i, j) re-convolves the concatenation
    of all same-level predecessors with the upsampled deeper node."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.config = cfg
        self.encoder = build_encoder(cfg)
        widths = self.encoder.out_channels
        depth = cfg.depth
        self.blocks = nn.ModuleDict()
        self.ups = nn.ModuleDict()
        for j in range(1, depth + 1):
            for i in range(depth + 1 - j):
                self.ups[f"up_{i}_{j}"] = UpsampleBlock(cfg.dim, widths[i + 1], widths[i])
                in_ch = widths[i] * (j + 1)
                self.blocks[f"node_{i}_{j}"] = _decoder_block(cfg, in_ch, widths[i])
        self.head = conv_nd(cfg.dim)(widths[0], cfg.num_classes, kernel_size=1)
        if cfg.deep_supervision:
            self.aux_heads = nn.ModuleList(
                conv_nd(cfg.dim)(widths[0], cfg.num_classes, kernel_size=1)
                for _ in range(depth - 1)
            )
        init_parameters(self)

    def _grid(self, x):
        feats = self.encoder(x)
        depth = self.config.depth
        grid = {(i, 0): feats[i] for i in range(depth + 1)}
        for j in range(1, depth + 1):
            for i in range(depth + 1 - j):
                upper = [grid[(i, k)] for k in range(j)]
                up = self.ups[f"up_{i}_{j}"](grid[(i + 1, j - 1)])
                grid[(i, j)] = self.blocks[f"node_{i}_{j}"](torch.cat(upper + [up], dim=1))
        return grid

    def forward(self, x):
        _check_batch(self.config, x)
        grid = self._grid(x)
        return self.head(grid[(0, self.config.depth)])

    def forward_heads(self, x):
        """Final logits plus auxiliary deep-supervision logits (averaged into
        the loss by the training loop)."""
        _check_batch(self.config, x)
        grid = self._grid(x)
        heads = [self.head(grid[(0, self.config.depth)])]
        if self.config.deep_supervision:
            heads += [
                aux(grid[(0, j)]) for j, aux in enumerate(self.aux_heads, start=1)
            ]
        return heads


def build_model(cfg: ModelConfig, seed: int | None = None) -> nn.Module:
    """Construct an initialized network; the returned module carries the
    config on `.config`."""
    if seed is not None:
        torch.manual_seed(seed)
    if cfg.variant == "unetpp2d":
        return UNetPlusPlus(cfg)
    return UNet(cfg)


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def conv_dilations(model: nn.Module, spatial_only: bool = True) -> dict[str, tuple[int, ...]]:
    """Dilation of every convolution keyed by module path. kernel-1 convs are
    skipped by default (dilation is meaningless for them)."""
    out = {}
    for name, module in model.named_modules():
        if isinstance(module, (nn.Conv2d, nn.Conv3d)):
            if spatial_only and max(module.kernel_size) == 1:
                continue
            out[name] = tuple(module.dilation)
    return out


def bottleneck_conv_dilations(model: nn.Module) -> dict[str, tuple[int, ...]]:
    """Dilations of the spatial convs in the deepest encoder stage."""
    return conv_dilations(model.encoder.stages[-1])
