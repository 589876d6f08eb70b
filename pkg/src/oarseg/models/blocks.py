"""Dimension-generic building blocks (2D/3D) for the network zoo.

Convs that feed a normalization layer carry no bias: instance/batch norm
cancels a per-channel constant shift exactly, which would leave the bias
without gradient.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import InvalidConfig


def conv_nd(dim: int) -> type[nn.Module]:
    return {2: nn.Conv2d, 3: nn.Conv3d}[dim]


def conv_transpose_nd(dim: int) -> type[nn.Module]:
    return {2: nn.ConvTranspose2d, 3: nn.ConvTranspose3d}[dim]


def maxpool_nd(dim: int) -> type[nn.Module]:
    return {2: nn.MaxPool2d, 3: nn.MaxPool3d}[dim]


def _degenerate_norm(x: torch.Tensor, weight, bias) -> torch.Tensor:
    # a single element per normalization group has zero variance: the
    # normalized value is exactly 0, so the output is the shift term
    view = (1, -1) + (1,) * (x.ndim - 2)
    return x * 0.0 + weight.view(view) * 0.0 + bias.view(view)


class _SafeInstanceNormMixin:
    """Instance norm that tolerates a single spatial element (the bottleneck
    of a network whose input extent equals its divisor)."""

    def forward(self, x):
        if x.numel() == x.shape[0] * x.shape[1]:
            return _degenerate_norm(x, self.weight, self.bias)
        return super().forward(x)


class SafeInstanceNorm2d(_SafeInstanceNormMixin, nn.InstanceNorm2d):
    pass


class SafeInstanceNorm3d(_SafeInstanceNormMixin, nn.InstanceNorm3d):
    pass


class _SafeBatchNormMixin:
    def forward(self, x):
        if self.training and x.numel() == x.shape[1]:
            return _degenerate_norm(x, self.weight, self.bias)
        return super().forward(x)


class SafeBatchNorm2d(_SafeBatchNormMixin, nn.BatchNorm2d):
    pass


class SafeBatchNorm3d(_SafeBatchNormMixin, nn.BatchNorm3d):
    pass


def make_norm(dim: int, kind: str, channels: int) -> nn.Module:
    if kind == "instance":
        cls = {2: SafeInstanceNorm2d, 3: SafeInstanceNorm3d}[dim]
        return cls(channels, affine=True)
    if kind == "batch":
        cls = {2: SafeBatchNorm2d, 3: SafeBatchNorm3d}[dim]
        return cls(channels)
    raise InvalidConfig(f"unknown norm kind {kind!r}")


def make_conv(
    dim: int,
    in_ch: int,
    out_ch: int,
    kernel: int = 3,
    stride: int = 1,
    dilation: int = 1,
    groups: int = 1,
    bias: bool = False,
) -> nn.Module:
    padding = dilation * (kernel - 1) // 2
    return conv_nd(dim)(
        in_ch,
        out_ch,
        kernel_size=kernel,
        stride=stride,
        padding=padding,
        dilation=dilation,
        groups=groups,
        bias=bias,
    )


class DoubleConvBlock(nn.Module):
    """Two conv-norm-activation stacks (classic U-Net block)."""

    def __init__(self, dim, in_ch, out_ch, norm="batch", dilation=1):
        super().__init__()
        self.conv1 = make_conv(dim, in_ch, out_ch, dilation=dilation)
        self.norm1 = make_norm(dim, norm, out_ch)
        self.conv2 = make_conv(dim, out_ch, out_ch, dilation=dilation)
        self.norm2 = make_norm(dim, norm, out_ch)
        self.act = nn.ReLU(inplace=True)

    def forward(self, x):
        x = self.act(self.norm1(self.conv1(x)))
        return self.act(self.norm2(self.conv2(x)))


class ResidualBlock(nn.Module):
    """Basic residual unit; normalization follows each convolution."""

    def __init__(self, dim, in_ch, out_ch, norm="instance", stride=1, dilation=1):
        super().__init__()
        self.conv1 = make_conv(dim, in_ch, out_ch, stride=stride, dilation=dilation)
        self.norm1 = make_norm(dim, norm, out_ch)
        self.conv2 = make_conv(dim, out_ch, out_ch, dilation=dilation)
        self.norm2 = make_norm(dim, norm, out_ch)
        self.act = nn.ReLU(inplace=True)
        if stride != 1 or in_ch != out_ch:
            self.proj = nn.Sequential(
                make_conv(dim, in_ch, out_ch, kernel=1, stride=stride),
                make_norm(dim, norm, out_ch),
            )
        else:
            self.proj = nn.Identity()

    def forward(self, x):
        residual = self.proj(x)
        out = self.act(self.norm1(self.conv1(x)))
        out = self.norm2(self.conv2(out))
        return self.act(out + residual)


class SqueezeExcite(nn.Module):
    def __init__(self, dim, channels, reduction=4):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.squeeze = make_conv(dim, channels, hidden, kernel=1, bias=True)
        self.expand = make_conv(dim, hidden, channels, kernel=1, bias=True)
        self.act = nn.SiLU(inplace=True)
        self.spatial_dims = tuple(range(2, dim + 2))

    def forward(self, x):
        s = x.mean(dim=self.spatial_dims, keepdim=True)
        s = torch.sigmoid(self.expand(self.act(self.squeeze(s))))
        return x * s


class MBConvBlock(nn.Module):
    """Inverted bottleneck with depthwise conv and squeeze-excitation."""

    def __init__(self, dim, in_ch, out_ch, norm="instance", stride=1, dilation=1, expand_ratio=4):
        super().__init__()
        hidden = in_ch * expand_ratio
        self.expand = (
            nn.Sequential(
                make_conv(dim, in_ch, hidden, kernel=1),
                make_norm(dim, norm, hidden),
                nn.SiLU(inplace=True),
            )
            if expand_ratio != 1
            else nn.Identity()
        )
        self.depthwise = nn.Sequential(
            make_conv(
                dim, hidden, hidden, kernel=3, stride=stride, dilation=dilation, groups=hidden
            ),
            make_norm(dim, norm, hidden),
            nn.SiLU(inplace=True),
        )
        self.se = SqueezeExcite(dim, hidden)
        self.project = nn.Sequential(
            make_conv(dim, hidden, out_ch, kernel=1),
            make_norm(dim, norm, out_ch),
        )
        self.use_skip = stride == 1 and in_ch == out_ch

    def forward(self, x):
        out = self.project(self.se(self.depthwise(self.expand(x))))
        return out + x if self.use_skip else out


class UpsampleBlock(nn.Module):
    """Stride-2 transposed conv halving channels."""

    def __init__(self, dim, in_ch, out_ch):
        super().__init__()
        self.up = conv_transpose_nd(dim)(in_ch, out_ch, kernel_size=2, stride=2, bias=False)

    def forward(self, x):
        return self.up(x)


def init_parameters(module: nn.Module) -> None:
    """He fan-in init for convolutions, ones/zeros for norm scale/shift."""
    for m in module.modules():
        if isinstance(
            m, (nn.Conv2d, nn.Conv3d, nn.ConvTranspose2d, nn.ConvTranspose3d)
        ):
            nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(
            m,
            (
                nn.InstanceNorm2d,
                nn.InstanceNorm3d,
                nn.BatchNorm2d,
                nn.BatchNorm3d,
            ),
        ):
            if m.weight is not None:
                nn.init.ones_(m.weight)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
