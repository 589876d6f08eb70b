from .blocks import DoubleConvBlock, MBConvBlock, ResidualBlock, SqueezeExcite
from .config import ENCODERS, RESIDUAL_VARIANTS, VARIANTS, ModelConfig
from .encoders import EfficientNetStyleEncoder, PlainEncoder, ResNet34StyleEncoder
from .nets import (
    UNet,
    UNetPlusPlus,
    bottleneck_conv_dilations,
    build_model,
    conv_dilations,
    parameter_count,
)

__all__ = [
    "ENCODERS",
    "RESIDUAL_VARIANTS",
    "VARIANTS",
    "DoubleConvBlock",
    "EfficientNetStyleEncoder",
    "MBConvBlock",
    "ModelConfig",
    "PlainEncoder",
    "ResNet34StyleEncoder",
    "ResidualBlock",
    "SqueezeExcite",
    "UNet",
    "UNetPlusPlus",
    "bottleneck_conv_dilations",
    "build_model",
    "conv_dilations",
    "parameter_count",
]
