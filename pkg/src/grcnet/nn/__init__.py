from .blocks import (
    HeadParams,
    InceptionBlock,
    InceptionParams,
    MLPHead,
    ResidualParams,
    ResidualUnit,
    inception_block,
    mlp_head,
    residual_unit,
)
from .cot import CotLayer, CotParams, cot_forward
from .layers import Conv2d, ConvParams, Dense, Layer, ReLU, Sequential, conv2d
from .model import GRCNet, ModelConfig, backward, forward, softmax_cross_entropy

__all__ = [
    "Conv2d",
    "ConvParams",
    "CotLayer",
    "CotParams",
    "Dense",
    "GRCNet",
    "HeadParams",
    "InceptionBlock",
    "InceptionParams",
    "Layer",
    "MLPHead",
    "ModelConfig",
    "ReLU",
    "ResidualParams",
    "ResidualUnit",
    "Sequential",
    "backward",
    "conv2d",
    "cot_forward",
    "forward",
    "inception_block",
    "mlp_head",
    "residual_unit",
    "softmax_cross_entropy",
]
