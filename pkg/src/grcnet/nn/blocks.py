"""Residual unit, inception aggregation and the MLP classifier head."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ShapeMismatch
from . import ops
from .layers import (
    AvgPool3,
    ChannelAffine,
    Conv2d,
    ConvParams,
    Dense,
    GlobalAvgPool,
    Layer,
    ReLU,
    Sequential,
)


@dataclass
class ResidualParams:
    conv1: ConvParams
    conv2: ConvParams
    projection: ConvParams | None = None


class ResidualUnit(Layer):
    """relu(skip(x) + affine2(conv2(relu(affine1(conv1(x))))))

    The skip is the identity when channel counts match, otherwise a 1x1 projection.
    """

    def __init__(self, p: ResidualParams, affine: bool = False):
        super().__init__()
        cin = p.conv1.kernel.shape[2]
        cout = p.conv2.kernel.shape[3]
        if p.conv1.kernel.shape[3] != p.conv2.kernel.shape[2]:
            raise ShapeMismatch("residual unit: conv1 output does not feed conv2")
        if p.projection is None and cin != cout:
            raise ShapeMismatch(f"residual unit: {cin} -> {cout} channels needs a projection")
        mid = p.conv1.kernel.shape[3]
        layers = [Conv2d(p.conv1)]
        names = ["conv1"]
        if affine:
            layers.append(ChannelAffine(mid))
            names.append("affine1")
        layers.append(ReLU())
        names.append("relu")
        layers.append(Conv2d(p.conv2))
        names.append("conv2")
        if affine:
            layers.append(ChannelAffine(cout))
            names.append("affine2")
        self.branch = self.add("branch", Sequential(*layers, names=names))
        self.proj = self.add("projection", Conv2d(p.projection)) if p.projection else None
        self.out_channels = cout

    @classmethod
    def init(cls, rng, cin: int, cout: int, affine: bool = False) -> "ResidualUnit":
        proj = ConvParams.init(rng, 1, cin, cout) if cin != cout else None
        p = ResidualParams(ConvParams.init(rng, 3, cin, cout), ConvParams.init(rng, 3, cout, cout), proj)
        return cls(p, affine)

    def forward(self, x):
        skip = self.proj.forward(x) if self.proj else x
        y, self._mask = ops.relu_forward(skip + self.branch.forward(x))
        return y

    def backward(self, dy):
        d = ops.relu_backward(dy, self._mask)
        dx = self.branch.backward(d)
        return dx + (self.proj.backward(d) if self.proj else d)


def residual_unit(x: np.ndarray, params: ResidualParams) -> np.ndarray:
    return ResidualUnit(params).forward(x)


@dataclass
class InceptionParams:
    """Branch parameters; all branches read the same input."""

    b1: ConvParams  # 1x1
    b2_reduce: ConvParams  # 1x1
    b2_conv: ConvParams  # 3x3
    b3_reduce: ConvParams  # 1x1
    b3_conv1: ConvParams  # 3x3
    b3_conv2: ConvParams  # 3x3
    b4_proj: ConvParams  # 1x1 after 3x3 average pooling

    @classmethod
    def init(cls, rng, cin: int, widths: Sequence[int]) -> "InceptionParams":
        w1, w2, w3, w4 = widths
        return cls(
            b1=ConvParams.init(rng, 1, cin, w1),
            b2_reduce=ConvParams.init(rng, 1, cin, w2),
            b2_conv=ConvParams.init(rng, 3, w2, w2),
            b3_reduce=ConvParams.init(rng, 1, cin, w3),
            b3_conv1=ConvParams.init(rng, 3, w3, w3),
            b3_conv2=ConvParams.init(rng, 3, w3, w3),
            b4_proj=ConvParams.init(rng, 1, cin, w4),
        )


class InceptionBlock(Layer):
    def __init__(self, p: InceptionParams):
        super().__init__()
        cin = p.b1.kernel.shape[2]
        for q in (p.b2_reduce, p.b3_reduce, p.b4_proj):
            if q.kernel.shape[2] != cin:
                raise ShapeMismatch("inception: branches disagree on input channels")
        self.branches = [
            self.add("b1", Sequential(Conv2d(p.b1), ReLU())),
            self.add(
                "b2", Sequential(Conv2d(p.b2_reduce), ReLU(), Conv2d(p.b2_conv), ReLU())
            ),
            self.add(
                "b3",
                Sequential(
                    Conv2d(p.b3_reduce), ReLU(), Conv2d(p.b3_conv1), ReLU(),
                    Conv2d(p.b3_conv2), ReLU(),
                ),
            ),
            self.add("b4", Sequential(AvgPool3(), Conv2d(p.b4_proj), ReLU())),
        ]
        self.widths = [
            p.b1.kernel.shape[3], p.b2_conv.kernel.shape[3],
            p.b3_conv2.kernel.shape[3], p.b4_proj.kernel.shape[3],
        ]
        self.in_channels = cin

    @property
    def out_channels(self) -> int:
        return sum(self.widths)

    @classmethod
    def init(cls, rng, cin: int, widths: Sequence[int]) -> "InceptionBlock":
        return cls(InceptionParams.init(rng, cin, widths))

    def forward(self, x):
        return np.concatenate([b.forward(x) for b in self.branches], axis=3)

    def backward(self, dy):
        dx = None
        start = 0
        for branch, width in zip(self.branches, self.widths):
            d = branch.backward(np.ascontiguousarray(dy[..., start : start + width]))
            dx = d if dx is None else dx + d
            start += width
        return dx


def inception_block(x: np.ndarray, params: InceptionParams) -> np.ndarray:
    return InceptionBlock(params).forward(x)


@dataclass
class HeadParams:
    hidden_weight: np.ndarray  # (C, hidden)
    hidden_bias: np.ndarray
    out_weight: np.ndarray  # (hidden, classes)
    out_bias: np.ndarray


class MLPHead(Layer):
    """Global average pooling, dense + ReLU, dense to class logits."""

    def __init__(self, p: HeadParams):
        super().__init__()
        self.pool = self.add("pool", GlobalAvgPool())
        self.hidden = self.add("hidden", Dense(p.hidden_weight, p.hidden_bias))
        self.relu = self.add("relu", ReLU())
        self.out = self.add("out", Dense(p.out_weight, p.out_bias))

    @classmethod
    def init(cls, rng, cin: int, hidden: int, classes: int) -> "MLPHead":
        h = Dense.init(rng, cin, hidden)
        o = Dense.init(rng, hidden, classes)
        return cls(HeadParams(h.params["weight"], h.params["bias"], o.params["weight"], o.params["bias"]))

    def forward(self, x):
        return self.out.forward(self.relu.forward(self.hidden.forward(self.pool.forward(x))))

    def backward(self, dy):
        return self.pool.backward(self.hidden.backward(self.relu.backward(self.out.backward(dy))))


def mlp_head(x: np.ndarray, params: HeadParams) -> np.ndarray:
    return MLPHead(params).forward(x)
