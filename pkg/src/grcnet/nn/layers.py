"""Stateful layers: parameters, gradient buffers and cached activations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..errors import ShapeMismatch
from . import ops


class Layer:
    """Base class. ``params`` and ``grads`` share keys; children are prefixed by name."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.children: list[tuple[str, Layer]] = []

    def add(self, name: str, layer: "Layer") -> "Layer":
        self.children.append((name, layer))
        return layer

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for k, v in self.params.items():
            yield prefix + k, v
        for name, child in self.children:
            yield from child.named_parameters(f"{prefix}{name}.")

    def named_gradients(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for k, v in self.grads.items():
            yield prefix + k, v
        for name, child in self.children:
            yield from child.named_gradients(f"{prefix}{name}.")

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g[...] = 0
        for _, child in self.children:
            child.zero_grad()

    def astype(self, dtype) -> None:
        for k in self.params:
            self.params[k] = self.params[k].astype(dtype)
            self.grads[k] = np.zeros_like(self.params[k])
        for _, child in self.children:
            child.astype(dtype)

    def _param(self, name: str, value: np.ndarray) -> np.ndarray:
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        return value

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError


def fan_in_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class ConvParams:
    kernel: np.ndarray  # (k_h, k_w, C_in, C_out)
    bias: np.ndarray  # (C_out,)
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.kernel.ndim != 4 or self.bias.shape != (self.kernel.shape[3],):
            raise ShapeMismatch(
                f"kernel {self.kernel.shape} and bias {self.bias.shape} do not agree"
            )
        if self.stride < 1 or self.padding < 0:
            raise ValueError("stride must be >= 1 and padding >= 0")

    @classmethod
    def init(cls, rng, k: int, cin: int, cout: int, stride=1, padding=None) -> "ConvParams":
        padding = k // 2 if padding is None else padding
        kernel = fan_in_uniform(rng, (k, k, cin, cout), k * k * cin)
        return cls(kernel, np.zeros(cout), stride, padding)

    @classmethod
    def zeros(cls, k: int, cin: int, cout: int, stride=1, padding=None) -> "ConvParams":
        padding = k // 2 if padding is None else padding
        return cls(np.zeros((k, k, cin, cout)), np.zeros(cout), stride, padding)

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        kh, kw = self.kernel.shape[:2]
        return (
            ops.out_size(h, kh, self.stride, self.padding),
            ops.out_size(w, kw, self.stride, self.padding),
        )


class Conv2d(Layer):
    def __init__(self, p: ConvParams):
        super().__init__()
        self._param("kernel", p.kernel)
        self._param("bias", p.bias)
        self.stride = p.stride
        self.padding = p.padding
        self._cache = None

    @classmethod
    def init(cls, rng, k, cin, cout, stride=1, padding=None) -> "Conv2d":
        return cls(ConvParams.init(rng, k, cin, cout, stride, padding))

    @property
    def conv_params(self) -> ConvParams:
        return ConvParams(self.params["kernel"], self.params["bias"], self.stride, self.padding)

    @property
    def in_channels(self) -> int:
        return self.params["kernel"].shape[2]

    @property
    def out_channels(self) -> int:
        return self.params["kernel"].shape[3]

    def forward(self, x):
        y, self._cache = ops.conv2d_forward(
            x, self.params["kernel"], self.params["bias"], self.stride, self.padding
        )
        return y

    def backward(self, dy):
        dx, dk, db = ops.conv2d_backward(dy, self._cache)
        self.grads["kernel"] += dk
        self.grads["bias"] += db
        return dx


def conv2d(x: np.ndarray, params: ConvParams) -> np.ndarray:
    """Stateless convolution with explicit parameters."""
    y, _ = ops.conv2d_forward(x, params.kernel, params.bias, params.stride, params.padding)
    return y


class ReLU(Layer):
    def forward(self, x):
        y, self._mask = ops.relu_forward(x)
        return y

    def backward(self, dy):
        return ops.relu_backward(dy, self._mask)


class ChannelAffine(Layer):
    """y = scale * x + shift per channel; stands in for batch normalization."""

    def __init__(self, channels: int):
        super().__init__()
        self._param("scale", np.ones(channels))
        self._param("shift", np.zeros(channels))

    def forward(self, x):
        self._x = x
        return x * self.params["scale"] + self.params["shift"]

    def backward(self, dy):
        self.grads["scale"] += ops.col_sum(dy * self._x)
        self.grads["shift"] += ops.col_sum(dy)
        return dy * self.params["scale"]


class AvgPool3(Layer):
    def forward(self, x):
        y, self._shape = ops.avg_pool3_forward(x)
        return y

    def backward(self, dy):
        return ops.avg_pool3_backward(dy, self._shape)


class GlobalAvgPool(Layer):
    def forward(self, x):
        y, self._shape = ops.global_avg_pool_forward(x)
        return y

    def backward(self, dy):
        return ops.global_avg_pool_backward(dy, self._shape)


class Dense(Layer):
    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        super().__init__()
        self._param("weight", weight)
        self._param("bias", bias)

    @classmethod
    def init(cls, rng, n_in: int, n_out: int) -> "Dense":
        return cls(fan_in_uniform(rng, (n_in, n_out), n_in), np.zeros(n_out))

    def forward(self, x):
        y, self._x = ops.dense_forward(x, self.params["weight"], self.params["bias"])
        return y

    def backward(self, dy):
        dx, dw, db = ops.dense_backward(dy, self._x, self.params["weight"])
        self.grads["weight"] += dw
        self.grads["bias"] += db
        return dx


class Sequential(Layer):
    def __init__(self, *layers: Layer, names=None):
        super().__init__()
        names = names or [str(i) for i in range(len(layers))]
        for name, layer in zip(names, layers):
            self.add(name, layer)

    def __len__(self) -> int:
        return len(self.children)

    def forward(self, x):
        for _, layer in self.children:
            x = layer.forward(x)
        return x

    def backward(self, dy):
        for _, layer in reversed(self.children):
            dy = layer.backward(dy)
        return dy
