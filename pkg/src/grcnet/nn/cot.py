"""Contextual-transformer attention layer.

A 3x3 convolution over the input gives the static context (keys that already
see their neighbours). Static context and input are concatenated and passed
through two 1x1 convolutions to produce, at every position, a softmax over
the k x k neighbourhood for each head. Those weights aggregate a 1x1 value
embedding locally (the dynamic context). A final 1x1 convolution fuses the
static and dynamic contexts back to C channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonFinite, ShapeMismatch
from . import ops
from .layers import Conv2d, ConvParams, Layer


def default_heads(channels: int) -> int:
    return max(1, channels // 4)


def reduced_width(channels: int, reduction: int) -> int:
    return max(1, (2 * channels) // reduction)


@dataclass
class CotParams:
    key_embed: ConvParams  # 3x3, C -> C
    value_embed: ConvParams  # 1x1, C -> C
    attn_reduce: ConvParams  # 1x1, 2C -> 2C / r
    attn_expand: ConvParams  # 1x1, 2C / r -> k*k*heads
    fuse: ConvParams  # 1x1, 2C -> C
    neighborhood: int = 3

    @property
    def channels(self) -> int:
        return self.key_embed.kernel.shape[2]

    @property
    def heads(self) -> int:
        return self.attn_expand.kernel.shape[3] // (self.neighborhood**2)

    def validate(self) -> None:
        c, k = self.channels, self.neighborhood
        if k < 1 or k % 2 == 0:
            raise ShapeMismatch(f"neighborhood must be a positive odd integer, got {k}")
        expand_out = self.attn_expand.kernel.shape[3]
        if expand_out % (k * k) or c % self.heads:
            raise ShapeMismatch(
                f"attention output {expand_out} is not k*k*heads with heads dividing C={c}"
            )
        for name, p, k_, cin, cout in (
            ("key_embed", self.key_embed, 3, c, c),
            ("value_embed", self.value_embed, 1, c, c),
            ("attn_reduce", self.attn_reduce, 1, 2 * c, None),
            ("attn_expand", self.attn_expand, 1, self.attn_reduce.kernel.shape[3], None),
            ("fuse", self.fuse, 1, 2 * c, c),
        ):
            kh, kw, ci, co = p.kernel.shape
            if (kh, kw) != (k_, k_) or ci != cin or (cout is not None and co != cout):
                raise ShapeMismatch(f"{name}: unexpected kernel shape {p.kernel.shape}")
            if p.stride != 1 or p.padding != k_ // 2:
                raise ShapeMismatch(f"{name}: must preserve spatial size")

    @classmethod
    def init(cls, rng, channels: int, neighborhood=3, heads=None, reduction=4) -> "CotParams":
        heads = default_heads(channels) if heads is None else heads
        mid = reduced_width(channels, reduction)
        return cls(
            key_embed=ConvParams.init(rng, 3, channels, channels),
            value_embed=ConvParams.init(rng, 1, channels, channels),
            attn_reduce=ConvParams.init(rng, 1, 2 * channels, mid),
            attn_expand=ConvParams.init(rng, 1, mid, neighborhood * neighborhood * heads),
            fuse=ConvParams.init(rng, 1, 2 * channels, channels),
            neighborhood=neighborhood,
        )

    @classmethod
    def zeros(cls, channels: int, neighborhood=3, heads=None, reduction=4) -> "CotParams":
        heads = default_heads(channels) if heads is None else heads
        mid = reduced_width(channels, reduction)
        return cls(
            key_embed=ConvParams.zeros(3, channels, channels),
            value_embed=ConvParams.zeros(1, channels, channels),
            attn_reduce=ConvParams.zeros(1, 2 * channels, mid),
            attn_expand=ConvParams.zeros(1, mid, neighborhood * neighborhood * heads),
            fuse=ConvParams.zeros(1, 2 * channels, channels),
            neighborhood=neighborhood,
        )


class CotLayer(Layer):
    def __init__(self, p: CotParams):
        super().__init__()
        p.validate()
        self.k = p.neighborhood
        self.heads = p.heads
        self.channels = p.channels
        self.key = self.add("key_embed", Conv2d(p.key_embed))
        self.value = self.add("value_embed", Conv2d(p.value_embed))
        self.reduce = self.add("attn_reduce", Conv2d(p.attn_reduce))
        self.expand = self.add("attn_expand", Conv2d(p.attn_expand))
        self.fuse = self.add("fuse", Conv2d(p.fuse))
        # kept after forward for inspection and tests
        self.static = self.dynamic = self.attention = None

    @classmethod
    def init(cls, rng, channels, neighborhood=3, heads=None, reduction=4) -> "CotLayer":
        return cls(CotParams.init(rng, channels, neighborhood, heads, reduction))

    def forward(self, x):
        if x.ndim != 4 or x.shape[3] != self.channels:
            raise ShapeMismatch(f"CoT layer expects {self.channels} channels, got shape {x.shape}")
        b, h, w, c = x.shape
        static = self.key.forward(x)
        v = self.value.forward(x)
        qk = np.concatenate([static, x], axis=3)
        hidden, self._mask = ops.relu_forward(self.reduce.forward(qk))
        logits = self.expand.forward(hidden).reshape(b, h, w, self.k * self.k, self.heads)
        attn = ops.softmax(logits, axis=3)
        dynamic, self._agg = ops.local_aggregate_forward(attn, v, self.k)
        out = self.fuse.forward(np.concatenate([static, dynamic], axis=3))
        if not np.isfinite(out).all():
            raise NonFinite("CoT layer produced non-finite values")
        self.static, self.dynamic, self.attention = static, dynamic, attn
        return out

    def backward(self, dy):
        c = self.channels
        dcat = self.fuse.backward(dy)
        dstatic = dcat[..., :c]
        dattn, dv = ops.local_aggregate_backward(np.ascontiguousarray(dcat[..., c:]), self._agg)
        dlogits = ops.softmax_backward(dattn, self.attention, axis=3)
        dlogits = dlogits.reshape(*dlogits.shape[:3], -1)
        dhidden = ops.relu_backward(self.expand.backward(dlogits), self._mask)
        dqk = self.reduce.backward(dhidden)
        dstatic = dstatic + dqk[..., :c]
        dx = np.ascontiguousarray(dqk[..., c:])
        dx += self.key.backward(np.ascontiguousarray(dstatic))
        dx += self.value.backward(dv)
        return dx


def cot_forward(x: np.ndarray, params: CotParams) -> np.ndarray:
    """Stateless CoT layer forward pass."""
    return CotLayer(params).forward(x)
