"""The full classifier: stem, parallel local/global paths, inception, MLP head."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ..errors import NonFinite, ShapeMismatch
from .blocks import InceptionBlock, MLPHead, ResidualUnit
from .cot import CotLayer
from .layers import Conv2d, Layer, ReLU, Sequential


@dataclass(frozen=True)
class ModelConfig:
    input_size: tuple[int, ...] = (64, 64, 1)
    stem_channels: int = 16
    num_res_units: int = 2
    num_cot_layers: int = 1
    inception_branch_widths: tuple[int, ...] = (8, 8, 8, 8)
    mlp_hidden: int = 64
    num_classes: int = 5
    seed: int = 0
    # 0 means "same as stem_channels"; widened by the no-CoT ablation
    local_channels: int = 0
    neighborhood: int = 3
    # 0 means channels // 4, at least 1
    cot_heads: int = 0
    cot_reduction: int = 4
    channel_affine: bool = True

    def __post_init__(self):
        if len(self.input_size) != 3 or min(self.input_size) < 1:
            raise ValueError(f"input_size must be (H, W, C) positive, got {self.input_size}")
        if len(self.inception_branch_widths) != 4:
            raise ValueError("inception needs exactly four branch widths")
        widths = (self.stem_channels, self.mlp_hidden, *self.inception_branch_widths)
        if min(widths) < 1:
            raise ValueError("all widths must be positive")
        if self.num_res_units < 0 or self.num_cot_layers < 0:
            raise ValueError("layer counts must be non-negative")
        if self.num_res_units == 0 and self.num_cot_layers == 0:
            raise ValueError("at least one of the local or global paths must be present")
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")
        if self.neighborhood < 1 or self.neighborhood % 2 == 0:
            raise ValueError("neighborhood must be a positive odd integer")
        if self.seed < 0 or self.local_channels < 0 or self.cot_heads < 0:
            raise ValueError("seed, local_channels and cot_heads must be non-negative")

    @property
    def local_width(self) -> int:
        return self.local_channels or self.stem_channels

    @property
    def fused_channels(self) -> int:
        return (self.local_width if self.num_res_units else 0) + (
            self.stem_channels if self.num_cot_layers else 0
        )


class GRCNet(Layer):
    def __init__(self, cfg: ModelConfig, dtype=np.float64):
        super().__init__()
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(cfg.seed)
        h, w, cin = cfg.input_size
        c = cfg.stem_channels
        self.stem = self.add("stem", Sequential(Conv2d.init(rng, 3, cin, c), ReLU()))
        units = []
        for i in range(cfg.num_res_units):
            units.append(ResidualUnit.init(rng, c if i == 0 else cfg.local_width, cfg.local_width,
                                           affine=cfg.channel_affine))
        self.local = self.add("local", Sequential(*units)) if units else None
        cots = [
            CotLayer.init(rng, c, cfg.neighborhood, cfg.cot_heads or None, cfg.cot_reduction)
            for _ in range(cfg.num_cot_layers)
        ]
        self.glob = self.add("global", Sequential(*cots)) if cots else None
        self.inception = self.add(
            "inception", InceptionBlock.init(rng, cfg.fused_channels, cfg.inception_branch_widths)
        )
        self.head = self.add(
            "head", MLPHead.init(rng, self.inception.out_channels, cfg.mlp_hidden, cfg.num_classes)
        )
        if self.dtype != np.float64:
            self.astype(self.dtype)

    def parameters(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict(self.named_parameters())

    def gradients(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict(self.named_gradients())

    def num_parameters(self) -> int:
        return sum(p.size for _, p in self.named_parameters())

    def load_parameters(self, values: dict[str, np.ndarray]) -> None:
        for name, p in self.named_parameters():
            if name not in values:
                raise ShapeMismatch(f"missing parameter {name}")
            v = np.asarray(values[name])
            if v.shape != p.shape:
                raise ShapeMismatch(f"{name}: shape {v.shape} != {p.shape}")
            p[...] = v

    def forward(self, x):
        x = np.asarray(x)
        if x.ndim == 3 and self.cfg.input_size[2] == 1:
            x = x[..., None]
        if x.ndim != 4 or tuple(x.shape[1:]) != tuple(self.cfg.input_size):
            raise ShapeMismatch(
                f"batch shape {x.shape} does not match input size {self.cfg.input_size}"
            )
        x = np.ascontiguousarray(x, dtype=self.dtype)
        s = self.stem.forward(x)
        parts = []
        if self.local is not None:
            parts.append(self.local.forward(s))
        if self.glob is not None:
            parts.append(self.glob.forward(s))
        self._split = [p.shape[3] for p in parts]
        fused = parts[0] if len(parts) == 1 else np.concatenate(parts, axis=3)
        logits = self.head.forward(self.inception.forward(fused))
        if not np.isfinite(logits).all():
            raise NonFinite("forward pass produced non-finite logits")
        return logits

    def backward(self, dlogits):
        dfused = self.head.backward(np.asarray(dlogits, dtype=self.dtype))
        dfused = self.inception.backward(dfused)
        ds = None
        start = 0
        for path, width in zip([p for p in (self.local, self.glob) if p is not None], self._split):
            d = path.backward(np.ascontiguousarray(dfused[..., start : start + width]))
            ds = d if ds is None else ds + d
            start += width
        dx = self.stem.backward(ds)
        for name, g in self.named_gradients():
            if not np.isfinite(g).all():
                raise NonFinite(f"non-finite gradient for {name}")
        return dx


def softmax_cross_entropy(logits, labels):
    """Stabilized softmax cross-entropy.

    For a single logit vector returns ``(loss, grad)``; for a (B, K) batch
    returns per-item losses (B,) and gradients (B, K).
    """
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    z2 = np.atleast_2d(z)
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if y.shape[0] != z2.shape[0]:
        raise ShapeMismatch(f"{z2.shape[0]} logit rows vs {y.shape[0]} labels")
    shifted = z2 - z2.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(z2.shape[0])
    loss = log_norm - shifted[rows, y]
    grad = np.exp(shifted - log_norm[:, None])
    grad[rows, y] -= 1.0
    if single:
        return float(loss[0]), grad[0]
    return loss, grad


def forward(model: GRCNet, batch) -> np.ndarray:
    return model.forward(batch)


def backward(model: GRCNet, inputs, labels) -> "OrderedDict[str, np.ndarray]":
    """Gradients of the summed cross-entropy over the batch, per parameter."""
    model.zero_grad()
    logits = model.forward(inputs)
    _, dlogits = softmax_cross_entropy(logits, labels)
    model.backward(dlogits)
    return OrderedDict((k, g.copy()) for k, g in model.named_gradients())
