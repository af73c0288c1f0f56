"""Run configuration: a flat, commented ``key = value`` file plus overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from . import kv
from .dataset import SplitConfig
from .errors import ConfigError, ReadError
from .nn.model import ModelConfig
from .train_eval import TrainConfig

SOURCES = ("bonn", "synthetic")

# keys derived from other settings; never read from a file
_DERIVED_MODEL = ("input_size", "seed")
_DERIVED_TRAIN = ("seed", "variant")

_NOTES = {
    "dataset_root": "directory with Z/O/N/F/S subdirectories of ASCII records",
    "source": "bonn | synthetic",
    "synthetic_records_per_class": "records",
    "synthetic_length": "samples per record",
    "synthetic_noise": "noise std relative to carrier amplitude",
    "window_len": "samples per window",
    "stride": "samples between window starts",
    "paa_target": "samples after block-mean downsampling = image side (pixels)",
    "n_regularizer": "polar radius divisor N (samples); not used by the encoder",
    "train_fraction": "fraction of records per class used for training",
    "seed": "seeds the split, parameter init and batch shuffling",
    "output_dir": "directory for archives, checkpoints and reports",
}
_MODEL_NOTES = {
    "stem_channels": "channels after the channel-augment stem",
    "local_channels": "residual path width; 0 = stem_channels",
    "neighborhood": "attention window side (pixels)",
    "cot_heads": "attention head channels; 0 = channels / 4",
    "cot_reduction": "reduction ratio of the first attention 1x1 conv",
}
_TRAIN_NOTES = {
    "learning_rate": "step size",
    "optimizer": "sgd | sgd_momentum | adam",
    "precision": "float32 | float64",
}


@dataclass
class RunConfig:
    dataset_root: str = ""
    source: str = "bonn"
    synthetic_records_per_class: int = 10
    synthetic_length: int = 2048
    synthetic_noise: float = 0.3
    window_len: int = 512
    stride: int = 64
    paa_target: int = 64
    n_regularizer: int = 512
    train_fraction: float = 0.9
    seed: int = 0
    output_dir: str = "runs/default"
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ConfigError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.paa_target < 1 or self.window_len % self.paa_target:
            raise ConfigError(
                f"window_len {self.window_len} must be divisible by paa_target {self.paa_target}"
            )
        if self.n_regularizer < self.paa_target:
            raise ConfigError("n_regularizer must be at least the encoded series length")
        try:
            self.split  # validates window/stride/fraction/seed
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.model = dataclasses.replace(
            self.model, input_size=(self.paa_target, self.paa_target, 1), seed=self.seed
        )
        self.train = dataclasses.replace(self.train, seed=self.seed)

    @property
    def split(self) -> SplitConfig:
        return SplitConfig(self.train_fraction, self.seed, self.window_len, self.stride)

    @property
    def out(self) -> Path:
        return Path(self.output_dir)


_FLAT = [f.name for f in dataclasses.fields(RunConfig) if f.name not in ("model", "train")]


def from_values(values: dict[str, str]) -> RunConfig:
    flat = {k: v for k, v in values.items() if "." not in k}
    model_vals = {k: v for k, v in values.items() if k.startswith("model.")}
    train_vals = {k: v for k, v in values.items() if k.startswith("train.")}
    other = set(values) - set(flat) - set(model_vals) - set(train_vals)
    unknown = sorted((set(flat) - set(_FLAT)) | other)
    for key in model_vals:
        if key[len("model."):] in _DERIVED_MODEL:
            unknown.append(key)
    for key in train_vals:
        if key[len("train."):] in _DERIVED_TRAIN:
            unknown.append(key)
    if unknown:
        raise ConfigError(f"unknown or derived key(s): {', '.join(sorted(unknown))}")
    model = kv.from_mapping(ModelConfig, model_vals, prefix="model.")
    train = kv.from_mapping(TrainConfig, train_vals, prefix="train.")
    base = kv.from_mapping(_FlatRun, flat)
    return RunConfig(**dataclasses.asdict(base), model=model, train=train)


@dataclass
class _FlatRun:
    """The scalar part of :class:`RunConfig`, as read from and written to files."""

    dataset_root: str = ""
    source: str = "bonn"
    synthetic_records_per_class: int = 10
    synthetic_length: int = 2048
    synthetic_noise: float = 0.3
    window_len: int = 512
    stride: int = 64
    paa_target: int = 64
    n_regularizer: int = 512
    train_fraction: float = 0.9
    seed: int = 0
    output_dir: str = "runs/default"


def load(path=None, overrides: dict[str, str] | None = None) -> RunConfig:
    values: dict[str, str] = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ReadError(path, exc.strerror or "cannot read") from exc
        values.update(kv.parse_lines(text))
    values.update(overrides or {})
    return from_values(values)


def dumps(cfg: RunConfig) -> str:
    lines = ["# resolved run configuration"]
    flat = _FlatRun(**{name: getattr(cfg, name) for name in _FLAT})
    lines += kv.to_lines(flat, comments=_NOTES)
    lines.append("")
    lines.append(f"# model.input_size = {kv.format_value(cfg.model.input_size)}   (derived: paa_target)")
    model_lines = kv.to_lines(cfg.model, prefix="model.", comments=_MODEL_NOTES)
    lines += [ln for ln in model_lines if not ln.startswith(("model.input_size", "model.seed"))]
    lines.append("")
    train_lines = kv.to_lines(cfg.train, prefix="train.", comments=_TRAIN_NOTES)
    lines += [ln for ln in train_lines if not ln.startswith(("train.seed", "train.variant"))]
    return "\n".join(lines) + "\n"
