"""Records -> split -> windows -> images, as arrays ready for training."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import ClassLabel, SignalInstance, SignalRecord, SplitConfig, split_dataset
from .gaf import encode_windows

log = logging.getLogger(__name__)


@dataclass
class EncodedSet:
    """A stack of square images with labels and window provenance."""

    images: np.ndarray  # (M, n, n)
    labels: np.ndarray  # (M,) int
    record_ids: list[str] = field(default_factory=list)
    offsets: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.offsets = np.asarray(self.offsets, dtype=np.int64)
        m = self.images.shape[0]
        if not self.record_ids:
            self.record_ids = [""] * m
        if self.offsets.size == 0:
            self.offsets = np.zeros(m, dtype=np.int64)
        if self.labels.shape != (m,) or len(self.record_ids) != m or self.offsets.shape != (m,):
            raise ValueError("images, labels and provenance must have the same length")

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def image_size(self) -> int:
        return int(self.images.shape[1]) if self.images.ndim == 3 else 0

    def class_counts(self) -> dict[str, int]:
        counts = Counter(int(v) for v in self.labels)
        return {label.name: counts.get(int(label), 0) for label in ClassLabel}

    def subset(self, idx) -> "EncodedSet":
        idx = np.asarray(idx)
        return EncodedSet(
            self.images[idx], self.labels[idx], [self.record_ids[i] for i in idx], self.offsets[idx]
        )


@dataclass
class EncodeSummary:
    train_counts: dict[str, int]
    test_counts: dict[str, int]
    skipped_train: int
    skipped_test: int

    def to_dict(self) -> dict:
        return {
            "train": self.train_counts,
            "test": self.test_counts,
            "skipped_degenerate": {"train": self.skipped_train, "test": self.skipped_test},
        }


def encode_instances(
    instances: Sequence[SignalInstance], paa_target: int, mode: str = "gasf", dtype=np.float32
) -> tuple[EncodedSet, int]:
    """Encode windows as images; returns the set and the number of skipped constant windows."""
    if not instances:
        return EncodedSet(np.zeros((0, paa_target, paa_target), dtype=dtype), np.zeros(0)), 0
    windows = np.stack([inst.values for inst in instances])
    images, keep = encode_windows(windows, paa_target, mode)
    kept = [instances[i] for i in keep]
    out = EncodedSet(
        images.astype(dtype),
        np.array([int(inst.label) for inst in kept]),
        [inst.record_id for inst in kept],
        np.array([inst.offset for inst in kept]),
    )
    return out, len(instances) - len(kept)


def build_sets(
    records: Sequence[SignalRecord],
    split: SplitConfig,
    paa_target: int,
    mode: str = "gasf",
    dtype=np.float32,
) -> tuple[EncodedSet, EncodedSet, EncodeSummary]:
    train_inst, test_inst = split_dataset(records, split)
    train, skipped_train = encode_instances(train_inst, paa_target, mode, dtype)
    test, skipped_test = encode_instances(test_inst, paa_target, mode, dtype)
    summary = EncodeSummary(train.class_counts(), test.class_counts(), skipped_train, skipped_test)
    if skipped_train or skipped_test:
        log.warning("skipped %d train / %d test constant windows", skipped_train, skipped_test)
    return train, test, summary
