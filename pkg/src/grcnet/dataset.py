"""BONN-format record loading, sliding-window segmentation and record-level splits."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyClass, EmptyFile, MissingFile, ParseError, WindowTooLong

log = logging.getLogger(__name__)

BONN_LENGTH = 4097
BONN_SAMPLE_RATE = 173.61


class ClassLabel(enum.IntEnum):
    Z = 0
    O = 1  # noqa: E741
    N = 2
    F = 3
    S = 4

    @classmethod
    def parse(cls, value: "ClassLabel | str | int") -> "ClassLabel":
        if isinstance(value, ClassLabel):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown class tag {value!r}") from None
        return cls(int(value))


NUM_CLASSES = len(ClassLabel)


@dataclass(frozen=True)
class SignalRecord:
    id: str
    label: ClassLabel
    samples: np.ndarray
    sample_rate: float = BONN_SAMPLE_RATE

    @property
    def length(self) -> int:
        return int(self.samples.shape[0])

    @property
    def conforming(self) -> bool:
        """True when the record has the canonical BONN length of 4097 samples."""
        return self.length == BONN_LENGTH


@dataclass(frozen=True)
class SignalInstance:
    record_id: str
    label: ClassLabel
    offset: int
    values: np.ndarray


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.9
    seed: int = 0
    window_len: int = 512
    stride: int = 64

    def __post_init__(self):
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError(f"train_fraction must be in (0, 1], got {self.train_fraction}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.window_len < 2:
            raise ValueError("window_len must be at least 2")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")


def load_record(path: str | Path, label: ClassLabel | str) -> SignalRecord:
    """Read one ASCII record (one numeric sample per line)."""
    path = Path(path)
    label = ClassLabel.parse(label)
    if not path.is_file():
        raise MissingFile(path)
    samples = []
    with path.open("r", encoding="ascii", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                value = float(text)
            except ValueError:
                raise ParseError(path, lineno, text) from None
            if not math.isfinite(value):
                raise ParseError(path, lineno, text)
            samples.append(value)
    if not samples:
        raise EmptyFile(path)
    record = SignalRecord(id=path.stem, label=label, samples=np.asarray(samples, dtype=np.float64))
    if not record.conforming:
        log.debug("%s: %d samples (BONN records have %d)", path, record.length, BONN_LENGTH)
    return record


def load_dataset(root: str | Path) -> list[SignalRecord]:
    """Load a directory with one subdirectory per class tag (Z/O/N/F/S).

    Subdirectory names are matched case-insensitively. A missing or empty class
    directory raises :class:`EmptyClass` naming the class.
    """
    root = Path(root)
    if not root.is_dir():
        raise MissingFile(root)
    subdirs = {p.name.upper(): p for p in root.iterdir() if p.is_dir()}
    records: list[SignalRecord] = []
    for label in ClassLabel:
        folder = subdirs.get(label.name)
        files = sorted(p for p in folder.iterdir() if p.is_file()) if folder else []
        files = [p for p in files if not p.name.startswith(".")]
        if not files:
            raise EmptyClass(label.name)
        records.extend(load_record(p, label) for p in files)
    return records


def window_count(length: int, window_len: int, stride: int) -> int:
    if window_len > length:
        return 0
    return (length - window_len) // stride + 1


def window_signal(record: SignalRecord, window_len: int, stride: int) -> list[SignalInstance]:
    if stride < 1:
        raise ValueError("stride must be at least 1")
    if window_len < 1:
        raise ValueError("window_len must be positive")
    if window_len > record.length:
        raise WindowTooLong(
            f"window of {window_len} does not fit record {record.id} of length {record.length}"
        )
    n = window_count(record.length, window_len, stride)
    return [
        SignalInstance(
            record_id=record.id,
            label=record.label,
            offset=k * stride,
            values=record.samples[k * stride : k * stride + window_len],
        )
        for k in range(n)
    ]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_records(
    records: Sequence[SignalRecord], train_fraction: float, seed: int
) -> tuple[list[SignalRecord], list[SignalRecord]]:
    """Stratified seeded shuffle of whole records into train/test partitions."""
    by_class: dict[ClassLabel, list[SignalRecord]] = {label: [] for label in ClassLabel}
    for rec in records:
        by_class[rec.label].append(rec)
    rng = np.random.default_rng(seed)
    train: list[SignalRecord] = []
    test: list[SignalRecord] = []
    for label in ClassLabel:
        group = sorted(by_class[label], key=lambda r: r.id)
        if not group:
            raise EmptyClass(label.name)
        order = rng.permutation(len(group))
        n_train = min(len(group), _round_half_up(train_fraction * len(group)))
        train.extend(group[i] for i in sorted(order[:n_train]))
        test.extend(group[i] for i in sorted(order[n_train:]))
    return train, test


def _window_all(records: Iterable[SignalRecord], cfg: SplitConfig) -> list[SignalInstance]:
    out: list[SignalInstance] = []
    for rec in records:
        out.extend(window_signal(rec, cfg.window_len, cfg.stride))
    return out


def split_dataset(
    records: Sequence[SignalRecord], cfg: SplitConfig
) -> tuple[list[SignalInstance], list[SignalInstance]]:
    """Split at record level, then window each partition.

    All windows from one record land in the same partition, so overlapping
    windows never leak between train and test.
    """
    train_recs, test_recs = split_records(records, cfg.train_fraction, cfg.seed)
    return _window_all(train_recs, cfg), _window_all(test_recs, cfg)
