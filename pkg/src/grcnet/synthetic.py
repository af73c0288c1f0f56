"""Five-class synthetic EEG stand-in: one sinusoid frequency per class plus noise."""

from __future__ import annotations

import numpy as np

from .dataset import BONN_SAMPLE_RATE, ClassLabel, SignalRecord

# cycles per 512-sample window for Z, O, N, F, S
DEFAULT_CYCLES = (2.0, 4.0, 7.0, 11.0, 16.0)


def synthetic_records(
    records_per_class: int = 10,
    length: int = 2048,
    noise: float = 0.3,
    seed: int = 0,
    cycles_per_window: tuple[float, ...] = DEFAULT_CYCLES,
    window_len: int = 512,
) -> list[SignalRecord]:
    """Records whose class is fully determined by the carrier frequency.

    Amplitude, phase and DC offset vary per record; additive Gaussian noise is
    relative to the unit-amplitude carrier.
    """
    if len(cycles_per_window) != len(ClassLabel):
        raise ValueError("need one frequency per class")
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    out = []
    for label, cycles in zip(ClassLabel, cycles_per_window):
        for i in range(records_per_class):
            amp = rng.uniform(50.0, 150.0)
            phase = rng.uniform(0.0, 2 * np.pi)
            dc = rng.uniform(-20.0, 20.0)
            carrier = np.sin(2 * np.pi * cycles * t / window_len + phase)
            signal = amp * (carrier + noise * rng.standard_normal(length)) + dc
            out.append(
                SignalRecord(id=f"{label.name}{i + 1:03d}", label=label,
                             samples=np.round(signal), sample_rate=BONN_SAMPLE_RATE)
            )
    return out
