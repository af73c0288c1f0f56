"""Gramian Angular Summation Field encoding of 1-D windows."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateRange, DomainError, IndivisibleLength

log = logging.getLogger(__name__)

# Round-off from scaling may push values this far past +-1; anything beyond is a bug.
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class ScaledSeries:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("scaled series must be a nonempty 1-D sequence")
        if np.any(np.abs(v) > 1.0 + CLAMP_TOL) or not np.all(np.isfinite(v)):
            raise DomainError("scaled values must lie in [-1, 1]")
        object.__setattr__(self, "values", np.clip(v, -1.0, 1.0))

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PolarSeries:
    angles: np.ndarray
    radii: np.ndarray
    n_regularizer: int


@dataclass(frozen=True)
class GafImage:
    data: np.ndarray
    # provenance, carried through to archives and rendered filenames
    record_id: str = ""
    offset: int = 0
    label: int = -1

    @property
    def size(self) -> int:
        return int(self.data.shape[0])


def min_max_scale(values) -> ScaledSeries:
    """Scale to [-1, 1]; the window minimum maps to -1 and the maximum to +1.

    Accepts a :class:`~grcnet.dataset.SignalInstance` or a plain sequence.
    """
    s = np.asarray(getattr(values, "values", values), dtype=np.float64)
    if s.size == 0:
        raise ValueError("cannot scale an empty window")
    hi, lo = s.max(), s.min()
    span = hi - lo
    if not span > 0:
        raise DegenerateRange(f"constant window (value {hi!r})")
    scaled = ((s - hi) + (s - lo)) / span
    return ScaledSeries(np.clip(scaled, -1.0, 1.0))


def to_polar(series: ScaledSeries, n_regularizer: int | None = None) -> PolarSeries:
    """Angles via arccos of the scaled values, radii as 1-based timestamp / N."""
    n = len(series)
    if n_regularizer is None:
        n_regularizer = n
    if n_regularizer < n:
        raise ValueError(f"n_regularizer {n_regularizer} < series length {n}")
    angles = np.arccos(series.values)
    radii = np.arange(1, n + 1, dtype=np.float64) / n_regularizer
    return PolarSeries(angles=angles, radii=radii, n_regularizer=int(n_regularizer))


def penalized_inner(x: float, y: float) -> float:
    """x*y - sqrt(1-x^2)*sqrt(1-y^2), i.e. cos(arccos x + arccos y)."""
    if abs(x) > 1.0 + CLAMP_TOL or abs(y) > 1.0 + CLAMP_TOL:
        raise DomainError(f"arguments must lie in [-1, 1], got ({x}, {y})")
    x = min(1.0, max(-1.0, float(x)))
    y = min(1.0, max(-1.0, float(y)))
    return x * y - np.sqrt(1.0 - x * x) * np.sqrt(1.0 - y * y)


def _gasf_matrix(s: np.ndarray) -> np.ndarray:
    # batch-aware: s has shape (..., n)
    c = np.sqrt(np.maximum(0.0, 1.0 - s * s))
    g = s[..., :, None] * s[..., None, :] - c[..., :, None] * c[..., None, :]
    return np.clip(g, -1.0, 1.0, out=g)


def gasf(series: ScaledSeries) -> GafImage:
    """Summation field G[i, j] = <s_i, s_j> under the penalized inner product."""
    return GafImage(_gasf_matrix(series.values))


def gasf_batch(scaled: np.ndarray) -> np.ndarray:
    """Vectorized :func:`gasf` over rows of an (M, n) array already in [-1, 1]."""
    return _gasf_matrix(np.asarray(scaled, dtype=np.float64))


def paa_downsample(series: Sequence[float], target_len: int) -> np.ndarray:
    """Piecewise aggregate approximation: mean of equal contiguous blocks."""
    s = np.asarray(series, dtype=np.float64)
    n = s.shape[-1]
    if not 1 <= target_len <= n:
        raise IndivisibleLength(f"target length {target_len} outside [1, {n}]")
    if n % target_len:
        raise IndivisibleLength(f"series length {n} not divisible by {target_len}")
    return s.reshape(*s.shape[:-1], target_len, n // target_len).mean(axis=-1)


def diag_reconstruct(image: GafImage | np.ndarray) -> np.ndarray:
    """Recover |s'_i| from the main diagonal, which holds 2*s'_i**2 - 1.

    The sign of s'_i is not recoverable from the diagonal alone.
    """
    data = getattr(image, "data", image)
    d = np.diagonal(np.asarray(data, dtype=np.float64))
    return np.sqrt(np.clip((d + 1.0) / 2.0, 0.0, 1.0))


def tiled_image(series: ScaledSeries) -> np.ndarray:
    """Render a scaled series as an n x n image with identical rows (no Gram transform)."""
    v = series.values
    return np.broadcast_to(v, (v.shape[0], v.shape[0])).copy()


def encode_windows(
    windows: np.ndarray, paa_target: int, mode: str = "gasf"
) -> tuple[np.ndarray, np.ndarray]:
    """Encode an (M, L) stack of raw windows into (K, n, n) images.

    Returns the images and the indices of the windows that were kept.
    Constant windows (after downsampling) are skipped and counted in the log.
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 2:
        raise ValueError("expected a 2-D stack of windows")
    if mode not in ("gasf", "tiled"):
        raise ValueError(f"unknown encoding mode {mode!r}")
    reduced = paa_downsample(windows, paa_target)
    hi = reduced.max(axis=1, keepdims=True)
    lo = reduced.min(axis=1, keepdims=True)
    span = (hi - lo)[:, 0]
    keep = np.flatnonzero(span > 0)
    skipped = windows.shape[0] - keep.size
    if skipped:
        log.info("skipped %d constant window(s) of %d", skipped, windows.shape[0])
    r = reduced[keep]
    scaled = np.clip(((r - hi[keep]) + (r - lo[keep])) / span[keep, None], -1.0, 1.0)
    if mode == "gasf":
        images = gasf_batch(scaled)
    else:
        images = np.repeat(scaled[:, None, :], paa_target, axis=1)
    return images, keep
