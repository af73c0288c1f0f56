"""PNG heatmaps of GAF images.

Grayscale mode maps value v in [-1, 1] linearly to round((v + 1) / 2 * 255),
so -1 is black (0) and +1 is white (255). The diverging palette runs
blue (-1) through white (0) to red (+1). One image pixel per matrix entry.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import WriteError

PALETTES = ("gray", "diverging")


def to_gray(data: np.ndarray) -> np.ndarray:
    v = np.clip(np.asarray(data, dtype=np.float64), -1.0, 1.0)
    return np.rint((v + 1.0) * 127.5).astype(np.uint8)


def to_diverging(data: np.ndarray) -> np.ndarray:
    v = np.clip(np.asarray(data, dtype=np.float64), -1.0, 1.0)
    rgb = np.empty(v.shape + (3,), dtype=np.float64)
    neg = np.minimum(v, 0.0)
    pos = np.maximum(v, 0.0)
    rgb[..., 0] = 1.0 + neg
    rgb[..., 1] = 1.0 + neg - pos
    rgb[..., 2] = 1.0 - pos
    return np.rint(rgb * 255.0).astype(np.uint8)


def image_filename(record_id: str, offset: int, label: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9_.-]", "_", record_id) or "image"
    return f"{safe}_off{offset:05d}_{label}.png"


def write_png(path, data: np.ndarray, palette: str = "gray") -> Path:
    if palette not in PALETTES:
        raise ValueError(f"palette must be one of {PALETTES}")
    pixels = to_gray(data) if palette == "gray" else to_diverging(data)
    path = Path(path)
    try:
        Image.fromarray(pixels, mode="L" if pixels.ndim == 2 else "RGB").save(path, format="PNG")
    except OSError as exc:
        raise WriteError(path, str(exc)) from exc
    return path
