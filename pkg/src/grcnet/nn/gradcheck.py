"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable

import numpy as np


def numeric_grad(f: Callable[[], float], arr: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """d f / d arr by central differences, perturbing ``arr`` in place."""
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f()
        flat[i] = orig - step
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-12) -> float:
    """||a - n|| / max(||a|| + ||n||, floor), over the whole array."""
    num = np.linalg.norm(np.ravel(analytic) - np.ravel(numeric))
    den = np.linalg.norm(np.ravel(analytic)) + np.linalg.norm(np.ravel(numeric))
    return float(num / max(den, floor))


def probe_loss(layer, x: np.ndarray, probe: np.ndarray) -> Callable[[], float]:
    """Scalar loss sum(probe * layer(x)); its output gradient is ``probe``."""
    return lambda: float(np.sum(probe * layer.forward(x)))


def check_layer(layer, x: np.ndarray, rng: np.random.Generator, step: float = 1e-4) -> dict[str, float]:
    """Relative error of every parameter gradient and of the input gradient.

    Uses a random linear probe on the layer output as the scalar loss.
    """
    out = layer.forward(x)
    probe = rng.standard_normal(out.shape)
    layer.zero_grad()
    layer.forward(x)
    dx = layer.backward(probe)
    analytic = {name: g.copy() for name, g in layer.named_gradients()}
    f = probe_loss(layer, x, probe)
    errors = {}
    for name, p in layer.named_parameters():
        errors[name] = relative_error(analytic[name], numeric_grad(f, p, step))
    errors["<input>"] = relative_error(dx, numeric_grad(f, x, step))
    return errors
