"""Windowed statistics on dense 2-D grids.

Grids are plain 2-D float numpy arrays (row-major, height x width). The
module provides local weighted means, variances and covariances under a
Gaussian window, the building blocks for structural-similarity scoring.

Borders use symmetric (mirror, edge-repeating) padding so statistics do not
darken toward the grid edge, where segmentation masks concentrate their
detail. The padded window application is an explicit linear operator; its
exact adjoint is also exposed because analytic gradients of window-based
losses need it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d, correlate2d


@dataclass(frozen=True)
class GaussianWindow:
    """Normalized square window. ``weights`` has shape (size, size)."""

    size: int
    sigma: float
    weights: np.ndarray


def gaussian_window(size: int = 11, sigma: float = 1.5) -> GaussianWindow:
    """Build a normalized 2-D Gaussian window.

    Raises ValueError unless size is a positive odd integer and sigma > 0.
    """
    if size < 1 or size % 2 == 0:
        raise ValueError(f"window size must be a positive odd integer, got {size}")
    if sigma <= 0:
        raise ValueError(f"window sigma must be > 0, got {sigma}")
    half = size // 2
    x = np.arange(size, dtype=np.float64) - half
    g1 = np.exp(-(x**2) / (2.0 * sigma**2))
    w = np.outer(g1, g1)
    w /= w.sum()
    return GaussianWindow(size=size, sigma=float(sigma), weights=w)


def as_grid(a) -> np.ndarray:
    """Validate and return a 2-D float64 grid."""
    g = np.asarray(a, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 1 or g.shape[1] < 1:
        raise ValueError(f"expected a 2-D grid with positive dims, got shape {g.shape}")
    return g


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"grid shape mismatch: {a.shape} vs {b.shape}")


def _check_window(w: GaussianWindow) -> None:
    if w.size < 1 or w.size % 2 == 0:
        raise ValueError(f"window size must be a positive odd integer, got {w.size}")
    if w.weights.shape != (w.size, w.size):
        raise ValueError("window weights shape does not match its size")


def _reflect_indices(n: int, radius: int) -> np.ndarray:
    """Source index for each position of a symmetric pad of width radius.

    Matches numpy's 'symmetric' mode, including repeated reflection when
    radius >= n.
    """
    q = np.arange(-radius, n + radius)
    period = 2 * n
    qm = np.mod(q, period)
    return np.where(qm < n, qm, period - 1 - qm)


def windowed_mean(g: np.ndarray, w: GaussianWindow) -> np.ndarray:
    """Apply the window as a local weighted mean with symmetric padding."""
    _check_window(w)
    g = as_grid(g)
    r = w.size // 2
    padded = np.pad(g, r, mode="symmetric")
    return correlate2d(padded, w.weights, mode="valid")


def windowed_mean_adjoint(a: np.ndarray, w: GaussianWindow) -> np.ndarray:
    """Exact transpose of :func:`windowed_mean` as a linear operator.

    Full convolution spreads each output weight back over the padded grid;
    folding then accumulates every padded cell onto the interior cell it
    mirrors. Satisfies <windowed_mean(x), a> == <x, windowed_mean_adjoint(a)>.
    """
    _check_window(w)
    a = as_grid(a)
    r = w.size // 2
    full = convolve2d(a, w.weights, mode="full")
    h, wd = a.shape
    rows = _reflect_indices(h, r)
    cols = _reflect_indices(wd, r)
    out = np.zeros((h, wd))
    np.add.at(out, (rows[:, None], cols[None, :]), full)
    return out


def windowed_moments(g: np.ndarray, w: GaussianWindow) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel weighted mean and variance of g under window w.

    Variance is E[x^2] - E[x]^2, clamped at 0 to absorb cancellation noise
    on locally constant input.
    """
    g = as_grid(g)
    mean = windowed_mean(g, w)
    var = windowed_mean(g * g, w) - mean * mean
    return mean, np.maximum(var, 0.0)


def windowed_covariance(a: np.ndarray, b: np.ndarray, w: GaussianWindow) -> np.ndarray:
    """Per-pixel weighted covariance E[ab] - E[a]E[b]."""
    a = as_grid(a)
    b = as_grid(b)
    check_same_shape(a, b)
    return windowed_mean(a * b, w) - windowed_mean(a, w) * windowed_mean(b, w)
