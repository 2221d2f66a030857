"""Boundary supervision targets: mask -> Canny edges -> dilated edges."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyMaskWarning, EvenKernel, ShapeMismatch

KERNEL_SIZES = (1, 3, 5, 7, 9)
DEFAULT_KERNEL = 5


@dataclass(frozen=True)
class CannyConfig:
    sigma: float = 1.0
    low: float = 0.1
    high: float = 0.3


@dataclass(frozen=True)
class MaskPair:
    mask: np.ndarray          # [1, H, W], {0, 1}
    edge: np.ndarray
    dilated_edge: np.ndarray
    kernel_size: int


def _as_mask(mask) -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim == 3:
        if m.shape[0] != 1:
            raise ShapeMismatch(f"mask must have one channel, got {m.shape}")
        m = m[0]
    if m.ndim != 2:
        raise ShapeMismatch(f"mask must be [1, H, W] or [H, W], got {m.shape}")
    return m > 0.5


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(np.ceil(3 * sigma)))
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(ax**2) / (2 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)


def _sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # correlate, not convolve: gx > 0 where intensity increases to the right
    gx = ndimage.correlate(img, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(img, _SOBEL_X.T, mode="nearest")
    return gx, gy


def non_max_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Thin ridges of ``mag`` across the quantized gradient direction.

    A pixel survives if it beats the neighbour ahead of it along the
    gradient and is not beaten by the one behind. The asymmetry resolves
    the exact ties a step edge produces on its two sides in favour of the
    brighter (inside) pixel.
    """
    h, w = mag.shape
    angle = (np.rad2deg(np.arctan2(gy, gx)) + 180.0) % 180.0
    # offsets (drow, dcol) pointing along +gradient for each direction bin
    sector = np.digitize(angle, [22.5, 67.5, 112.5, 157.5]) % 4
    offsets = np.array([[0, 1], [1, 1], [1, 0], [1, -1]])
    sign = np.where(
        np.select(
            [sector == 0, sector == 1, sector == 2, sector == 3],
            [gx, gx + gy, gy, gy - gx],
        ) >= 0, 1, -1,
    )
    dr = offsets[sector, 0] * sign
    dc = offsets[sector, 1] * sign

    padded = np.pad(mag, 1)
    rows, cols = np.indices((h, w))
    ahead = padded[rows + 1 + dr, cols + 1 + dc]
    behind = padded[rows + 1 - dr, cols + 1 - dc]
    tol = 1e-9 * max(float(mag.max()), 1e-300)
    keep = (mag > ahead + tol) & (mag >= behind - tol) & (mag > tol)
    return np.where(keep, mag, 0.0)


def hysteresis(nms: np.ndarray, low: float, high: float) -> np.ndarray:
    strong = nms >= high
    candidate = nms >= low
    labels, n = ndimage.label(candidate, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros_like(candidate)
    has_strong = np.zeros(n + 1, dtype=bool)
    has_strong[np.unique(labels[strong])] = True
    has_strong[0] = False
    return has_strong[labels]


def canny_edges(mask, cfg: CannyConfig = CannyConfig()) -> np.ndarray:
    """Binary Canny edge map of a binary mask, shape [1, H, W]."""
    m = _as_mask(mask)
    if not m.any() or m.all():
        kind = "foreground" if m.any() else "background"
        warnings.warn(f"mask is entirely {kind}; edge map is empty", EmptyMaskWarning, stacklevel=2)
        return np.zeros((1,) + m.shape, dtype=np.float32)

    img = m.astype(np.float64)
    blurred = ndimage.correlate(img, _gaussian_kernel(cfg.sigma), mode="nearest")
    gx, gy = _sobel(blurred)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 0:
        return np.zeros((1,) + m.shape, dtype=np.float32)
    thin = non_max_suppression(mag / peak, gx, gy)
    edges = hysteresis(thin, cfg.low, cfg.high)
    return edges[None].astype(np.float32)


def dilate(edge, k: int) -> np.ndarray:
    """Binary dilation with an all-ones k x k window (k odd; k = 1 is identity)."""
    if k < 1 or k % 2 == 0:
        raise EvenKernel(f"kernel size must be a positive odd integer, got {k}")
    e = _as_mask(edge)
    if k == 1:
        return e[None].astype(np.float32)
    r = k // 2
    padded = np.pad(e, r)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k))
    return windows.any(axis=(-2, -1))[None].astype(np.float32)


def build_supervision(mask, k: int = DEFAULT_KERNEL, cfg: CannyConfig = CannyConfig()) -> MaskPair:
    m = _as_mask(mask)
    edge = canny_edges(m, cfg)
    return MaskPair(
        mask=m[None].astype(np.float32),
        edge=edge,
        dilated_edge=dilate(edge, k),
        kernel_size=k,
    )
