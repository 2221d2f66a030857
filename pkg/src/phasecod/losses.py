"""Boundary-weighted BCE / IoU losses and their analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .errors import DomainError, ShapeMismatch


@dataclass(frozen=True)
class LossConfig:
    gamma: float = 1.0       # weight of the edge term
    pool_k: int = 15         # window of the boundary-emphasis average
    weight_amp: float = 5.0
    eps: float = 1e-8

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.pool_k < 1 or self.pool_k % 2 == 0:
            raise ValueError("pool_k must be a positive odd integer")
        if self.eps <= 0:
            raise ValueError("eps must be positive")


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    seg_init: float
    seg_final: float
    edge: float

    def as_dict(self) -> dict[str, float]:
        return {"total": self.total, "seg_init": self.seg_init, "seg_final": self.seg_final, "edge": self.edge}


def _pair(p, g) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if p.shape != g.shape:
        raise ShapeMismatch(f"prediction {p.shape} vs target {g.shape}")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise DomainError("predictions must lie in [0, 1]")
    return p, g


def pixel_weights(g, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """1 + amp * |local mean of g - g|: largest next to object boundaries."""
    g = np.asarray(g, dtype=np.float64)
    g3 = g if g.ndim == 3 else g[None]
    pad = (cfg.pool_k - 1) // 2
    local = tc.avg_pool2d(g3, cfg.pool_k, stride=1, padding=pad, count_include_pad=False).astype(np.float64)
    w = 1.0 + cfg.weight_amp * np.abs(local - g3)
    return w.reshape(g.shape)


def _bce_terms(p, g, eps):
    pc = np.clip(p, eps, 1.0 - eps)
    return -(g * np.log(pc) + (1.0 - g) * np.log(1.0 - pc))


def weighted_bce(p, g, cfg: LossConfig = LossConfig()) -> float:
    p, g = _pair(p, g)
    w = pixel_weights(g, cfg)
    return float(np.sum(w * _bce_terms(p, g, cfg.eps)) / np.sum(w))


def weighted_iou(p, g, cfg: LossConfig = LossConfig()) -> float:
    p, g = _pair(p, g)
    w = pixel_weights(g, cfg)
    inter = np.sum(w * p * g)
    union = np.sum(w * (p + g - p * g))
    return float(1.0 - (inter + 1.0) / (union + 1.0))


def seg_loss(p, g, cfg: LossConfig = LossConfig()) -> float:
    return weighted_bce(p, g, cfg) + weighted_iou(p, g, cfg)


def total_loss(p_init, p_final, p_edge, g_mask, g_edge_dilated, cfg: LossConfig = LossConfig()) -> LossBreakdown:
    s_init = seg_loss(p_init, g_mask, cfg)
    s_final = seg_loss(p_final, g_mask, cfg)
    edge = weighted_bce(p_edge, g_edge_dilated, cfg)
    return LossBreakdown(s_init + s_final + cfg.gamma * edge, s_init, s_final, edge)


def loss_grad(p, g, cfg: LossConfig = LossConfig(), which: str = "bce") -> np.ndarray:
    """Elementwise derivative of ``weighted_bce`` or ``weighted_iou`` w.r.t. p.

    Only defined strictly inside (eps, 1 - eps), where the BCE clamp is inactive.
    """
    p, g = _pair(p, g)
    if np.any(p <= cfg.eps) or np.any(p >= 1.0 - cfg.eps):
        raise DomainError("gradient requires eps < p < 1 - eps")
    w = pixel_weights(g, cfg)
    if which == "bce":
        return w * (-g / p + (1.0 - g) / (1.0 - p)) / np.sum(w)
    if which == "iou":
        inter = np.sum(w * p * g) + 1.0
        union = np.sum(w * (p + g - p * g)) + 1.0
        return -(w * g * union - inter * w * (1.0 - g)) / union**2
    raise ValueError(f"unknown loss {which!r}; expected 'bce' or 'iou'")
