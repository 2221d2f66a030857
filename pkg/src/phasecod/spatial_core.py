"""Spatial segmentation block: dual attention, gated projection, ASPP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .errors import OddChannelCount, ShapeMismatch
from .layers import Conv, Mlp, init_conv, init_mlp

ASPP_RATES = (1, 2, 4)


@dataclass(frozen=True)
class AsppParams:
    branches: tuple[Conv, ...]  # 3x3 C -> C, dilation = padding = rate
    merge: Conv                 # 1x1, len(branches)*C -> C


@dataclass(frozen=True)
class ScsmParams:
    spatial_attention: Conv   # 7x7, 2 -> 1
    channel_attention: Mlp    # C -> C/r -> C
    spa_in: Conv              # 1x1, C -> 2C
    dw_conv: Conv             # depthwise 3x3 on 2C channels
    spa_out: Conv             # 1x1, C -> C
    aspp: AsppParams


def init_aspp(rng: np.random.Generator, c: int, rates=ASPP_RATES) -> AsppParams:
    branches = tuple(init_conv(rng, c, c, 3, dilation=r) for r in rates)
    return AsppParams(branches=branches, merge=init_conv(rng, len(rates) * c, c, 1))


def init_scsm(rng: np.random.Generator, c: int, reduction: int = 4, rates=ASPP_RATES) -> ScsmParams:
    if c % reduction:
        raise ShapeMismatch(f"reduction {reduction} must divide channels {c}")
    return ScsmParams(
        spatial_attention=init_conv(rng, 2, 1, 7),
        channel_attention=init_mlp(rng, c, c // reduction),
        spa_in=init_conv(rng, c, 2 * c, 1),
        dw_conv=init_conv(rng, 2 * c, 2 * c, 3, groups=2 * c),
        spa_out=init_conv(rng, c, c, 1),
        aspp=init_aspp(rng, c, rates),
    )


def spatial_gate(f: np.ndarray, conv: Conv) -> np.ndarray:
    pooled = np.concatenate([tc.channel_mean(f), tc.channel_max(f)], axis=0)
    return tc.sigmoid(conv(pooled))


def channel_gate(f: np.ndarray, mlp: Mlp) -> np.ndarray:
    logits = mlp(tc.global_avg(f)).astype(np.float64) + mlp(tc.global_max(f)).astype(np.float64)
    return tc.sigmoid(logits)


def spatial_attention(f: np.ndarray, p: ScsmParams) -> np.ndarray:
    f = tc.as_tensor(f)
    return f * spatial_gate(f, p.spatial_attention)


def channel_attention(f: np.ndarray, p: ScsmParams) -> np.ndarray:
    f = tc.as_tensor(f)
    gate = channel_gate(f, p.channel_attention)
    if gate.shape[0] != f.shape[0]:
        raise ShapeMismatch(f"channel gate has {gate.shape[0]} entries for {f.shape[0]} channels")
    return f * gate[:, None, None]


def aspp(f: np.ndarray, p: AsppParams) -> np.ndarray:
    branches = [conv(f) for conv in p.branches]
    if any(b.shape != branches[0].shape for b in branches):
        raise ShapeMismatch("ASPP branches disagree on output shape")
    return p.merge(np.concatenate(branches, axis=0))


def split_halves(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if v.shape[0] % 2:
        raise OddChannelCount(f"cannot halve {v.shape[0]} channels")
    half = v.shape[0] // 2
    return v[:half], v[half:]


def scsm_forward(f: np.ndarray, p: ScsmParams) -> np.ndarray:
    f = tc.as_tensor(f)
    u = spatial_attention(f, p) + channel_attention(f, p)
    v = p.dw_conv(p.spa_in(u))
    f2, f3 = split_halves(v)
    f4 = p.spa_out(tc.gelu(f2) * f3) + f
    out = aspp(f4, p.aspp)
    if out.shape != f.shape:
        raise ShapeMismatch(f"SCSM output {out.shape} differs from input {f.shape}")
    return out
