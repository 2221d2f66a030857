"""Feature aggregation (EFFB) and spatial/frequency fusion (SFFIM)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .errors import ShapeMismatch
from .layers import Conv, ConvBN, Mlp, init_bn, init_conv, init_mlp


@dataclass(frozen=True)
class EffbParams:
    enhance_att: ConvBN  # 3x3, 2C -> C, followed by sigmoid


@dataclass(frozen=True)
class SffimParams:
    cbr_spa: ConvBN
    cbr_fre: ConvBN
    lf_depthwise: Conv   # 3x3, groups=C
    lf_pointwise: Conv   # 1x1, C -> C
    gf_mlp: Mlp
    refine: ConvBN
    cross_pairing: bool = True


def init_effb(rng: np.random.Generator, c: int) -> EffbParams:
    return EffbParams(ConvBN(init_conv(rng, 2 * c, c, 3), init_bn(c)))


def init_sffim(rng: np.random.Generator, c: int, reduction: int = 4, cross_pairing: bool = True) -> SffimParams:
    return SffimParams(
        cbr_spa=ConvBN(init_conv(rng, c, c, 3), init_bn(c)),
        cbr_fre=ConvBN(init_conv(rng, c, c, 3), init_bn(c)),
        lf_depthwise=init_conv(rng, c, c, 3, groups=c),
        lf_pointwise=init_conv(rng, c, c, 1),
        gf_mlp=init_mlp(rng, c, max(1, c // reduction)),
        refine=ConvBN(init_conv(rng, c, c, 3), init_bn(c)),
        cross_pairing=cross_pairing,
    )


def _same_shape(*xs: np.ndarray) -> None:
    if any(x.shape != xs[0].shape for x in xs):
        raise ShapeMismatch(f"inputs must share a shape, got {[x.shape for x in xs]}")


def effb(f_branch: np.ndarray, f_fuse_prev: np.ndarray, p: EffbParams) -> np.ndarray:
    """att * f_branch + f_branch + f_fuse_prev with att from both inputs."""
    f_branch = tc.as_tensor(f_branch)
    f_fuse_prev = tc.as_tensor(f_fuse_prev)
    _same_shape(f_branch, f_fuse_prev)
    att = tc.sigmoid(p.enhance_att(np.concatenate([f_branch, f_fuse_prev], axis=0)))
    return att * f_branch + f_branch + f_fuse_prev


def cbr(x: np.ndarray, block: ConvBN) -> np.ndarray:
    return tc.relu(block(x))


def local_gate(x: np.ndarray, p: SffimParams) -> np.ndarray:
    return tc.sigmoid(p.lf_pointwise(p.lf_depthwise(x)))


def global_gate(x: np.ndarray, p: SffimParams) -> np.ndarray:
    return tc.sigmoid(p.gf_mlp(tc.global_avg(x)))


def local_fusion(x: np.ndarray, p: SffimParams) -> np.ndarray:
    x = tc.as_tensor(x)
    return x * local_gate(x, p) + x


def global_fusion(x: np.ndarray, p: SffimParams) -> np.ndarray:
    x = tc.as_tensor(x)
    w = global_gate(x, p)
    if w.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"global gate has {w.shape[0]} entries for {x.shape[0]} channels")
    return x * w[:, None, None] + x


def sffim_forward(f_spa: np.ndarray, f_fre: np.ndarray, fuse_prev: np.ndarray,
                  p: SffimParams, effb_s: EffbParams, effb_f: EffbParams) -> np.ndarray:
    """Fuse spatial and frequency branch outputs with the previous level.

    With ``p.cross_pairing`` the spatial path adds the frequency-side EFFB
    output and vice versa; otherwise each path keeps its own.
    """
    f_spa, f_fre, fuse_prev = (tc.as_tensor(t) for t in (f_spa, f_fre, fuse_prev))
    _same_shape(f_spa, f_fre, fuse_prev)
    fuse1_f = effb(f_fre, fuse_prev, effb_f)
    fuse1_s = effb(f_spa, fuse_prev, effb_s)
    to_spa, to_fre = (fuse1_f, fuse1_s) if p.cross_pairing else (fuse1_s, fuse1_f)
    fuse2_s = local_fusion(cbr(f_spa, p.cbr_spa) + to_spa, p)
    fuse2_f = global_fusion(cbr(f_fre, p.cbr_fre) + to_fre, p)
    return p.refine(fuse2_s + fuse2_f)
