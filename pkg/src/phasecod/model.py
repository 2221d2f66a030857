"""Desk-scale network: pyramid encoder, per-level branches, top-down fusion."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor_core as tc
from .errors import ShapeMismatch
from .frequency_edge import FeemParams, edge_head, feem_forward, init_feem
from .fusion import EffbParams, SffimParams, effb, init_effb, init_sffim, sffim_forward
from .layers import Conv, FlatView, init_conv, named_arrays, replace_arrays
from .spatial_core import ASPP_RATES, ScsmParams, init_scsm, scsm_forward


@dataclass(frozen=True)
class ModelConfig:
    channels: int = 8
    levels: int = 4
    input_size: tuple[int, int] = (64, 64)
    in_channels: int = 3
    edge_kernel: int = 5
    reduction: int = 4
    aspp_rates: tuple[int, ...] = ASPP_RATES
    cross_pairing: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input_size", tuple(int(v) for v in self.input_size))
        object.__setattr__(self, "aspp_rates", tuple(int(v) for v in self.aspp_rates))
        h, w = self.input_size
        step = 2 ** self.levels
        if self.levels < 1 or h % step or w % step:
            raise ValueError(f"input size {h}x{w} must be divisible by 2^levels = {step}")
        if self.channels % 2 or self.channels % self.reduction:
            raise ValueError(f"channels {self.channels} must be even and divisible by reduction {self.reduction}")
        if self.edge_kernel < 1 or self.edge_kernel % 2 == 0:
            raise ValueError(f"edge_kernel must be a positive odd integer, got {self.edge_kernel}")
        if h & (h - 1) or w & (w - 1):
            raise ValueError(f"input size {h}x{w} must be a power of two")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_size"] = list(self.input_size)
        d["aspp_rates"] = list(self.aspp_rates)
        return d


@dataclass(frozen=True)
class LevelParams:
    encoder: Conv          # 3x3 stride 2
    channel_proj: Conv     # 1x1 to the shared channel width
    effb_fre: EffbParams   # aggregates x_i with the decoder state before FEEM
    effb_spa: EffbParams   # ... and before SCSM
    feem: FeemParams
    scsm: ScsmParams
    sffim: SffimParams
    sffim_effb_spa: EffbParams
    sffim_effb_fre: EffbParams


@dataclass(frozen=True)
class ModelParams:
    levels: tuple[LevelParams, ...]   # finest first
    head_init: Conv                   # reads the deepest fusion output
    head_final: Conv                  # reads the finest fusion output

    def named(self) -> dict[str, np.ndarray]:
        return named_arrays(self)

    def with_arrays(self, arrays: dict[str, np.ndarray]) -> "ModelParams":
        return replace_arrays(self, arrays)


@dataclass(frozen=True)
class LevelTrace:
    feature: np.ndarray
    f_fre: np.ndarray
    f_spa: np.ndarray
    fuse: np.ndarray


@dataclass(frozen=True)
class Prediction:
    p_init: np.ndarray
    p_final: np.ndarray
    p_e: np.ndarray
    levels: tuple[LevelTrace, ...] = field(default=(), repr=False)  # finest first


def init_params(config: ModelConfig) -> ModelParams:
    rng = np.random.default_rng(config.seed)
    c = config.channels
    levels = []
    cin = config.in_channels
    for _ in range(config.levels):
        levels.append(LevelParams(
            encoder=init_conv(rng, cin, c, 3, stride=2, padding=1),
            channel_proj=init_conv(rng, c, c, 1),
            effb_fre=init_effb(rng, c),
            effb_spa=init_effb(rng, c),
            feem=init_feem(rng, c),
            scsm=init_scsm(rng, c, config.reduction, config.aspp_rates),
            sffim=init_sffim(rng, c, config.reduction, config.cross_pairing),
            sffim_effb_spa=init_effb(rng, c),
            sffim_effb_fre=init_effb(rng, c),
        ))
        cin = c
    return ModelParams(
        levels=tuple(levels),
        head_init=init_conv(rng, c, 1, 1),
        head_final=init_conv(rng, c, 1, 1),
    )


def flat_view(params: ModelParams) -> FlatView:
    return FlatView.of(params)


def encode(image: np.ndarray, params: ModelParams) -> list[np.ndarray]:
    """Features at strides 2, 4, 8, ... each projected to the shared width."""
    x = tc.as_tensor(image)
    if x.shape[0] != params.levels[0].encoder.weight.shape[1]:
        raise ShapeMismatch(f"image has {x.shape[0]} channels, encoder expects "
                            f"{params.levels[0].encoder.weight.shape[1]}")
    tc._check_pow2(x.shape)
    feats = []
    for lvl in params.levels:
        x = tc.gelu(lvl.encoder(x))
        feats.append(lvl.channel_proj(x))
    return feats


def forward(image: np.ndarray, params: ModelParams, config: ModelConfig | None = None) -> Prediction:
    """Top-down pass from the deepest level to the finest.

    At the deepest level the decoder state is zero, so each EFFB passes the
    encoder feature through unchanged apart from its gate.
    """
    image = tc.as_tensor(image)
    h, w = image.shape[1:]
    feats = encode(image, params)
    traces: list[LevelTrace] = []
    fuse = None
    for feat, lvl in zip(reversed(feats), reversed(params.levels)):
        if fuse is None:
            prev = np.zeros_like(feat)
        else:
            prev = tc.resize_bilinear(fuse, *feat.shape[1:])
        f_fre = feem_forward(effb(feat, prev, lvl.effb_fre), lvl.feem)
        f_spa = scsm_forward(effb(feat, prev, lvl.effb_spa), lvl.scsm)
        fuse = sffim_forward(f_spa, f_fre, prev, lvl.sffim, lvl.sffim_effb_spa, lvl.sffim_effb_fre)
        traces.append(LevelTrace(feat, f_fre, f_spa, fuse))
    traces.reverse()

    p_init = tc.sigmoid(params.head_init(traces[-1].fuse))
    p_final = tc.sigmoid(params.head_final(traces[0].fuse))
    p_e = edge_head(traces[0].f_fre, params.levels[0].feem)
    return Prediction(
        p_init=tc.resize_bilinear(p_init, h, w),
        p_final=tc.resize_bilinear(p_final, h, w),
        p_e=tc.resize_bilinear(p_e, h, w),
        levels=tuple(traces),
    )
