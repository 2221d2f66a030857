"""Synthetic blob data and a gradient-free (SPSA) trainer for the total loss."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import NonFiniteLoss
from .losses import LossBreakdown, LossConfig, total_loss
from .metrics import MetricConfig, MetricReport, score_pair
from .model import ModelConfig, ModelParams, flat_view, forward, init_params
from .supervision import MaskPair, build_supervision

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class Sample:
    image: np.ndarray      # [3, H, W] in [0, 1]
    supervision: MaskPair


def _smooth_noise(rng: np.random.Generator, h: int, w: int, scale: int) -> np.ndarray:
    coarse = rng.random((h // scale + 2, w // scale + 2))
    ys = np.linspace(0, coarse.shape[0] - 2, h)
    xs = np.linspace(0, coarse.shape[1] - 2, w)
    y0, x0 = ys.astype(int), xs.astype(int)
    ly, lx = (ys - y0)[:, None], (xs - x0)[None, :]
    c = coarse
    return ((1 - ly) * (1 - lx) * c[y0][:, x0] + (1 - ly) * lx * c[y0][:, x0 + 1]
            + ly * (1 - lx) * c[y0 + 1][:, x0] + ly * lx * c[y0 + 1][:, x0 + 1])


def random_shape_mask(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """One ellipse or rectangle covering roughly 8-30% of the frame."""
    yy, xx = np.mgrid[:h, :w]
    cy, cx = rng.uniform(0.3, 0.7) * h, rng.uniform(0.3, 0.7) * w
    ry, rx = rng.uniform(0.15, 0.3) * h, rng.uniform(0.15, 0.3) * w
    if rng.random() < 0.5:
        theta = rng.uniform(0, np.pi)
        dy, dx = yy - cy, xx - cx
        u = dy * np.cos(theta) + dx * np.sin(theta)
        v = -dy * np.sin(theta) + dx * np.cos(theta)
        mask = (u / ry) ** 2 + (v / rx) ** 2 <= 1.0
    else:
        mask = (np.abs(yy - cy) <= ry * 0.85) & (np.abs(xx - cx) <= rx * 0.85)
    return mask


def synthetic_blobs(n: int, size: tuple[int, int] = (64, 64), seed: int = 0,
                    edge_kernel: int = 5, contrast: float = 0.35) -> list[Sample]:
    """Shapes on textured noise; the object differs from the background by a
    tint and a finer texture."""
    rng = np.random.default_rng(seed)
    h, w = size
    out = []
    for _ in range(n):
        mask = random_shape_mask(rng, h, w)
        bg_tex = _smooth_noise(rng, h, w, 8)
        fg_tex = _smooth_noise(rng, h, w, 2)
        base = rng.uniform(0.2, 0.5, size=3)
        tint = rng.uniform(0.5, 1.0, size=3) * contrast
        img = np.empty((3, h, w))
        for ch in range(3):
            bg = base[ch] + 0.25 * (bg_tex - 0.5)
            fg = base[ch] + tint[ch] + 0.25 * (fg_tex - 0.5)
            img[ch] = np.where(mask, fg, bg)
        img += rng.normal(0, 0.02, size=img.shape)
        out.append(Sample(np.clip(img, 0, 1).astype(np.float32), build_supervision(mask, edge_kernel)))
    return out


# ---------------------------------------------------------------------------
# SPSA


@dataclass(frozen=True)
class SpsaConfig:
    """Gains a_k = a / (k + 1 + stability)^alpha, c_k = c / (k + 1)^gamma."""

    a: float = 0.006
    c: float = 0.005
    seed: int = 0
    alpha: float = 0.602
    gamma: float = 0.101
    stability: float = 20.0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("perturbation scale c must be positive")
        if self.a < 0:
            raise ValueError("step size a must be non-negative")
        if self.stability < 0:
            raise ValueError("stability offset must be non-negative")

    def gains(self, k: int) -> tuple[float, float]:
        return self.a / (k + 1 + self.stability) ** self.alpha, self.c / (k + 1) ** self.gamma


def spsa_update(theta: np.ndarray, objective: Callable[[np.ndarray], float], cfg: SpsaConfig,
                k: int = 0) -> tuple[np.ndarray, float, float]:
    """One SPSA iteration on a flat vector.

    Returns ``(theta_new, f(theta_plus), f(theta_minus))``. The Rademacher
    direction depends only on ``(cfg.seed, k)``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    ak, ck = cfg.gains(k)
    delta = np.random.default_rng([cfg.seed, k]).integers(0, 2, size=theta.shape) * 2.0 - 1.0
    f_plus = float(objective(theta + ck * delta))
    f_minus = float(objective(theta - ck * delta))
    if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
        raise NonFiniteLoss(f"perturbed losses {f_plus}, {f_minus} at step {k}")
    ghat = (f_plus - f_minus) / (2.0 * ck) * delta
    return theta - ak * ghat, f_plus, f_minus


def batch_loss(params: ModelParams, batch: list[Sample], model_cfg: ModelConfig,
               loss_cfg: LossConfig) -> LossBreakdown:
    parts = []
    for s in batch:
        with np.errstate(over="ignore", invalid="ignore"):
            pred = forward(s.image, params, model_cfg)
        if not all(np.isfinite(m).all() for m in (pred.p_init, pred.p_final, pred.p_e)):
            raise NonFiniteLoss("network produced non-finite predictions")
        sup = s.supervision
        parts.append(total_loss(pred.p_init, pred.p_final, pred.p_e, sup.mask, sup.dilated_edge, loss_cfg))
    n = len(parts)
    return LossBreakdown(
        total=sum(b.total for b in parts) / n,
        seg_init=sum(b.seg_init for b in parts) / n,
        seg_final=sum(b.seg_final for b in parts) / n,
        edge=sum(b.edge for b in parts) / n,
    )


def spsa_step(params: ModelParams, batch: list[Sample], cfg: SpsaConfig, k: int = 0,
              model_cfg: ModelConfig = ModelConfig(), loss_cfg: LossConfig = LossConfig()
              ) -> tuple[ModelParams, LossBreakdown]:
    """Update every trainable array with one SPSA step on the batch loss.

    The returned breakdown is the loss at the unperturbed input parameters.
    """
    view = flat_view(params)
    theta = view.flatten(params)
    current = batch_loss(params, batch, model_cfg, loss_cfg)
    if not np.isfinite(current.total):
        raise NonFiniteLoss(f"loss is {current.total} at step {k}")

    def objective(vec):
        return batch_loss(view.unflatten(params, vec), batch, model_cfg, loss_cfg).total

    new_theta, _, _ = spsa_update(theta, objective, cfg, k)
    if cfg.a == 0:
        return params, current
    return view.unflatten(params, new_theta), current


# ---------------------------------------------------------------------------
# toy training


@dataclass(frozen=True)
class TrainConfig:
    """Toy-run settings: training set, held-out set and optimizer."""

    steps: int = 200
    n_images: int = 5
    data_seed: int = 0
    contrast: float = 0.8
    eval_images: int = 5
    eval_seed: int = 1000
    spsa: SpsaConfig = field(default_factory=SpsaConfig)

    def __post_init__(self):
        if self.steps < 0 or self.n_images < 1 or self.eval_images < 0:
            raise ValueError("steps must be >= 0, n_images >= 1 and eval_images >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    params: ModelParams
    curve: list[LossBreakdown]

    @property
    def losses(self) -> list[float]:
        return [b.total for b in self.curve]


def train_toy(dataset: list[Sample], model_cfg: ModelConfig = ModelConfig(), steps: int = 200,
              spsa: SpsaConfig = SpsaConfig(), loss_cfg: LossConfig = LossConfig(),
              params: ModelParams | None = None,
              on_step: Callable[[int, LossBreakdown], None] | None = None) -> TrainResult:
    """Run ``steps`` SPSA updates on the full dataset.

    The curve holds the loss before each update; with ``steps == 0`` it holds
    only the initial loss.
    """
    if params is None:
        params = init_params(model_cfg)
    curve: list[LossBreakdown] = []
    if steps == 0:
        curve.append(batch_loss(params, dataset, model_cfg, loss_cfg))
        if on_step:
            on_step(0, curve[0])
        return TrainResult(params, curve)
    for k in range(steps):
        params, loss = spsa_step(params, dataset, spsa, k, model_cfg, loss_cfg)
        curve.append(loss)
        if on_step:
            on_step(k, loss)
        logger.debug("step %d loss %.6f", k, loss.total)
    return TrainResult(params, curve)


def heldout_report(params: ModelParams, samples: list[Sample], model_cfg: ModelConfig,
                   metric_cfg: MetricConfig = MetricConfig()) -> MetricReport:
    """Score ``p_final`` against the mask of each sample, ids ``img000``, ``img001``, ..."""
    report = MetricReport()
    for i, s in enumerate(samples):
        pred = forward(s.image, params, model_cfg)
        report.per_image.append(score_pair(f"img{i:03d}", pred.p_final, s.supervision.mask, metric_cfg))
    return report
