"""COD evaluation measures: MAE, S-measure, mean E-measure, weighted F-measure.

All functions take a prediction ``p`` in [0, 1] and a binary ground truth
``g`` of the same spatial shape ([H, W] or [1, H, W]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .errors import EmptyGroundTruth, ShapeMismatch

_EPS = float(np.spacing(1))
METRIC_NAMES = ("s_measure", "e_measure_mean", "weighted_f", "mae")


@dataclass(frozen=True)
class MetricConfig:
    alpha: float = 0.5        # object vs region balance in S-measure
    beta2: float = 1.0        # beta^2 of the weighted F-measure
    wf_sigma: float = 5.0
    wf_window: int = 7
    em_thresholds: int = 256
    normalize: bool = True    # min-max normalize predictions per image


def _prep(p, g) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g)
    if p.ndim == 3 and p.shape[0] == 1:
        p = p[0]
    if g.ndim == 3 and g.shape[0] == 1:
        g = g[0]
    if p.ndim != 2 or p.shape != g.shape:
        raise ShapeMismatch(f"prediction {p.shape} vs ground truth {g.shape}")
    return p, g > 0.5


def minmax_normalize(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    lo, hi = p.min(), p.max()
    if hi > lo:
        return (p - lo) / (hi - lo)
    return p


def mae(p, g) -> float:
    p, g = _prep(p, g)
    return float(np.mean(np.abs(p - g)))


# ---------------------------------------------------------------------------
# S-measure


def _object_score(x: np.ndarray) -> float:
    if x.size == 0:
        return 0.0
    mu = float(x.mean())
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return 2.0 * mu / (mu * mu + 1.0 + sd + _EPS)


def _s_object(p: np.ndarray, g: np.ndarray) -> float:
    u = float(g.mean())
    fg = _object_score((p * g)[g])
    bg = _object_score(((1.0 - p) * (~g))[~g])
    return u * fg + (1.0 - u) * bg


def _ssim(p: np.ndarray, g: np.ndarray) -> float:
    n = p.size
    x, y = p.mean(), g.mean()
    dof = max(n - 1, 1)
    sx = np.sum((p - x) ** 2) / dof
    sy = np.sum((g - y) ** 2) / dof
    sxy = np.sum((p - x) * (g - y)) / dof
    num = 4.0 * x * y * sxy
    den = (x * x + y * y) * (sx + sy)
    if num != 0:
        return float(num / (den + _EPS))
    return 1.0 if den == 0 else 0.0


def _centroid(g: np.ndarray) -> tuple[int, int]:
    """1-based split column/row: the foreground centroid rounded half up."""
    h, w = g.shape
    if not g.any():
        return int(np.floor(w / 2 + 0.5)), int(np.floor(h / 2 + 0.5))
    rows, cols = np.nonzero(g)
    return int(np.floor(cols.mean() + 1.5)), int(np.floor(rows.mean() + 1.5))


def _s_region(p: np.ndarray, g: np.ndarray) -> float:
    h, w = g.shape
    x, y = _centroid(g)
    area = h * w
    quads = [
        (slice(0, y), slice(0, x), x * y),
        (slice(0, y), slice(x, w), y * (w - x)),
        (slice(y, h), slice(0, x), (h - y) * x),
        (slice(y, h), slice(x, w), (h - y) * (w - x)),
    ]
    score = 0.0
    for rs, cs, n in quads:
        if n <= 0:
            continue
        score += (n / area) * _ssim(p[rs, cs], g[rs, cs].astype(np.float64))
    return score


def s_measure(p, g, alpha: float = 0.5) -> float:
    """Structure measure: alpha * object score + (1 - alpha) * region score."""
    p, g = _prep(p, g)
    y = g.mean()
    if y == 0:
        return float(1.0 - p.mean())
    if y == 1:
        return float(p.mean())
    s = alpha * _s_object(p, g) + (1.0 - alpha) * _s_region(p, g)
    return float(min(max(s, 0.0), 1.0))


# ---------------------------------------------------------------------------
# E-measure


def _enhanced(dp: np.ndarray | float, dg: float):
    align = 2.0 * dp * dg / (dp * dp + dg * dg + _EPS)
    return (align + 1.0) ** 2 / 4.0


def e_measure_curve(p, g, n_thresholds: int = 256) -> np.ndarray:
    """E-measure of ``p > t`` for t = j / n_thresholds, j = 0 .. n_thresholds - 1."""
    p, g = _prep(p, g)
    n = p.size
    n_fg = int(g.sum())
    thresholds = np.arange(n_thresholds) / n_thresholds
    fg_vals = np.sort(p[g])
    bg_vals = np.sort(p[~g])
    # pixels strictly above each threshold
    tp = fg_vals.size - np.searchsorted(fg_vals, thresholds, side="right")
    fp = bg_vals.size - np.searchsorted(bg_vals, thresholds, side="right")
    pred_fg = (tp + fp).astype(np.float64)

    if n_fg == 0:
        total = n - pred_fg
    elif n_fg == n:
        total = pred_fg
    else:
        mean_pred = pred_fg / n
        mean_gt = n_fg / n
        fn = n_fg - tp
        tn = n - n_fg - fp
        total = (
            tp * _enhanced(1.0 - mean_pred, 1.0 - mean_gt)
            + fp * _enhanced(1.0 - mean_pred, -mean_gt)
            + fn * _enhanced(-mean_pred, 1.0 - mean_gt)
            + tn * _enhanced(-mean_pred, -mean_gt)
        )
    return total / n


def e_measure_mean(p, g, n_thresholds: int = 256) -> float:
    return float(np.mean(e_measure_curve(p, g, n_thresholds)))


# ---------------------------------------------------------------------------
# weighted F-measure


@lru_cache(maxsize=None)
def _lattice_offsets(d2: int) -> tuple[tuple[int, int], ...]:
    """Integer (dr, dc) with dr^2 + dc^2 == d2, sorted by (dr, dc)."""
    out = []
    r = math.isqrt(d2)
    for dr in range(-r, r + 1):
        rem = d2 - dr * dr
        dc = math.isqrt(rem)
        if dc * dc == rem:
            out.extend([(dr, -dc), (dr, dc)] if dc else [(dr, 0)])
    return tuple(out)


def nearest_foreground(g) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distance to, and coordinates of, the nearest foreground pixel.

    Ties are broken toward the smallest (row, col), so the result does not
    depend on the distance-transform implementation.
    """
    g = np.asarray(g, dtype=bool)
    if not g.any():
        raise EmptyGroundTruth("ground truth has no foreground")
    h, w = g.shape
    dist = ndimage.distance_transform_edt(~g)
    d2 = np.rint(dist * dist).astype(np.int64)
    rows, cols = np.indices((h, w))
    near_r, near_c = rows.copy(), cols.copy()

    bg_r, bg_c = np.nonzero(~g)
    bg_d2 = d2[bg_r, bg_c]
    order = np.argsort(bg_d2, kind="stable")
    bg_r, bg_c, bg_d2 = bg_r[order], bg_c[order], bg_d2[order]
    bounds = np.flatnonzero(np.diff(bg_d2)) + 1
    for grp_r, grp_c, grp_d in zip(np.split(bg_r, bounds), np.split(bg_c, bounds), np.split(bg_d2, bounds)):
        if grp_r.size == 0:
            continue
        todo = np.ones(grp_r.size, dtype=bool)
        for dr, dc in _lattice_offsets(int(grp_d[0])):
            rr, cc = grp_r + dr, grp_c + dc
            ok = todo & (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            hit = np.zeros_like(ok)
            hit[ok] = g[rr[ok], cc[ok]]
            near_r[grp_r[hit], grp_c[hit]] = rr[hit]
            near_c[grp_r[hit], grp_c[hit]] = cc[hit]
            todo &= ~hit
            if not todo.any():
                break
    return dist, near_r, near_c


def gaussian_window(size: int = 7, sigma: float = 5.0) -> np.ndarray:
    """Normalized 2D Gaussian, negligible taps zeroed."""
    m = (size - 1) / 2.0
    y, x = np.ogrid[-m:m + 1, -m:m + 1]
    h = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma))
    h[h < np.finfo(h.dtype).eps * h.max()] = 0
    s = h.sum()
    return h / s if s else h


def weighted_f(p, g, beta2: float = 1.0, sigma: float = 5.0, window: int = 7) -> float:
    """Weighted F-measure with dependency- and importance-weighted errors."""
    p, g = _prep(p, g)
    if not g.any():
        raise EmptyGroundTruth("weighted F-measure needs at least one foreground pixel")
    dist, near_r, near_c = nearest_foreground(g)
    err = np.abs(p - g)
    # background errors are replaced by the error at the closest object pixel
    err_t = err[near_r, near_c]
    ea = ndimage.convolve(err_t, gaussian_window(window, sigma), mode="constant", cval=0.0)
    min_e = np.where(g & (ea < err), ea, err)
    importance = np.where(g, 1.0, 2.0 - np.exp(np.log(0.5) / 5.0 * dist))
    ew = min_e * importance

    tpw = g.sum() - ew[g].sum()
    fpw = ew[~g].sum()
    recall = 1.0 - ew[g].mean()
    precision = tpw / (tpw + fpw + _EPS)
    q = (1.0 + beta2) * recall * precision / (recall + beta2 * precision + _EPS)
    return float(min(max(q, 0.0), 1.0))


# ---------------------------------------------------------------------------
# per-image and dataset scoring


@dataclass(frozen=True)
class ImageScores:
    image_id: str
    s_measure: float
    e_measure_mean: float
    weighted_f: float | None   # None when the ground truth is empty
    mae: float

    def as_dict(self) -> dict:
        return {"id": self.image_id, "s_measure": self.s_measure, "e_measure_mean": self.e_measure_mean,
                "weighted_f": self.weighted_f, "mae": self.mae}


@dataclass
class MetricReport:
    per_image: list[ImageScores] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    @property
    def n_images(self) -> int:
        return len(self.per_image)

    @property
    def aggregate(self) -> dict[str, float | None]:
        out: dict[str, float | None] = {}
        for name in METRIC_NAMES:
            vals = [getattr(s, name) for s in self.per_image if getattr(s, name) is not None]
            out[name] = float(np.mean(vals)) if vals else None
        return out

    def as_dict(self) -> dict:
        return {
            "schema": "phasecod.metric_report",
            "version": 1,
            "n_images": self.n_images,
            "aggregate": self.aggregate,
            "per_image": [s.as_dict() for s in self.per_image],
            "errors": list(self.errors),
        }


def score_pair(image_id: str, p, g, cfg: MetricConfig = MetricConfig()) -> ImageScores:
    p, g = _prep(p, g)
    if cfg.normalize:
        p = minmax_normalize(p)
    try:
        wf = weighted_f(p, g, cfg.beta2, cfg.wf_sigma, cfg.wf_window)
    except EmptyGroundTruth:
        wf = None
    return ImageScores(
        image_id=image_id,
        s_measure=s_measure(p, g, cfg.alpha),
        e_measure_mean=e_measure_mean(p, g, cfg.em_thresholds),
        weighted_f=wf,
        mae=mae(p, g),
    )


def evaluate_dataset(pred_dir, gt_dir, cfg: MetricConfig = MetricConfig(), workers: int | None = None) -> MetricReport:
    """Score every prediction/ground-truth pair matched by file stem.

    Unmatched and unreadable files are collected in ``report.errors``.
    """
    from concurrent.futures import ThreadPoolExecutor

    from . import io

    preds = io.list_images(pred_dir)
    gts = io.list_images(gt_dir)
    report = MetricReport()
    for stem in sorted(set(preds) ^ set(gts)):
        where = "ground truth" if stem in preds else "prediction"
        path = preds.get(stem) or gts.get(stem)
        report.errors.append({"id": stem, "kind": "MissingPair", "message": f"no matching {where} for {path.name}"})
    common = sorted(set(preds) & set(gts))

    def job(stem):
        try:
            p = io.read_gray(preds[stem])
            g = io.read_gray(gts[stem]) > 0.5
            return score_pair(stem, p, g, cfg)
        except Exception as exc:  # collected per file, never fatal
            return {"id": stem, "kind": type(exc).__name__, "message": str(exc)}

    with ThreadPoolExecutor(max_workers=workers or io.worker_count()) as pool:
        results = list(pool.map(job, common))
    for r in results:
        if isinstance(r, ImageScores):
            report.per_image.append(r)
        else:
            report.errors.append(r)
    report.errors.sort(key=lambda e: (e["id"], e["kind"]))
    return report
