"""Regenerate the committed golden files under tests/golden.

Expected outputs come from the slow reference implementations in
tests/oracles.py and plain Pillow, never from the package, so the CLI tests
compare the package against an independent computation.

    python scripts/make_goldens.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from oracles import (dft2, e_measure_mean_ref, idft2, mae_loop, morphological_boundary,  # noqa: E402
                     s_measure_ref, weighted_f_ref, window_max_dilate)

GOLDEN = ROOT / "tests" / "golden"


def to_u8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(x * 255.0), 0, 255).astype(np.uint8)


def save_gray(path: Path, x: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_u8(x), mode="L").save(path)


def save_rgb(path: Path, x: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_u8(x.transpose(1, 2, 0)), mode="RGB").save(path)


def load_gray(path: Path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("L"), dtype=np.float64) / 255.0


def phase_only_oracle(x: np.ndarray) -> np.ndarray:
    z = dft2(x.astype(np.float64))
    mag = np.abs(z)
    peak = mag.max(axis=(1, 2), keepdims=True)
    unit = np.where(mag > 1e-12 * peak, z / np.where(mag > 0, mag, 1.0), 1.0)
    raw = idft2(unit).real
    lo, hi = raw.min(axis=(1, 2), keepdims=True), raw.max(axis=(1, 2), keepdims=True)
    return (raw - lo) / np.where(hi > lo, hi - lo, 1.0)


def decompose_golden() -> None:
    x = np.full((3, 16, 16), 0.5)
    save_rgb(GOLDEN / "inputs" / "constant.png", x)
    stored = np.asarray(Image.open(GOLDEN / "inputs" / "constant.png"), dtype=np.float64).transpose(2, 0, 1) / 255
    save_rgb(GOLDEN / "decompose" / "constant_psr.png", phase_only_oracle(stored))


def edge_golden() -> None:
    mask = np.zeros((64, 64), bool)
    mask[22:42, 22:42] = True
    save_gray(GOLDEN / "masks" / "square.png", mask.astype(float))
    edge = morphological_boundary(mask)
    save_gray(GOLDEN / "edge_gt_k5" / "edge" / "square.png", edge.astype(float))
    save_gray(GOLDEN / "edge_gt_k5" / "dilated_edge" / "square.png", window_max_dilate(edge, 5).astype(float))


def evaluate_golden() -> None:
    rng = np.random.default_rng(2024)
    yy, xx = np.mgrid[:24, :24]
    rows = []
    for i in range(5):
        cy, cx, r = rng.uniform(8, 16), rng.uniform(8, 16), rng.uniform(4, 8)
        g = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        soft = np.clip(0.7 * g + 0.4 * rng.random((24, 24)) - 0.1, 0, 1)
        stem = f"pair{i}"
        save_gray(GOLDEN / "eval" / "gt" / f"{stem}.png", g.astype(float))
        save_gray(GOLDEN / "eval" / "pred" / f"{stem}.png", soft)
        p = load_gray(GOLDEN / "eval" / "pred" / f"{stem}.png")
        gt = load_gray(GOLDEN / "eval" / "gt" / f"{stem}.png") > 0.5
        if p.max() > p.min():
            p = (p - p.min()) / (p.max() - p.min())
        rows.append({"id": stem, "s_measure": s_measure_ref(p, gt), "e_measure_mean": e_measure_mean_ref(p, gt),
                     "weighted_f": weighted_f_ref(p, gt), "mae": mae_loop(p, gt)})
    names = ("s_measure", "e_measure_mean", "weighted_f", "mae")
    aggregate = {n: float(np.mean([r[n] for r in rows])) for n in names}
    (GOLDEN / "eval" / "expected_report.json").write_text(
        json.dumps({"aggregate": aggregate, "per_image": rows}, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    decompose_golden()
    edge_golden()
    evaluate_golden()
    print(f"goldens written to {GOLDEN}")
