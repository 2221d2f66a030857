"""Kernel-size ablation on the synthetic blob set at the default training length.

Runs the same pipeline as ``phasecod ablate-kernel`` and also prints the
per-kernel training ratio (final-20 vs first-20 mean loss).

    python scripts/run_ablation.py --out runs/ablation --steps 200 --kernels 1,3,5,7,9
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from phasecod import io
from phasecod.cli import format_table, load_config, run_toy, write_config
from phasecod.metrics import METRIC_NAMES


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/ablation")
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--kernels", default="1,3,5,7,9")
    ap.add_argument("--config", help="optional YAML config")
    args = ap.parse_args()

    kernels = [int(k) for k in args.kernels.split(",")]
    cfg = load_config(args.config, {"train.steps": args.steps, "ablation.kernels": kernels})
    out = Path(args.out)
    rows, table = [], []
    for k in kernels:
        result, report = run_toy(cfg, k)
        losses = result.losses
        n = min(20, len(losses))
        ratio = float(np.mean(losses[-n:]) / np.mean(losses[:n]))
        agg = report.aggregate
        rows.append({"kernel": k, "train_ratio": ratio, "final_loss": losses[-1], **{m: agg[m] for m in METRIC_NAMES}})
        table.append((f"k={k}", agg))
        print(f"k={k}: train ratio {ratio:.3f}", flush=True)
    io.write_json(out / "ablation.json", {"schema": "phasecod.kernel_ablation", "version": 1, "rows": rows})
    write_config(out, cfg)
    print(format_table(table, label="kernel"))


if __name__ == "__main__":
    main()
