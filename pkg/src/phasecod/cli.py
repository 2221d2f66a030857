"""Command-line entry point: ``phasecod <subcommand> ...``.

Exit codes: 0 success, 1 evaluation mismatch, 2 input error, 3 numeric failure.

Every run reads an optional YAML config (``--config``). Command flags
override individual keys, and the effective config is written as
``config.yaml`` next to the outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import io
from . import tensor_core as tc
from .errors import NonFiniteLoss, PhasecodError, ResidualImaginary, UnreadableImage
from .frequency_edge import decompose, phase_only_reconstruct
from .losses import LossConfig
from .metrics import METRIC_NAMES, MetricConfig, MetricReport, evaluate_dataset
from .model import ModelConfig, forward, init_params
from .supervision import CannyConfig, KERNEL_SIZES, build_supervision
from .train import TrainConfig, heldout_report, synthetic_blobs, train_toy

logger = logging.getLogger("phasecod")

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
TABLE_COLUMNS = (("S_m", "s_measure"), ("E_m", "e_measure_mean"), ("F^w_b", "weighted_f"), ("M", "mae"))


class ConfigError(PhasecodError, ValueError):
    """Malformed or unknown configuration entry."""


class InputError(PhasecodError, ValueError):
    """Unusable command input (empty directory, nothing decodable, ...)."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class AblationConfig:
    kernels: tuple[int, ...] = KERNEL_SIZES

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(int(k) for k in self.kernels))
        if not self.kernels or any(k < 1 or k % 2 == 0 for k in self.kernels):
            raise ValueError(f"kernels must be a non-empty list of positive odd sizes, got {list(self.kernels)}")


@dataclass(frozen=True)
class CliConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    canny: CannyConfig = field(default_factory=CannyConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _scalar(value, default, where: str):
    """Check ``value`` against the type of ``default``; YAML 1.1 reads ``1e-3`` as text, so floats accept it."""
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                pass
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{where}: expected {type(default).__name__}, got {value!r}")
    return value


def _build(cls, data, where: str):
    """Instantiate dataclass ``cls`` from a mapping, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown config key(s) {', '.join(f'{where}.{k}' if where else k for k in unknown)}")
    defaults = cls()
    kwargs = {}
    for name, value in data.items():
        default = getattr(defaults, name)
        sub = f"{where}.{name}" if where else name
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, sub)
        elif isinstance(default, tuple):
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{sub}: expected a list")
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = _scalar(value, default, sub)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def _set_path(tree: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{dotted}: {k} is not a section")
    node[keys[-1]] = value


def load_config(path=None, overrides: dict | None = None) -> CliConfig:
    """Read ``path`` (YAML) and apply dotted-key overrides."""
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    for key, value in (overrides or {}).items():
        if value is not None:
            _set_path(data, key, value)
    return _build(CliConfig, data, "")


def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = yaml.safe_load(raw)
    return out


def write_config(out_dir, cfg: CliConfig) -> None:
    path = Path(out_dir) / "config.yaml"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False))


# ---------------------------------------------------------------------------
# tables


def format_table(rows: list[tuple[str, dict]], label: str = "image") -> str:
    """Aligned text table with one row per (label, values) pair."""
    heads = [label] + [h for h, _ in TABLE_COLUMNS]
    body = []
    for name, values in rows:
        cells = [str(name)]
        for _, key in TABLE_COLUMNS:
            v = values.get(key)
            cells.append("   -" if v is None else f"{v:.3f}")
        body.append(cells)
    widths = [max(len(r[i]) for r in [heads] + body) for i in range(len(heads))]
    lines = ["  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(r))
             for r in [heads] + body]
    return "\n".join(lines)


def report_table(report: MetricReport) -> str:
    rows = [(s.image_id, s.as_dict()) for s in report.per_image]
    if report.per_image:
        rows.append(("mean", report.aggregate))
    return format_table(rows)


# ---------------------------------------------------------------------------
# subcommands


def _spectrum_views(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    padded, _ = tc.reflect_pad_pow2(image)
    spec = decompose(padded)
    amp = np.fft.fftshift(np.log1p(spec.amplitude), axes=(-2, -1))
    peak = amp.max(axis=(1, 2), keepdims=True)
    amp = amp / np.where(peak > 0, peak, 1.0)
    phase = np.fft.fftshift((spec.phase + np.pi) / (2.0 * np.pi), axes=(-2, -1))
    return amp, phase


def cmd_decompose(args, cfg: CliConfig) -> int:
    src = Path(args.input)
    image = io.read_image(src)
    out = Path(args.out)
    amp, phase = _spectrum_views(image)
    io.write_image(out / f"{src.stem}_amplitude.png", amp)
    io.write_image(out / f"{src.stem}_phase.png", phase)
    io.write_image(out / f"{src.stem}_psr.png", phase_only_reconstruct(image))
    write_config(out, cfg)
    print(f"wrote {src.stem}_amplitude.png, {src.stem}_phase.png, {src.stem}_psr.png to {out}")
    return EXIT_OK


def cmd_edge_gt(args, cfg: CliConfig) -> int:
    masks = io.list_images(args.masks)
    if not masks:
        raise InputError(f"no .png/.pgm masks in {args.masks}")
    k = cfg.model.edge_kernel
    out = Path(args.out)
    errors, counts = [], []
    for stem, path in masks.items():
        try:
            mask = io.read_gray(path) > 0.5
        except UnreadableImage as exc:
            errors.append(f"{path.name}: {exc}")
            continue
        pair = build_supervision(mask, k, cfg.canny)
        io.write_image(out / "edge" / f"{stem}.png", pair.edge)
        io.write_image(out / "dilated_edge" / f"{stem}.png", pair.dilated_edge)
        counts.append((int(pair.edge.sum()), int(pair.dilated_edge.sum())))
    for msg in errors:
        print(f"error: {msg}", file=sys.stderr)
    if not counts:
        raise InputError(f"no decodable masks in {args.masks}")
    write_config(out, cfg)
    e = np.array(counts, dtype=np.float64)
    print(f"k={k} masks={len(counts)} failed={len(errors)} "
          f"edge_px mean={e[:, 0].mean():.1f} min={e[:, 0].min():.0f} max={e[:, 0].max():.0f} "
          f"dilated_px mean={e[:, 1].mean():.1f} min={e[:, 1].min():.0f} max={e[:, 1].max():.0f}")
    return EXIT_OK


def cmd_evaluate(args, cfg: CliConfig) -> int:
    report = evaluate_dataset(args.pred, args.gt, cfg.metrics)
    doc = report.as_dict()
    doc["config"] = {"metrics": cfg.to_dict()["metrics"]}
    out = Path(args.out)
    io.write_json(out, doc)
    write_config(out.parent, cfg)
    print(report_table(report))
    for err in report.errors:
        print(f"{err['kind']}: {err['id']}: {err['message']}", file=sys.stderr)
    missing = any(e["kind"] == "MissingPair" for e in report.errors)
    return EXIT_MISMATCH if missing or not report.per_image else EXIT_OK


def _load_params(cfg: CliConfig, checkpoint):
    params = init_params(cfg.model)
    if checkpoint:
        arrays, _ = io.load_checkpoint(checkpoint)
        params = params.with_arrays(arrays)
    return params


def cmd_forward(args, cfg: CliConfig) -> int:
    src = Path(args.image)
    image = io.read_image(src)
    if image.shape[0] == 1 and cfg.model.in_channels == 3:
        image = np.repeat(image, 3, axis=0)
    h, w = image.shape[1:]
    ih, iw = cfg.model.input_size
    params = _load_params(cfg, args.checkpoint)
    pred = forward(tc.resize_bilinear(image, ih, iw), params, cfg.model)
    out = Path(args.out)
    for name in ("p_init", "p_final", "p_e"):
        io.write_image(out / f"{src.stem}_{name}.png", tc.resize_bilinear(getattr(pred, name), h, w))
    write_config(out, cfg)
    print(f"wrote {src.stem}_p_init.png, {src.stem}_p_final.png, {src.stem}_p_e.png to {out}")
    return EXIT_OK


def run_toy(cfg: CliConfig, kernel: int, on_step=None):
    """Train on the synthetic set built with ``kernel`` and score the held-out set."""
    model_cfg = dataclasses.replace(cfg.model, edge_kernel=kernel)
    t = cfg.train
    size = model_cfg.input_size
    train_set = synthetic_blobs(t.n_images, size, t.data_seed, kernel, t.contrast)
    result = train_toy(train_set, model_cfg, t.steps, t.spsa, cfg.loss, on_step=on_step)
    held = synthetic_blobs(t.eval_images, size, t.eval_seed, kernel, t.contrast)
    report = heldout_report(result.params, held, model_cfg, cfg.metrics)
    return result, report


def cmd_train_toy(args, cfg: CliConfig) -> int:
    out = Path(args.out)
    write_config(out, cfg)
    curve = []

    def log_step(k, b):
        curve.append(b)
        logger.info("step %d total %.6f seg_init %.6f seg_final %.6f edge %.6f",
                    k, b.total, b.seg_init, b.seg_final, b.edge)

    try:
        result, report = run_toy(cfg, cfg.model.edge_kernel, log_step)
    except (NonFiniteLoss, ResidualImaginary, FloatingPointError) as exc:
        io.write_json(out / "diagnostic.json", {
            "error": type(exc).__name__, "message": str(exc), "completed_steps": len(curve),
            "curve": [b.as_dict() for b in curve],
        })
        raise
    losses = result.losses
    io.write_json(out / "loss_curve.json", {
        "schema": "phasecod.loss_curve", "version": 1, "steps": cfg.train.steps,
        "curve": [b.as_dict() for b in result.curve],
    })
    io.write_json(out / "heldout_report.json", report.as_dict())
    io.save_checkpoint(out / "checkpoint.pcod", result.params.named(), cfg.model.to_dict())
    n = min(20, len(losses))
    first, last = float(np.mean(losses[:n])), float(np.mean(losses[-n:]))
    print(f"steps={cfg.train.steps} first{n}={first:.6f} last{n}={last:.6f} ratio={last / first:.4f}")
    print(report_table(report))
    return EXIT_OK


def cmd_ablate_kernel(args, cfg: CliConfig) -> int:
    rows, table_rows, failures = [], [], []
    for k in cfg.ablation.kernels:
        try:
            result, report = run_toy(cfg, k)
        except (PhasecodError, FloatingPointError, ValueError) as exc:
            failures.append({"kernel": k, "error": type(exc).__name__, "message": str(exc)})
            table_rows.append((f"k={k}", {}))
            logger.error("k=%d failed: %s", k, exc)
            continue
        agg = report.aggregate
        rows.append({"kernel": k, "final_loss": result.losses[-1], **{m: agg[m] for m in METRIC_NAMES}})
        table_rows.append((f"k={k}", agg))
    out = Path(args.out)
    io.write_json(out, {
        "schema": "phasecod.kernel_ablation", "version": 1, "columns": [c for _, c in TABLE_COLUMNS],
        "rows": rows, "failures": failures,
    })
    write_config(out.parent, cfg)
    print(format_table(table_rows, label="kernel"))
    return EXIT_NUMERIC if failures and not rows else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _kernel_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phasecod", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-step details to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key, e.g. --set loss.gamma=0.5 (repeatable)")
        return p

    p = common(sub.add_parser("decompose", help="amplitude/phase views and phase-only reconstruction"))
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)

    p = common(sub.add_parser("edge-gt", help="Canny edges and dilated edges from binary masks"))
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kernel", type=int, help="dilation kernel size (model.edge_kernel)")

    p = common(sub.add_parser("evaluate", help="score predictions against ground truths"))
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True, help="JSON report path")

    p = common(sub.add_parser("forward", help="run the network on one image"))
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--seed", type=int, help="initialization seed (model.seed)")

    p = common(sub.add_parser("train-toy", help="SPSA training on synthetic blobs"))
    p.add_argument("--steps", type=int, help="train.steps")
    p.add_argument("--kernel", type=int, help="model.edge_kernel")
    p.add_argument("--seed", type=int, help="model.seed")
    p.add_argument("--out", required=True)

    p = common(sub.add_parser("ablate-kernel", help="train and evaluate once per dilation kernel size"))
    p.add_argument("--kernels", type=_kernel_list, help="ablation.kernels, e.g. 1,3,5,7,9")
    p.add_argument("--steps", type=int, help="train.steps")
    p.add_argument("--out", required=True, help="JSON report path")
    return parser


_FLAG_KEYS = {"kernel": "model.edge_kernel", "seed": "model.seed", "steps": "train.steps",
              "kernels": "ablation.kernels"}

_COMMANDS = {
    "decompose": cmd_decompose, "edge-gt": cmd_edge_gt, "evaluate": cmd_evaluate,
    "forward": cmd_forward, "train-toy": cmd_train_toy, "ablate-kernel": cmd_ablate_kernel,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        overrides = _parse_set(args.set)
        overrides.update({key: getattr(args, flag) for flag, key in _FLAG_KEYS.items() if hasattr(args, flag)})
        cfg = load_config(args.config, overrides)
        return _COMMANDS[args.command](args, cfg)
    except (NonFiniteLoss, ResidualImaginary, FloatingPointError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PhasecodError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
