"""Image files, parameter checkpoints and small file helpers.

Checkpoint layout (all integers little-endian)::

    8 bytes   magic  b"PCODCKPT"
    4 bytes   uint32 format version (currently 1)
    8 bytes   uint64 length N of the JSON index
    N bytes   UTF-8 JSON: {"config": {...}, "arrays": [{"name", "dtype", "shape", "offset", "nbytes"}, ...]}
    ...       raw array bytes, C order, concatenated in index order

Offsets are relative to the first byte after the index.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import UnreadableImage

IMAGE_SUFFIXES = (".png", ".pgm")
CKPT_MAGIC = b"PCODCKPT"
CKPT_VERSION = 1
THREADS_ENV = "PHASECOD_THREADS"


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def list_images(directory) -> dict[str, Path]:
    """Map file stem -> path for every supported image in ``directory``."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"not a directory: {d}")
    return {p.stem: p for p in sorted(d.iterdir()) if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file()}


def _open(path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
        return img
    except (OSError, UnidentifiedImageError) as exc:
        raise UnreadableImage(f"cannot decode {path}: {exc}") from exc


def read_gray(path) -> np.ndarray:
    """8-bit grayscale image as float64 [H, W] in [0, 1]."""
    img = _open(path)
    return np.asarray(img.convert("L"), dtype=np.float64) / 255.0


def read_image(path) -> np.ndarray:
    """Image as float32 [C, H, W] in [0, 1]; C is 1 for grayscale, else 3."""
    img = _open(path)
    if img.mode in ("1", "L", "LA", "I", "I;16", "F"):
        arr = np.asarray(img.convert("L"), dtype=np.float32)[None]
    else:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32).transpose(2, 0, 1)
    return arr / 255.0


def to_uint8(x) -> np.ndarray:
    return np.clip(np.rint(np.asarray(x, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_image(path, x) -> None:
    """Write [H, W], [1, H, W] or [3, H, W] values in [0, 1] as 8-bit PNG/PGM."""
    arr = np.asarray(x)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim == 3:
        img = Image.fromarray(to_uint8(arr.transpose(1, 2, 0)), mode="RGB")
    else:
        img = Image.fromarray(to_uint8(arr), mode="L")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path)


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, arrays: dict[str, np.ndarray], config: dict | None = None) -> None:
    index, blobs, offset = [], [], 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr)
        a = a.astype(a.dtype.newbyteorder("<"))
        raw = a.tobytes(order="C")
        index.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"config": config or {}, "arrays": index}, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<IQ", CKPT_VERSION, len(header)))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    data = Path(path).read_bytes()
    if data[:8] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, n = struct.unpack("<IQ", data[8:20])
    if version != CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[20:20 + n].decode("utf-8"))
    body = data[20 + n:]
    arrays = {}
    for entry in header["arrays"]:
        start = entry["offset"]
        buf = body[start:start + entry["nbytes"]]
        arrays[entry["name"]] = np.frombuffer(buf, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"]).copy()
    return arrays, header["config"]
