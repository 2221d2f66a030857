"""Parameter containers for the learnable blocks and their name/array walk.

Every block is a frozen dataclass whose ``np.ndarray`` fields are
parameters; other fields (stride, padding, ...) are fixed hyperparameters.
``named_arrays`` and ``replace_arrays`` give the stable flat view that
checkpointing and the SPSA trainer operate on.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import tensor_core as tc
from .errors import ShapeMismatch

# array names ending with one of these are statistics, not learnable weights
BUFFER_SUFFIXES = ("running_mean", "running_var")


@dataclass(frozen=True)
class Conv:
    weight: np.ndarray  # [Cout, Cin/groups, k, k]
    bias: np.ndarray | None = None
    stride: int = 1
    padding: int = 0
    dilation: int = 1
    groups: int = 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return tc.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.dilation, self.groups)


@dataclass(frozen=True)
class BatchNorm:
    scale: np.ndarray
    shift: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return tc.batch_norm_infer(x, self.scale, self.shift, self.running_mean, self.running_var, self.eps)


@dataclass(frozen=True)
class ConvBN:
    conv: Conv
    bn: BatchNorm

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.bn(self.conv(x))


@dataclass(frozen=True)
class Mlp:
    """Shared bottleneck MLP on a channel vector: fc2(relu(fc1(v)))."""

    fc1: np.ndarray  # [hidden, C]
    fc2: np.ndarray  # [C, hidden]
    b1: np.ndarray | None = None
    b2: np.ndarray | None = None

    def __call__(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        h = self.fc1.astype(np.float64) @ v
        if self.b1 is not None:
            h = h + self.b1
        h = np.maximum(h, 0.0)
        out = self.fc2.astype(np.float64) @ h
        if self.b2 is not None:
            out = out + self.b2
        return out.astype(tc.DTYPE)


# ---------------------------------------------------------------------------
# construction


def init_conv(rng: np.random.Generator, cin: int, cout: int, k: int, *, groups: int = 1,
              padding: int | None = None, dilation: int = 1, stride: int = 1, bias: bool = True) -> Conv:
    """Uniform(+-sqrt(1/fan_in)) weights, zero bias, 'same' padding by default."""
    fan_in = (cin // groups) * k * k
    bound = np.sqrt(1.0 / fan_in)
    w = rng.uniform(-bound, bound, size=(cout, cin // groups, k, k)).astype(tc.DTYPE)
    b = np.zeros(cout, dtype=tc.DTYPE) if bias else None
    if padding is None:
        padding = dilation * (k // 2)
    return Conv(w, b, stride=stride, padding=padding, dilation=dilation, groups=groups)


def init_bn(c: int, eps: float = 1e-5) -> BatchNorm:
    return BatchNorm(
        scale=np.ones(c, dtype=tc.DTYPE),
        shift=np.zeros(c, dtype=tc.DTYPE),
        running_mean=np.zeros(c, dtype=tc.DTYPE),
        running_var=np.ones(c, dtype=tc.DTYPE),
        eps=eps,
    )


def init_mlp(rng: np.random.Generator, c: int, hidden: int) -> Mlp:
    b1 = np.sqrt(1.0 / c)
    b2 = np.sqrt(1.0 / hidden)
    return Mlp(
        fc1=rng.uniform(-b1, b1, size=(hidden, c)).astype(tc.DTYPE),
        fc2=rng.uniform(-b2, b2, size=(c, hidden)).astype(tc.DTYPE),
        b1=np.zeros(hidden, dtype=tc.DTYPE),
        b2=np.zeros(c, dtype=tc.DTYPE),
    )


def identity_conv(c: int, k: int = 1, *, dilation: int = 1) -> Conv:
    """Per-channel pass-through kernel (centered delta)."""
    w = np.zeros((c, c, k, k), dtype=tc.DTYPE)
    for i in range(c):
        w[i, i, k // 2, k // 2] = 1.0
    return Conv(w, np.zeros(c, dtype=tc.DTYPE), padding=dilation * (k // 2), dilation=dilation)


def identity_bn(c: int) -> BatchNorm:
    return init_bn(c, eps=0.0)


def gate_conv(cin: int, cout: int, bias_value: float) -> Conv:
    """1x1 conv with zero weights whose constant output is ``bias_value``."""
    return Conv(np.zeros((cout, cin, 1, 1), dtype=tc.DTYPE), np.full(cout, bias_value, dtype=tc.DTYPE))


# ---------------------------------------------------------------------------
# flat view


def named_arrays(obj, prefix: str = "") -> dict[str, np.ndarray]:
    """Depth-first ``name -> array`` mapping in declaration order."""
    out: dict[str, np.ndarray] = {}
    if isinstance(obj, np.ndarray):
        out[prefix] = obj
    elif dataclasses.is_dataclass(obj):
        for f in dataclasses.fields(obj):
            out.update(named_arrays(getattr(obj, f.name), f"{prefix}.{f.name}" if prefix else f.name))
    elif isinstance(obj, (list, tuple)):
        for i, item in enumerate(obj):
            out.update(named_arrays(item, f"{prefix}.{i}" if prefix else str(i)))
    return out


def replace_arrays(obj, arrays: dict[str, np.ndarray], prefix: str = ""):
    """Rebuild ``obj`` with arrays taken from ``arrays`` (missing names keep their value)."""
    if isinstance(obj, np.ndarray):
        if prefix not in arrays:
            return obj
        new = np.asarray(arrays[prefix], dtype=obj.dtype)
        if new.shape != obj.shape:
            raise ShapeMismatch(f"{prefix}: expected {obj.shape}, got {new.shape}")
        return new
    if dataclasses.is_dataclass(obj):
        changes = {}
        for f in dataclasses.fields(obj):
            name = f"{prefix}.{f.name}" if prefix else f.name
            changes[f.name] = replace_arrays(getattr(obj, f.name), arrays, name)
        return dataclasses.replace(obj, **changes)
    if isinstance(obj, (list, tuple)):
        return type(obj)(replace_arrays(item, arrays, f"{prefix}.{i}" if prefix else str(i))
                         for i, item in enumerate(obj))
    return obj


def is_trainable(name: str) -> bool:
    return not name.endswith(BUFFER_SUFFIXES)


@dataclass(frozen=True)
class FlatView:
    """Trainable arrays of a parameter tree packed into one float64 vector."""

    names: tuple[str, ...]
    shapes: tuple[tuple[int, ...], ...]
    offsets: tuple[int, ...] = field(repr=False)

    @classmethod
    def of(cls, tree) -> "FlatView":
        arrays = {k: v for k, v in named_arrays(tree).items() if is_trainable(k)}
        names = tuple(arrays)
        shapes = tuple(arrays[n].shape for n in names)
        offsets = tuple(np.cumsum([0] + [int(np.prod(s)) for s in shapes]).tolist())
        return cls(names, shapes, offsets)

    @property
    def size(self) -> int:
        return self.offsets[-1]

    def flatten(self, tree) -> np.ndarray:
        arrays = named_arrays(tree)
        return np.concatenate([arrays[n].astype(np.float64).ravel() for n in self.names]) \
            if self.names else np.zeros(0)

    def unflatten(self, tree, vec: np.ndarray):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.size,):
            raise ShapeMismatch(f"expected vector of length {self.size}, got {vec.shape}")
        arrays = {
            n: vec[self.offsets[i]:self.offsets[i + 1]].reshape(s)
            for i, (n, s) in enumerate(zip(self.names, self.shapes))
        }
        return replace_arrays(tree, arrays)
