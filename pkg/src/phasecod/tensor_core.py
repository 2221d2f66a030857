"""Dense [C, H, W] tensor primitives.

Feature maps are plain ``float32`` numpy arrays of shape ``(C, H, W)``.
Spectra are ``complex128`` arrays of the same shape. Reductions, FFTs and
convolutions accumulate in float64 and cast back to float32 on return.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveVariance, NonPowerOfTwoDims, ResidualImaginary, ShapeMismatch

DTYPE = np.float32

# largest float32 below 1; keeps sigmoid outputs inside the open unit interval
_SIGMOID_HI = float(np.nextafter(np.float32(1.0), np.float32(0.0)))
_SIGMOID_LO = float(np.finfo(np.float32).tiny)

IMAG_TOL = 1e-4


@dataclass(frozen=True)
class Spectrum:
    """Polar form of a per-channel 2D spectrum."""

    amplitude: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        if self.amplitude.shape != self.phase.shape:
            raise ShapeMismatch(f"amplitude {self.amplitude.shape} vs phase {self.phase.shape}")


def as_tensor(x) -> np.ndarray:
    """Coerce to a float32 [C, H, W] array."""
    arr = np.asarray(x, dtype=DTYPE)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ShapeMismatch(f"expected [C, H, W], got {arr.shape}")
    return arr


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def _check_pow2(shape) -> None:
    h, w = shape[-2:]
    if not (_is_pow2(h) and _is_pow2(w)):
        raise NonPowerOfTwoDims(f"spatial dims must be powers of two, got {h}x{w}")


# ---------------------------------------------------------------------------
# Fourier transforms


def fft2(x: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2D DFT of every channel."""
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeMismatch(f"expected [C, H, W], got {x.shape}")
    _check_pow2(x.shape)
    return np.fft.fft2(x.astype(np.float64), axes=(-2, -1))


def ifft2(c: np.ndarray, tol: float = IMAG_TOL) -> np.ndarray:
    """Inverse 2D DFT with 1/(H*W) scaling, returning the real part.

    Raises ResidualImaginary if the discarded imaginary part is not
    negligible, which means the spectrum was not conjugate-symmetric. The
    tolerance is absolute for signals of magnitude up to 1 and relative to
    the peak magnitude above that.
    """
    c = np.asarray(c)
    if c.ndim != 3:
        raise ShapeMismatch(f"expected [C, H, W], got {c.shape}")
    _check_pow2(c.shape)
    z = np.fft.ifft2(c.astype(np.complex128), axes=(-2, -1))
    if not z.size:
        return z.real.astype(DTYPE)
    resid = float(np.max(np.abs(z.imag)))
    if resid >= tol * max(1.0, float(np.max(np.abs(z.real)))):
        raise ResidualImaginary(f"imaginary residue {resid:.3g} exceeds {tol:g}")
    return z.real.astype(DTYPE)


def hermitian_part(c: np.ndarray) -> np.ndarray:
    """Project a spectrum onto the spectra of real signals.

    Equivalent to taking the real part of the inverse transform, so the
    subsequent ``ifft2`` residue check passes.
    """
    mirrored = np.conj(np.roll(np.flip(c, axis=(-2, -1)), shift=(1, 1), axis=(-2, -1)))
    return 0.5 * (c + mirrored)


def wrap_phase(phase: np.ndarray) -> np.ndarray:
    """Wrap angles into (-pi, pi]."""
    out = np.mod(np.asarray(phase, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    out[out <= -np.pi] = np.pi
    return out


def to_polar(c: np.ndarray, zero_tol: float = 1e-12) -> Spectrum:
    """Split a complex spectrum into amplitude and phase.

    Bins whose amplitude is below ``zero_tol`` times the per-channel peak get
    phase 0, so round-off noise in empty bins does not inject random angles.
    """
    c = np.asarray(c, dtype=np.complex128)
    amp = np.abs(c)
    phase = np.arctan2(c.imag, c.real)
    phase[phase <= -np.pi] = np.pi
    peak = amp.reshape(amp.shape[0], -1).max(axis=1) if amp.ndim == 3 else amp.max()
    floor = zero_tol * np.reshape(peak, (-1, 1, 1) if amp.ndim == 3 else ())
    phase = np.where(amp <= floor, 0.0, phase)
    return Spectrum(amplitude=amp, phase=phase)


def from_polar(s: Spectrum) -> np.ndarray:
    amp = np.asarray(s.amplitude, dtype=np.float64)
    phase = np.asarray(s.phase, dtype=np.float64)
    return amp * np.cos(phase) + 1j * (amp * np.sin(phase))


# ---------------------------------------------------------------------------
# Convolution, normalization, activations


def conv_out_size(n: int, k: int, stride: int = 1, padding: int = 0, dilation: int = 1) -> int:
    return (n + 2 * padding - dilation * (k - 1) - 1) // stride + 1


def conv2d(
    x: np.ndarray,
    kernel: np.ndarray,
    bias: np.ndarray | None = None,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
    groups: int = 1,
) -> np.ndarray:
    """2D cross-correlation with zero padding (no kernel flip)."""
    x = np.asarray(x)
    kernel = np.asarray(kernel)
    if x.ndim != 3 or kernel.ndim != 4:
        raise ShapeMismatch(f"conv2d wants x [C,H,W] and kernel [O,I,k,k], got {x.shape}, {kernel.shape}")
    cin, h, w = x.shape
    cout, cin_g, kh, kw = kernel.shape
    if cin % groups or cout % groups or cin_g * groups != cin:
        raise ShapeMismatch(f"channels {cin}->{cout} incompatible with kernel {kernel.shape}, groups={groups}")
    ho = conv_out_size(h, kh, stride, padding, dilation)
    wo = conv_out_size(w, kw, stride, padding, dilation)
    if ho < 1 or wo < 1:
        raise ShapeMismatch(f"kernel {kh}x{kw} does not fit {h}x{w} input")

    xp = np.pad(x.astype(np.float64), ((0, 0), (padding, padding), (padding, padding)))
    hspan = stride * (ho - 1) + 1
    wspan = stride * (wo - 1) + 1
    cols = np.empty((cin, kh * kw, ho, wo), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            r, c = i * dilation, j * dilation
            cols[:, i * kw + j] = xp[:, r:r + hspan:stride, c:c + wspan:stride]

    cout_g = cout // groups
    cols = cols.reshape(groups, cin_g * kh * kw, ho * wo)
    kmat = kernel.astype(np.float64).reshape(groups, cout_g, cin_g * kh * kw)
    out = np.matmul(kmat, cols).reshape(cout, ho, wo)
    if bias is not None:
        out += np.asarray(bias, dtype=np.float64).reshape(-1, 1, 1)
    return out.astype(DTYPE)


def batch_norm_infer(x, scale, shift, running_mean, running_var, eps: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    c = x.shape[0]
    params = [np.asarray(v, dtype=np.float64).reshape(-1) for v in (scale, shift, running_mean, running_var)]
    if any(v.shape[0] != c for v in params):
        raise ShapeMismatch(f"batch-norm vectors must have length {c}")
    scale, shift, mean, var = params
    denom = var + eps
    if np.any(denom <= 0):
        raise NonPositiveVariance("running_var + eps must be positive")
    inv = scale / np.sqrt(denom)
    out = (x - mean[:, None, None]) * inv[:, None, None] + shift[:, None, None]
    return out.astype(DTYPE)


def sigmoid(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return np.clip(out, _SIGMOID_LO, _SIGMOID_HI).astype(DTYPE)


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x) -> np.ndarray:
    """GELU, tanh approximation."""
    x = np.asarray(x, dtype=np.float64)
    return (0.5 * x * (1.0 + np.tanh(_GELU_C * (x + 0.044715 * x**3)))).astype(DTYPE)


def relu(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=DTYPE), 0)


# ---------------------------------------------------------------------------
# Pooling and resizing


def global_avg(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeMismatch(f"expected [C, H, W], got {x.shape}")
    return x.mean(axis=(1, 2), dtype=np.float64).astype(DTYPE)


def global_max(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeMismatch(f"expected [C, H, W], got {x.shape}")
    return x.max(axis=(1, 2)).astype(DTYPE)


def channel_mean(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeMismatch(f"expected [C, H, W], got {x.shape}")
    return x.mean(axis=0, keepdims=True, dtype=np.float64).astype(DTYPE)


def channel_max(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeMismatch(f"expected [C, H, W], got {x.shape}")
    return x.max(axis=0, keepdims=True).astype(DTYPE)


def avg_pool2d(x, k: int, stride: int = 1, padding: int = 0, count_include_pad: bool = True) -> np.ndarray:
    """Average pooling over k x k windows.

    With ``count_include_pad=False`` each window is divided by the number of
    real (non-padding) pixels it covers.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeMismatch(f"expected [C, H, W], got {x.shape}")
    c, h, w = x.shape
    ho = conv_out_size(h, k, stride, padding)
    wo = conv_out_size(w, k, stride, padding)
    if ho < 1 or wo < 1 or padding > k // 2:
        raise ShapeMismatch(f"pool window {k} with padding {padding} does not fit {h}x{w}")
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    # summed-area table gives every window sum in O(1)
    sat = np.zeros((c, h + 2 * padding + 1, w + 2 * padding + 1))
    sat[:, 1:, 1:] = xp.cumsum(axis=1).cumsum(axis=2)
    r0 = np.arange(ho) * stride
    c0 = np.arange(wo) * stride
    r1, c1 = r0 + k, c0 + k
    sums = (sat[:, r1][:, :, c1] - sat[:, r0][:, :, c1] - sat[:, r1][:, :, c0] + sat[:, r0][:, :, c0])
    if count_include_pad:
        counts = float(k * k)
    else:
        ones = np.pad(np.ones((h, w)), padding)
        osat = np.zeros((h + 2 * padding + 1, w + 2 * padding + 1))
        osat[1:, 1:] = ones.cumsum(0).cumsum(1)
        counts = (osat[r1][:, c1] - osat[r0][:, c1] - osat[r1][:, c0] + osat[r0][:, c0])[None]
    return (sums / counts).astype(DTYPE)


def _bilinear_axis(n_in: int, n_out: int):
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    src = np.maximum(src, 0.0)
    i0 = np.minimum(np.floor(src).astype(np.int64), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    lam = src - i0
    return i0, i1, lam


def resize_bilinear(x, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers (align_corners=False)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeMismatch(f"expected [C, H, W], got {x.shape}")
    if out_h < 1 or out_w < 1:
        raise ShapeMismatch("output size must be positive")
    _, h, w = x.shape
    if (h, w) == (out_h, out_w):
        return x.astype(DTYPE)
    y0, y1, ly = _bilinear_axis(h, out_h)
    x0, x1, lx = _bilinear_axis(w, out_w)
    rows = x[:, y0] * (1 - ly)[None, :, None] + x[:, y1] * ly[None, :, None]
    out = rows[:, :, x0] * (1 - lx) + rows[:, :, x1] * lx
    return out.astype(DTYPE)


def reflect_pad_pow2(x) -> tuple[np.ndarray, tuple[int, int]]:
    """Reflection-pad H and W up to the next power of two.

    Returns the padded array and the original (H, W) for cropping.
    """
    x = np.asarray(x)
    h, w = x.shape[-2:]
    ph, pw = next_pow2(h) - h, next_pow2(w) - w
    if ph == 0 and pw == 0:
        return x, (h, w)
    mode = "reflect" if min(h, w) > 1 else "edge"
    padded = np.pad(x, ((0, 0), (0, ph), (0, pw)), mode=mode)
    return padded, (h, w)
