"""Frequency-domain edge enhancement.

Features are split into amplitude and phase spectra. The amplitude is
sharpened and gated, the amplitude change then gates the phase, and the
pair is transformed back and added to the input. ``phase_only_reconstruct``
is the image-level counterpart: unit amplitude, original phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .errors import ShapeMismatch
from .layers import Conv, ConvBN, gate_conv, identity_bn, identity_conv, init_bn, init_conv


@dataclass(frozen=True)
class FeemParams:
    hf_enhance: ConvBN      # 3x3 conv + BN on the amplitude
    amp_attention: Conv     # 1x1, sigmoid gate on the enhanced amplitude
    residual_weighting: Conv  # 1x1, sigmoid gate from the amplitude residual
    phase_refine: ConvBN    # 3x3 conv + BN on the gated phase
    edge_head: Conv         # 1x1, C -> 1

    @property
    def channels(self) -> int:
        return self.amp_attention.weight.shape[0]


def init_feem(rng: np.random.Generator, c: int) -> FeemParams:
    return FeemParams(
        hf_enhance=ConvBN(init_conv(rng, c, c, 3), init_bn(c)),
        amp_attention=init_conv(rng, c, c, 1),
        residual_weighting=init_conv(rng, c, c, 1),
        phase_refine=ConvBN(init_conv(rng, c, c, 3), init_bn(c)),
        edge_head=init_conv(rng, c, 1, 1),
    )


def identity_feem(c: int, open_gate: float = 50.0) -> FeemParams:
    """Pass-through configuration: A' = A and P' = P."""
    return FeemParams(
        hf_enhance=ConvBN(identity_conv(c, 3), identity_bn(c)),
        amp_attention=gate_conv(c, c, open_gate),
        residual_weighting=gate_conv(c, c, open_gate),
        phase_refine=ConvBN(identity_conv(c, 3), identity_bn(c)),
        edge_head=gate_conv(c, 1, 0.0),
    )


def decompose(f: np.ndarray) -> tc.Spectrum:
    return tc.to_polar(tc.fft2(f))


def enhance_amplitude(a: np.ndarray, p: FeemParams) -> np.ndarray:
    """A' = H(A) * sigmoid(Att(H(A)))."""
    h = p.hf_enhance(a)
    if h.shape != np.shape(a):
        raise ShapeMismatch(f"enhanced amplitude {h.shape} vs input {np.shape(a)}")
    return h * tc.sigmoid(p.amp_attention(h))


def gate_phase(phase: np.ndarray, amp_enhanced: np.ndarray, amp_orig: np.ndarray, p: FeemParams) -> np.ndarray:
    """Phase scaled by the learned gate on the amplitude residual A' - A."""
    if not (np.shape(phase) == np.shape(amp_enhanced) == np.shape(amp_orig)):
        raise ShapeMismatch("phase and amplitudes must share a shape")
    resid = np.asarray(amp_enhanced, dtype=np.float64) - np.asarray(amp_orig, dtype=np.float64)
    gate = tc.sigmoid(p.residual_weighting(resid))
    return np.asarray(phase, dtype=np.float64) * gate


def refine_phase(phase: np.ndarray, amp_enhanced: np.ndarray, amp_orig: np.ndarray, p: FeemParams) -> np.ndarray:
    """P' = wrap(Refine(P * W(A' - A))), in (-pi, pi]."""
    gated = gate_phase(phase, amp_enhanced, amp_orig, p)
    return tc.wrap_phase(p.phase_refine(gated))


def reconstruct(amplitude: np.ndarray, phase: np.ndarray) -> np.ndarray:
    """Inverse transform of a polar spectrum after enforcing conjugate symmetry.

    Learned convolutions over the spectrum grid do not preserve the
    symmetry of a real signal's transform; projecting first is the same as
    keeping the real part of the inverse.
    """
    z = tc.from_polar(tc.Spectrum(np.asarray(amplitude, np.float64), np.asarray(phase, np.float64)))
    return tc.ifft2(tc.hermitian_part(z))


def feem_forward(f: np.ndarray, p: FeemParams) -> np.ndarray:
    f = tc.as_tensor(f)
    spec = decompose(f)
    amp = enhance_amplitude(spec.amplitude, p)
    phase = refine_phase(spec.phase, amp, spec.amplitude, p)
    return reconstruct(amp, phase) + f


def edge_head(f_fre: np.ndarray, p: FeemParams) -> np.ndarray:
    return tc.sigmoid(p.edge_head(f_fre))


def phase_only_raw(image: np.ndarray) -> np.ndarray:
    """Unit-amplitude reconstruction before normalization (power-of-two dims)."""
    spec = decompose(tc.as_tensor(image))
    return tc.ifft2(tc.from_polar(tc.Spectrum(np.ones_like(spec.phase), spec.phase)))


def phase_only_reconstruct(image: np.ndarray) -> np.ndarray:
    """Phase-only image, min-max normalized to [0, 1] per channel.

    Inputs with non power-of-two sides are reflection-padded and the result
    cropped back to the original size.
    """
    x = tc.as_tensor(image)
    padded, (h, w) = tc.reflect_pad_pow2(x)
    raw = phase_only_raw(padded).astype(np.float64)[:, :h, :w]
    lo = raw.min(axis=(1, 2), keepdims=True)
    hi = raw.max(axis=(1, 2), keepdims=True)
    span = np.where(hi > lo, hi - lo, 1.0)
    return ((raw - lo) / span).astype(tc.DTYPE)
