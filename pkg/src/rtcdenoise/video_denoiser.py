"""Temporal denoiser: two-step cascade of three-frame blocks over 5-frame windows.

Every fifth frame (the keyframe cadence) is denoised spatially elsewhere; the
frames in between get motion-gated temporal averaging. A window of five frames
feeds three triplet blocks, whose outputs feed one more block, so the center
frame effectively aggregates all five inputs while large inter-frame
differences (motion) suppress the contribution of misaligned neighbors.

Blocks run in one of two modes: CLASSICAL (closed-form exponential gating,
the default) or CONV (a small 3-layer residual convolution net with weights
loaded from a checksummed file).
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np

from .frame import Frame, VideoSequence, quantize_plane
from .image_denoiser import CascadeParams, stage_detail
from .rng import NoiseRng

DEFAULT_CADENCE = 5
_WEIGHT_MAGIC = b"CWB1"
_LAYER_SHAPES = ((4, 16), (16, 16), (16, 1))
_SPATIAL_PARAMS = CascadeParams(window_radius=1)


class FrameRole(Enum):
    KEYFRAME = "keyframe"
    TEMPORAL = "temporal"


class BlockMode(Enum):
    CLASSICAL = "classical"
    CONV = "conv"


@dataclass(frozen=True)
class WindowPlan:
    """Role and (for temporal frames) 5-frame window per index."""

    n_frames: int
    cadence: int
    roles: tuple
    windows: tuple  # entry is None for keyframes, else a 5-tuple of indices

    @property
    def keyframe_indices(self) -> tuple:
        return tuple(t for t in range(self.n_frames) if self.roles[t] is FrameRole.KEYFRAME)

    def role(self, t: int) -> FrameRole:
        return self.roles[t]

    def window(self, t: int) -> tuple:
        if self.roles[t] is not FrameRole.TEMPORAL:
            raise ValueError(f"frame {t} is a keyframe; keyframes have no window")
        return self.windows[t]

    def last_keyframe_at_or_before(self, t: int) -> int:
        if not 0 <= t < self.n_frames:
            raise IndexError(f"frame index {t} outside plan of {self.n_frames}")
        return (t // self.cadence) * self.cadence


def schedule_windows(n_frames: int, cadence: int = DEFAULT_CADENCE) -> WindowPlan:
    """Keyframes at multiples of cadence; everything else gets a clamped window."""
    if n_frames < 1:
        raise ValueError("n_frames must be at least 1")
    if cadence < 2:
        raise ValueError("cadence must be at least 2")
    roles = []
    windows = []
    last = n_frames - 1
    for t in range(n_frames):
        if t % cadence == 0:
            roles.append(FrameRole.KEYFRAME)
            windows.append(None)
        else:
            roles.append(FrameRole.TEMPORAL)
            windows.append(tuple(min(max(i, 0), last) for i in range(t - 2, t + 3)))
    return WindowPlan(n_frames=n_frames, cadence=cadence, roles=tuple(roles), windows=tuple(windows))


@dataclass(frozen=True)
class ConvWeightSet:
    """Kernels and biases for the 3-layer block net; arrays are float32."""

    kernels: tuple  # per layer: (out_ch, in_ch, 3, 3)
    biases: tuple   # per layer: (out_ch,)

    def __post_init__(self):
        if len(self.kernels) != 3 or len(self.biases) != 3:
            raise ValueError("expected exactly 3 layers")
        for i, (in_ch, out_ch) in enumerate(_LAYER_SHAPES):
            k, b = self.kernels[i], self.biases[i]
            if k.shape != (out_ch, in_ch, 3, 3):
                raise ValueError(f"layer {i + 1} kernel shape {k.shape}, want {(out_ch, in_ch, 3, 3)}")
            if b.shape != (out_ch,):
                raise ValueError(f"layer {i + 1} bias shape {b.shape}, want {(out_ch,)}")
            if k.dtype != np.float32 or b.dtype != np.float32:
                raise ValueError("weights must be float32")
            k.setflags(write=False)
            b.setflags(write=False)


def zero_weights() -> ConvWeightSet:
    """All-zero weights: the residual net becomes the identity."""
    kernels = tuple(np.zeros((o, i, 3, 3), dtype=np.float32) for i, o in _LAYER_SHAPES)
    biases = tuple(np.zeros(o, dtype=np.float32) for _, o in _LAYER_SHAPES)
    return ConvWeightSet(kernels=kernels, biases=biases)


def random_weights(seed: int = 0, scale: float = 0.05) -> ConvWeightSet:
    """Small random weights for exercising the CONV path in tests and demos."""
    rng = NoiseRng(seed=seed)
    kernels = []
    biases = []
    for i, o in _LAYER_SHAPES:
        kernels.append((scale * rng.normals(o * i * 9)).astype(np.float32).reshape(o, i, 3, 3))
        biases.append((scale * rng.normals(o)).astype(np.float32))
    return ConvWeightSet(kernels=tuple(kernels), biases=tuple(biases))


def write_weights(weights: ConvWeightSet, sink) -> int:
    """Serialize as magic CWB1 + per-layer shapes/tensors + trailing CRC32."""
    payload = bytearray()
    for k, b in zip(weights.kernels, weights.biases):
        out_ch, in_ch = k.shape[0], k.shape[1]
        payload += struct.pack("<II", in_ch, out_ch)
        payload += k.astype("<f4").tobytes()
        payload += b.astype("<f4").tobytes()
    crc = zlib.crc32(bytes(payload)) & 0xFFFFFFFF
    blob = _WEIGHT_MAGIC + bytes(payload) + struct.pack("<I", crc)
    return sink.write(blob)


def read_weights(source) -> ConvWeightSet:
    """Parse and checksum-validate a CWB1 weight file."""
    data = source.read() if hasattr(source, "read") else bytes(source)
    if not data.startswith(_WEIGHT_MAGIC):
        raise ValueError("bad weight file magic (want CWB1)")
    if len(data) < len(_WEIGHT_MAGIC) + 4:
        raise ValueError("weight file truncated before checksum")
    payload, (stored_crc,) = data[4:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != stored_crc:
        raise ValueError("weight file checksum mismatch")
    kernels = []
    biases = []
    pos = 0
    for layer, (want_in, want_out) in enumerate(_LAYER_SHAPES, start=1):
        if pos + 8 > len(payload):
            raise ValueError(f"weight file truncated in layer {layer} header")
        in_ch, out_ch = struct.unpack_from("<II", payload, pos)
        pos += 8
        if (in_ch, out_ch) != (want_in, want_out):
            raise ValueError(f"layer {layer} declares {in_ch}->{out_ch}, want {want_in}->{want_out}")
        k_count = out_ch * in_ch * 9
        end = pos + 4 * (k_count + out_ch)
        if end > len(payload):
            raise ValueError(f"weight file truncated in layer {layer} tensors")
        flat = np.frombuffer(payload, dtype="<f4", count=k_count, offset=pos)
        kernels.append(flat.reshape(out_ch, in_ch, 3, 3).astype(np.float32))
        biases.append(
            np.frombuffer(payload, dtype="<f4", count=out_ch, offset=pos + 4 * k_count).astype(np.float32)
        )
        pos = end
    if pos != len(payload):
        raise ValueError(f"{len(payload) - pos} trailing bytes after layer 3")
    return ConvWeightSet(kernels=tuple(kernels), biases=tuple(biases))


def read_weights_file(path) -> ConvWeightSet:
    with open(path, "rb") as fh:
        return read_weights(fh)


def write_weights_file(weights: ConvWeightSet, path) -> int:
    with open(path, "wb") as fh:
        return write_weights(weights, fh)


@dataclass(frozen=True)
class BlockParams:
    mode: BlockMode = BlockMode.CLASSICAL
    k_temporal: float = 1.0
    spatial_enabled: bool = True
    conv_weights: Optional[ConvWeightSet] = None

    def __post_init__(self):
        if self.k_temporal <= 0:
            raise ValueError("k_temporal must be positive")


def _conv3x3(stack: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """3x3 convolution with replicate padding; stack is (C, H, W) float32."""
    _, h, w = stack.shape
    padded = np.pad(stack, ((0, 0), (1, 1), (1, 1)), mode="edge")
    out = np.broadcast_to(bias[:, None, None], (kernels.shape[0], h, w)).astype(np.float32).copy()
    for ky in range(3):
        for kx in range(3):
            window = padded[:, ky : ky + h, kx : kx + w]
            # einsum keeps the reduction in plain C loops: bit-stable across BLAS builds
            out += np.einsum("oc,chw->ohw", kernels[:, :, ky, kx], window)
    return out


def _conv_residual(a: np.ndarray, b: np.ndarray, c: np.ndarray, sigma: float,
                   weights: ConvWeightSet) -> np.ndarray:
    stack = np.stack([a, b, c, np.full_like(b, np.float32(sigma))])
    x = _conv3x3(stack, weights.kernels[0], weights.biases[0])
    np.maximum(x, 0.0, out=x)
    x = _conv3x3(x, weights.kernels[1], weights.biases[1])
    np.maximum(x, 0.0, out=x)
    x = _conv3x3(x, weights.kernels[2], weights.biases[2])
    return b + x[0]


def denoise_block(f_a: Frame, f_b: Frame, f_c: Frame, sigma: float,
                  params: BlockParams = BlockParams()) -> Frame:
    """Denoise the temporal center f_b from the triplet (f_a, f_b, f_c)."""
    shape = (f_b.height, f_b.width)
    if (f_a.height, f_a.width) != shape or (f_c.height, f_c.width) != shape:
        raise ValueError("triplet frames must share dimensions")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    a = f_a.y.astype(np.float32)
    b = f_b.y.astype(np.float32)
    c = f_c.y.astype(np.float32)

    if params.mode is BlockMode.CONV:
        if params.conv_weights is None:
            raise ValueError("CONV mode requires loaded weights")
        return f_b.with_luma(quantize_plane(_conv_residual(a, b, c, sigma, params.conv_weights)))

    sigma_eff = max(sigma, 0.5)
    inv = np.float32(1.0 / (2.0 * (params.k_temporal * sigma_eff) ** 2))
    da = a - b
    dc = c - b
    w_a = np.exp(-da * da * inv)
    w_c = np.exp(-dc * dc * inv)
    fused = f_b.with_luma(quantize_plane((w_a * a + b + w_c * c) / (w_a + 1.0 + w_c)))
    if params.spatial_enabled and sigma >= 0.5:
        fused = stage_detail(fused, sigma, _SPATIAL_PARAMS)
    return fused


def denoise_window(window: Sequence[Frame], sigma: float,
                   params: BlockParams = BlockParams()) -> Frame:
    """Two-step cascade over exactly five frames; returns the denoised center."""
    if len(window) != 5:
        raise ValueError(f"window must hold 5 frames, got {len(window)}")
    f1, f2, f3, f4, f5 = window
    d1 = denoise_block(f1, f2, f3, sigma, params)
    d2 = denoise_block(f2, f3, f4, sigma, params)
    d3 = denoise_block(f3, f4, f5, sigma, params)
    return denoise_block(d1, d2, d3, sigma, params)


def denoise_stream(
    frames: Sequence[Frame],
    keyframe_outputs: Mapping[int, Frame],
    sigma_per_keyframe: Mapping[int, float],
    plan: WindowPlan,
    params: BlockParams = BlockParams(),
) -> VideoSequence:
    """Assemble the output sequence: keyframes verbatim, temporal frames denoised.

    Window positions that land on a keyframe index use the keyframe's denoised
    output; other positions use the received frames. Each temporal frame uses
    the sigma inherited from its most recent keyframe.
    """
    if plan.n_frames != len(frames):
        raise ValueError(f"plan covers {plan.n_frames} frames, sequence has {len(frames)}")
    for k in plan.keyframe_indices:
        if k not in keyframe_outputs:
            raise ValueError(f"missing keyframe output for index {k}")
        if k not in sigma_per_keyframe:
            raise ValueError(f"missing keyframe sigma for index {k}")

    def source(idx: int) -> Frame:
        return keyframe_outputs.get(idx, frames[idx])

    out = []
    rate = frames.frame_rate if isinstance(frames, VideoSequence) else None
    for t in range(plan.n_frames):
        if plan.role(t) is FrameRole.KEYFRAME:
            out.append(keyframe_outputs[t])
        else:
            sigma = sigma_per_keyframe[plan.last_keyframe_at_or_before(t)]
            window = [source(i) for i in plan.window(t)]
            out.append(denoise_window(window, sigma, params))
    if rate is not None:
        return VideoSequence(frames=tuple(out), frame_rate=rate)
    return VideoSequence(frames=tuple(out))
