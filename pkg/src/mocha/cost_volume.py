"""Group-wise and motif correlation volumes, their combination, and lookups.

Volumes are indexed ``(d, h, w, g)`` (grouped) or ``(d, h, w)`` (combined).
The right view is sampled at column ``w + sign * d``; the default
``sign = -1`` is the usual left-reference convention, ``+1`` reproduces the
literal ``w + d`` form.  Out-of-frame samples contribute zero.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import (
    DTYPE,
    ConfigError,
    DimensionError,
    FormatError,
    NumericError,
    SeededGenerator,
    as_tensor3,
    he_uniform,
)
from .layers import conv3d_single

VOLUME_MAGIC = b"MCVV"


@dataclass(frozen=True)
class VolumeConv:
    """A single 3x3x3 convolution (zero padding), or the identity when ``kernel`` is None."""

    kernel: np.ndarray | None = None
    bias: float = 0.0

    @classmethod
    def identity(cls) -> VolumeConv:
        return cls()

    @classmethod
    def seeded(cls, seed: int, tag: str = "volume") -> VolumeConv:
        gen = SeededGenerator(seed).child(tag)
        kernel = he_uniform(gen.child("w"), (3, 3, 3), 27)
        bias = float(he_uniform(gen.child("b"), (1,), 27)[0]) * 0.1
        return cls(kernel, bias)

    @property
    def is_identity(self) -> bool:
        return self.kernel is None

    def __call__(self, vol: np.ndarray) -> np.ndarray:
        if self.kernel is None:
            return np.asarray(vol, dtype=DTYPE)
        return conv3d_single(np.asarray(vol, dtype=DTYPE), self.kernel, self.bias)


def _check_pair(f_l, f_r, groups: int):
    f_l = as_tensor3(f_l, "f_l")
    f_r = as_tensor3(f_r, "f_r")
    if f_l.shape != f_r.shape:
        raise DimensionError(f"left {f_l.shape} and right {f_r.shape} features differ")
    if groups < 1 or f_l.shape[0] % groups:
        raise ConfigError(f"{f_l.shape[0]} channels are not divisible into {groups} groups")
    return f_l, f_r


def group_corr(f_l, f_r, max_disp: int, groups: int, sign: int = -1) -> np.ndarray:
    """``(D, H, W, G)`` volume of per-group mean channel products."""
    f_l, f_r = _check_pair(f_l, f_r, groups)
    if max_disp < 1:
        raise ConfigError(f"max_disp must be >= 1, got {max_disp}")
    if sign not in (-1, 1):
        raise ConfigError(f"disparity sign must be +1 or -1, got {sign}")
    c, h, w = f_l.shape
    size = c // groups
    vol = np.zeros((max_disp, h, w, groups), dtype=DTYPE)
    for d in range(max_disp):
        shift = sign * d
        lo, hi = max(0, -shift), min(w, w - shift)
        if lo >= hi:
            continue
        prod = f_l[:, :, lo:hi] * f_r[:, :, lo + shift : hi + shift]
        vol[d, :, lo:hi, :] = prod.reshape(groups, size, h, hi - lo).mean(axis=1).transpose(1, 2, 0)
    return vol


def motif_corr(fmc_l, fmc_r, max_disp: int, groups: int, conv: VolumeConv = VolumeConv(),
               sign: int = -1) -> np.ndarray:
    """Group-wise correlation of motif features after a shared per-group 3-D convolution.

    Each group's ``(n, H, W)`` block of motif channels is treated as one
    volume for the convolution; the identity conv reduces this to
    :func:`group_corr`.
    """
    fmc_l, fmc_r = _check_pair(fmc_l, fmc_r, groups)
    if not conv.is_identity:
        size = fmc_l.shape[0] // groups
        fmc_l = np.concatenate([conv(fmc_l[g * size : (g + 1) * size]) for g in range(groups)])
        fmc_r = np.concatenate([conv(fmc_r[g * size : (g + 1) * size]) for g in range(groups)])
    return group_corr(fmc_l, fmc_r, max_disp, groups, sign)


def combine(c_g: np.ndarray, c_c: np.ndarray) -> np.ndarray:
    """Collapse the group axis, weighting the base volume by the motif volume."""
    c_g = np.asarray(c_g, dtype=DTYPE)
    c_c = np.asarray(c_c, dtype=DTYPE)
    if c_g.shape != c_c.shape or c_g.ndim != 4:
        raise DimensionError(f"grouped volumes must match: {c_g.shape} vs {c_c.shape}")
    return np.einsum("dhwg,dhwg->dhw", c_g, c_c)


def softmax(x: np.ndarray, axis: int = 0) -> np.ndarray:
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def init_disparity(vol: np.ndarray, conv: VolumeConv = VolumeConv()) -> np.ndarray:
    """Soft-argmin: expected disparity index under a softmax over the disparity axis."""
    vol = np.asarray(vol, dtype=DTYPE)
    if vol.ndim != 3 or vol.shape[0] < 2:
        raise DimensionError(f"need a (D>=2, H, W) volume, got shape {vol.shape}")
    logits = conv(vol)
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits in the initial-disparity volume")
    # normalise after the weighted sum: uniform logits then give exactly (D - 1) / 2
    e = np.exp(logits - logits.max(axis=0, keepdims=True))
    d = np.arange(vol.shape[0], dtype=DTYPE)
    return np.einsum("d,dhw->hw", d, e) / e.sum(axis=0)


def corr_lookup(vol: np.ndarray, disp: np.ndarray, radius: int) -> np.ndarray:
    """Sample ``vol`` at ``disp + delta`` for ``delta`` in ``-radius .. radius``.

    Linear interpolation along the disparity axis with the sample position
    clamped to ``[0, D - 1]``.  Returns ``(2 * radius + 1, H, W)``.
    """
    if radius < 0:
        raise ConfigError(f"radius must be >= 0, got {radius}")
    vol = np.asarray(vol, dtype=DTYPE)
    n_d, h, w = vol.shape
    disp = np.asarray(disp, dtype=DTYPE)
    if disp.shape != (h, w):
        raise DimensionError(f"disparity {disp.shape} does not match volume plane {(h, w)}")
    offsets = np.arange(-radius, radius + 1, dtype=DTYPE)
    pos = np.clip(disp[None] + offsets[:, None, None], 0, n_d - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_d - 1)
    frac = pos - lo
    rows, cols = np.indices((h, w))
    v_lo = vol[lo, rows[None], cols[None]]
    v_hi = vol[hi, rows[None], cols[None]]
    return v_lo + frac * (v_hi - v_lo)


def scale4_disparities(max_disparity: int) -> int:
    """Disparity levels of the 1/4-scale volume: ceil(max / 4)."""
    return -(-max_disparity // 4)


def volume_to_bytes(vol: np.ndarray, flags: int = 0) -> bytes:
    """``MCVV`` dump: an 8-word header (magic, D, H, W, G, flags, 2 reserved u32), then float32 data.

    Combined volumes are written with ``G = 0``.
    """
    vol = np.asarray(vol)
    if vol.ndim == 3:
        d, h, w = vol.shape
        g = 0
    elif vol.ndim == 4:
        d, h, w, g = vol.shape
    else:
        raise DimensionError(f"volume must be 3-D or 4-D, got {vol.shape}")
    header = VOLUME_MAGIC + struct.pack("<7I", d, h, w, g, flags, 0, 0)
    return header + np.ascontiguousarray(vol, dtype="<f4").tobytes()


def volume_from_bytes(buf: bytes) -> tuple[np.ndarray, int]:
    if buf[:4] != VOLUME_MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}", 0)
    if len(buf) < 32:
        raise FormatError("truncated volume header", len(buf))
    d, h, w, g, flags = struct.unpack_from("<7I", buf, 4)[:5]
    shape = (d, h, w) if g == 0 else (d, h, w, g)
    n = int(np.prod(shape))
    if len(buf) != 32 + 4 * n:
        raise FormatError(f"payload is {len(buf) - 32} bytes, expected {4 * n}", 32)
    return np.frombuffer(buf, dtype="<f4", offset=32).reshape(shape).copy(), flags
