"""Seeded stand-in encoder and the MCFV feature-file format.

MCFV layout (little-endian)::

    b"MCFV"  u16 version  u8 entry_count
    per entry: u8 scale  u32 C  u32 H  u32 W  then C*H*W float32, channel-major

A set high bit in ``scale`` (``0x80 | divisor``) marks a context entry;
plain divisors are matching features.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    ConfigError,
    DimensionError,
    FormatError,
    SeededGenerator,
    as_tensor3,
    he_uniform,
    parallel_map,
)
from .layers import conv2d, pixel_norm, relu

MAGIC = b"MCFV"
VERSION = 1
CONTEXT_FLAG = 0x80
MAX_ELEMENTS = 1 << 31


@dataclass
class FeatureSet:
    """Features of one view: ``features[4]`` feeds matching, ``context[i]`` the update operator."""

    features: dict[int, np.ndarray] = field(default_factory=dict)
    context: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def matching(self) -> np.ndarray:
        return self.features[4]


@dataclass(frozen=True)
class EncoderConfig:
    seed: int = 0
    stage_channels: tuple[int, int, int, int] = (16, 32, 48, 64)
    feature_channels: int = 32
    context_channels: int = 64

    def __post_init__(self):
        if min(self.stage_channels) <= 0 or self.feature_channels <= 0 or self.context_channels <= 0:
            raise ConfigError("channel counts must be positive")


class ToyEncoder:
    """Four stride-2 stages of seeded 3x3 convolutions with rectifiers.

    Weights come from ``EncoderConfig.seed`` alone, so left and right views
    encoded by equal configs share weights.
    """

    def __init__(self, cfg: EncoderConfig = EncoderConfig()):
        self.cfg = cfg
        root = SeededGenerator(cfg.seed).child("encoder")
        self.stages = []
        cin = 3
        for s, cout in enumerate(cfg.stage_channels):
            down = self._conv(root, f"stage{s}.down", cin, cout)
            mix = self._conv(root, f"stage{s}.mix", cout, cout)
            self.stages.append((down, mix))
            cin = cout
        self.match_head = self._conv(root, "head.match", cfg.stage_channels[1], cfg.feature_channels)
        self.context_heads = {
            4: self._conv(root, "head.ctx4", cfg.stage_channels[1], cfg.context_channels),
            8: self._conv(root, "head.ctx8", cfg.stage_channels[2], cfg.context_channels),
            16: self._conv(root, "head.ctx16", cfg.stage_channels[3], cfg.context_channels),
        }

    @staticmethod
    def _conv(root: SeededGenerator, tag: str, cin: int, cout: int):
        fan_in = cin * 9
        w = he_uniform(root.child(tag + ".w"), (cout, cin, 3, 3), fan_in)
        b = he_uniform(root.child(tag + ".b"), (cout,), fan_in) * 0.1
        return w, b

    def __call__(self, img, threads: int = 1) -> FeatureSet:
        img = as_tensor3(img, "image")
        c, h, w = img.shape
        if c != 3:
            raise DimensionError(f"expected a 3-channel image, got {c} channels")
        if h < 32 or w < 32 or h % 16 or w % 16:
            raise DimensionError(
                f"image is {h}x{w}; pad height and width to multiples of 16 (minimum 32)"
            )
        x = img
        outs = {}
        for s, (down, mix) in enumerate(self.stages):
            x = relu(conv2d(x, *down, stride=2, threads=threads))
            x = relu(conv2d(x, *mix, threads=threads))
            outs[2 ** (s + 1)] = x
        fs = FeatureSet()
        fs.features[4] = pixel_norm(conv2d(outs[4], *self.match_head, threads=threads))
        for scale, head in self.context_heads.items():
            fs.context[scale] = pixel_norm(conv2d(outs[scale], *head, threads=threads))
        return fs


def encode_toy(img, cfg: EncoderConfig = EncoderConfig(), threads: int = 1) -> FeatureSet:
    return ToyEncoder(cfg)(img, threads)


def encode_pair(left, right, cfg: EncoderConfig = EncoderConfig(), threads: int = 1):
    enc = ToyEncoder(cfg)
    return tuple(parallel_map(lambda im: enc(im), [left, right], threads))


# --- file format -------------------------------------------------------------


def features_to_bytes(fs: FeatureSet) -> bytes:
    entries = [(s, t) for s, t in sorted(fs.features.items())]
    entries += [(s | CONTEXT_FLAG, t) for s, t in sorted(fs.context.items())]
    out = [MAGIC, struct.pack("<HB", VERSION, len(entries))]
    for scale, t in entries:
        t = as_tensor3(t)
        if not 0 < scale < 256:
            raise FormatError(f"scale {scale} does not fit in a byte", 0)
        out.append(struct.pack("<BIII", scale, *t.shape))
        out.append(np.ascontiguousarray(t, dtype="<f4").tobytes())
    return b"".join(out)


def features_from_bytes(buf: bytes) -> FeatureSet:
    if len(buf) < 7:
        raise FormatError("file too short for an MCFV header", len(buf))
    if buf[:4] != MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}", 0)
    version, count = struct.unpack_from("<HB", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    pos = 7
    fs = FeatureSet()
    for _ in range(count):
        if pos + 13 > len(buf):
            raise FormatError("truncated entry header", pos)
        scale, c, h, w = struct.unpack_from("<BIII", buf, pos)
        n = c * h * w
        if n > MAX_ELEMENTS:
            raise FormatError(f"entry dims {c}x{h}x{w} overflow the element limit", pos + 1)
        pos += 13
        if pos + 4 * n > len(buf):
            raise FormatError(f"truncated payload: need {4 * n} bytes", pos)
        t = np.frombuffer(buf, dtype="<f4", count=n, offset=pos).reshape(c, h, w).copy()
        pos += 4 * n
        target = fs.context if scale & CONTEXT_FLAG else fs.features
        target[scale & ~CONTEXT_FLAG] = t
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes", pos)
    return fs


def save_features(fs: FeatureSet, path) -> None:
    Path(path).write_bytes(features_to_bytes(fs))


def load_features(path) -> FeatureSet:
    return features_from_bytes(Path(path).read_bytes())
