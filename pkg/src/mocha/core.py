"""Shared array conventions, errors, and the deterministic generator.

Planes are ``(H, W)`` arrays and feature tensors are ``(C, H, W)`` arrays,
channel-major then row-major.  All numerics run in float64; float32 only
appears at the file-format boundary.
"""
from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, TypeVar

import numpy as np

DTYPE = np.float64

T = TypeVar("T")
R = TypeVar("R")


class MochaError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(MochaError, ValueError):
    pass


class ConfigError(MochaError, ValueError):
    pass


class StructureError(MochaError, ValueError):
    pass


class DegenerateGroupError(MochaError, ValueError):
    pass


class NumericError(MochaError, ArithmeticError):
    pass


class FormatError(MochaError, ValueError):
    """Malformed file contents; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass
class DisparityMap:
    """Per-pixel disparity (pixels at the map's own scale) with a validity mask."""

    values: np.ndarray
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise DimensionError(f"disparity map must be 2-D, got shape {self.values.shape}")
        if self.valid is None:
            self.valid = np.isfinite(self.values)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
            if self.valid.shape != self.values.shape:
                raise DimensionError(
                    f"mask shape {self.valid.shape} does not match values {self.values.shape}"
                )

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


def as_tensor3(x, name: str = "tensor") -> np.ndarray:
    a = np.asarray(x, dtype=DTYPE)
    if a.ndim != 3:
        raise DimensionError(f"{name} must be (C, H, W), got shape {a.shape}")
    return a


def as_plane(x, name: str = "plane") -> np.ndarray:
    a = np.asarray(x, dtype=DTYPE)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be (H, W), got shape {a.shape}")
    return a


def hadamard(a, b) -> np.ndarray:
    """Elementwise product; a single ``(H, W)`` plane ``b`` broadcasts over channels."""
    a = as_tensor3(a, "a")
    b = np.asarray(b, dtype=DTYPE)
    if b.shape == a.shape or (b.ndim == 2 and b.shape == a.shape[1:]):
        return a * b
    raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}")


# --- deterministic generator -------------------------------------------------
#
# SplitMix64 (Steele, Lea & Flood 2014) used as a counter-based generator:
# draw i of a stream with seed s is mix(s + (i + 1) * GOLDEN) mod 2**64.
# uniform = (draw >> 11) * 2**-53 in [0, 1).
# normal  = Box-Muller on consecutive draw pairs (u1, u2):
#           sqrt(-2 ln(1 - u1)) * cos(2 pi u2); one normal per two draws.

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, start: int, count: int) -> np.ndarray:
    """Raw 64-bit draws ``start .. start + count - 1`` of the stream for ``seed``."""
    counters = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(np.uint64(seed & _MASK64) + counters * _GOLDEN)


def derive_seed(seed: int, tag: str) -> int:
    """Independent child seed for a named weight tensor."""
    key = (seed ^ (zlib.crc32(tag.encode()) << 32)) & _MASK64
    return int(splitmix64(key, 0, 1)[0])


@dataclass(frozen=True)
class SeededGenerator:
    seed: int
    position: int = 0

    def advance(self, n: int) -> SeededGenerator:
        return SeededGenerator(self.seed, self.position + n)

    def child(self, tag: str) -> SeededGenerator:
        return SeededGenerator(derive_seed(self.seed, tag))


def _shape_size(shape) -> tuple[tuple[int, ...], int]:
    shape = (shape,) if isinstance(shape, int) else tuple(int(s) for s in shape)
    if any(s < 0 for s in shape):
        raise DimensionError(f"negative extent in shape {shape}")
    return shape, int(np.prod(shape, dtype=np.int64))


def seeded_uniform(gen: SeededGenerator, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    shape, n = _shape_size(shape)
    u = (splitmix64(gen.seed, gen.position, n) >> np.uint64(11)).astype(DTYPE) * 2.0**-53
    return (low + (high - low) * u).reshape(shape)


def seeded_normal(gen: SeededGenerator, shape, scale: float = 1.0) -> np.ndarray:
    """Gaussian draws with standard deviation ``scale``; uses ``2 * size`` stream positions."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    shape, n = _shape_size(shape)
    u = seeded_uniform(gen, 2 * n)
    u1, u2 = u[0::2], u[1::2]
    z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
    return (scale * z).reshape(shape)


def he_uniform(gen: SeededGenerator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return seeded_uniform(gen, shape, -bound, bound)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Ordered map; results are assembled in input order whatever the thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def check_finite(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values in {what}")

