"""Orthonormal multi-level 2-D Haar transform.

Per 2x2 block ``[[a, b], [c, d]]``::

    LL = (a + b + c + d) / 2     HL = (a - b + c - d) / 2
    LH = (a + b - c - d) / 2     HH = (a - b - c + d) / 2

HL carries horizontal-frequency detail (differences along a row), LH
vertical-frequency detail.  Odd sizes are edge-replicated on the right and
bottom before each level; the inverse crops back to the recorded size.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DTYPE, DimensionError, StructureError, as_plane, as_tensor3

SUBBANDS = ("LH", "HL", "HH")


@dataclass
class WaveletPyramid:
    """``details[l]`` holds the (LH, HL, HH) planes of level ``l + 1``.

    ``sizes[l]`` is the unpadded input size of level ``l + 1``; ``sizes[0]``
    is the original plane size.
    """

    ll: np.ndarray
    details: list[tuple[np.ndarray, np.ndarray, np.ndarray]]
    sizes: list[tuple[int, int]]

    @property
    def levels(self) -> int:
        return len(self.details)

    @property
    def original_size(self) -> tuple[int, int]:
        return self.sizes[0]

    def subbands(self) -> list[tuple[str, np.ndarray]]:
        """All coefficient planes, finest level first, LL last (e.g. LH1 .. HH2, LL2)."""
        out = []
        for lvl, bands in enumerate(self.details, start=1):
            out.extend((f"{name}{lvl}", band) for name, band in zip(SUBBANDS, bands))
        out.append((f"LL{self.levels}", self.ll))
        return out

    def replace(self, planes: dict[str, np.ndarray]) -> WaveletPyramid:
        """Copy with the named subbands swapped out (names as in :meth:`subbands`)."""
        details = []
        for lvl, bands in enumerate(self.details, start=1):
            details.append(tuple(planes.get(f"{n}{lvl}", b) for n, b in zip(SUBBANDS, bands)))
        ll = planes.get(f"LL{self.levels}", self.ll)
        return WaveletPyramid(ll, details, list(self.sizes))  # type: ignore[arg-type]

    def energy(self) -> float:
        return float(sum(np.sum(p * p) for _, p in self.subbands()))


def _pad_even(x: np.ndarray) -> np.ndarray:
    h, w = x.shape
    return np.pad(x, ((0, h % 2), (0, w % 2)), mode="edge")


def _analyze(x: np.ndarray):
    x = _pad_even(x)
    a, b = x[0::2, 0::2], x[0::2, 1::2]
    c, d = x[1::2, 0::2], x[1::2, 1::2]
    ll = (a + b + c + d) / 2
    hl = (a - b + c - d) / 2
    lh = (a + b - c - d) / 2
    hh = (a - b - c + d) / 2
    return ll, (lh, hl, hh)


def _synthesize(ll, lh, hl, hh, size: tuple[int, int]) -> np.ndarray:
    h2, w2 = ll.shape
    x = np.empty((2 * h2, 2 * w2), dtype=DTYPE)
    x[0::2, 0::2] = (ll + hl + lh + hh) / 2
    x[0::2, 1::2] = (ll - hl + lh - hh) / 2
    x[1::2, 0::2] = (ll + hl - lh - hh) / 2
    x[1::2, 1::2] = (ll - hl - lh + hh) / 2
    return x[: size[0], : size[1]]


def dwt2(x, levels: int = 2) -> WaveletPyramid:
    x = as_plane(x)
    if levels < 1:
        raise DimensionError(f"levels must be >= 1, got {levels}")
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise DimensionError(f"cannot transform an empty plane of shape {x.shape}")
    details, sizes = [], []
    ll = x
    for _ in range(levels):
        sizes.append(ll.shape)
        ll, bands = _analyze(ll)
        details.append(bands)
    return WaveletPyramid(ll, details, sizes)


def idwt2(p: WaveletPyramid) -> np.ndarray:
    if len(p.details) != len(p.sizes) or not p.details:
        raise StructureError("pyramid must have one size record per level and >= 1 level")
    ll = np.asarray(p.ll, dtype=DTYPE)
    for lvl in range(p.levels - 1, -1, -1):
        lh, hl, hh = (np.asarray(b, dtype=DTYPE) for b in p.details[lvl])
        h, w = p.sizes[lvl]
        expected = ((h + 1) // 2, (w + 1) // 2)
        for name, band in (("LL", ll), ("LH", lh), ("HL", hl), ("HH", hh)):
            if band.shape != expected:
                raise StructureError(
                    f"level {lvl + 1} {name} has shape {band.shape}, expected {expected}"
                )
        ll = _synthesize(ll, lh, hl, hh, (h, w))
    return ll


def dwt3(x, levels: int = 2) -> list[WaveletPyramid]:
    x = as_tensor3(x)
    return [dwt2(ch, levels) for ch in x]


def idwt3(pyramids: list[WaveletPyramid]) -> np.ndarray:
    return np.stack([idwt2(p) for p in pyramids])
