"""PFM disparity maps and binary PNM images, byte-exact.

PFM: ``Pf`` header, width and height, a scale whose sign gives the byte
order (negative = little-endian), one whitespace byte, then float32 rows
stored bottom-to-top.  Only grayscale ``Pf`` is supported; maps are always
written little-endian with scale ``-1.0``.

PNM: binary ``P5`` (gray) and ``P6`` (RGB) with maxval <= 255, read as
reals in [0, 1].
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import DisparityMap, FormatError

_WS = b" \t\r\n\v\f"


class UnsupportedFormatError(FormatError):
    pass


def _header_tokens(buf: bytes, count: int, comments: bool):
    """First ``count`` whitespace-separated header tokens and the payload offset.

    The payload starts after exactly one whitespace byte following the last token.
    """
    tokens = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos] in _WS:
            pos += 1
        if comments and pos < n and buf[pos] == ord("#"):
            while pos < n and buf[pos] not in b"\r\n":
                pos += 1
            continue
        if pos >= n:
            raise FormatError("truncated header", pos)
        start = pos
        while pos < n and buf[pos] not in _WS:
            pos += 1
        tokens.append((buf[start:pos], start))
    if pos >= n or buf[pos] not in _WS:
        raise FormatError("header must end with a single whitespace byte", pos)
    return tokens, pos + 1


def _positive_int(tok: bytes, offset: int, what: str) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise FormatError(f"{what} {tok!r} is not an integer", offset) from None
    if v <= 0:
        raise FormatError(f"{what} must be positive, got {v}", offset)
    return v


def _payload(buf: bytes, start: int, nbytes: int) -> bytes:
    if len(buf) - start < nbytes:
        raise FormatError(f"truncated payload: {len(buf) - start} of {nbytes} bytes", len(buf))
    if len(buf) - start > nbytes:
        raise FormatError(f"{len(buf) - start - nbytes} trailing bytes", start + nbytes)
    return buf[start:]


# --- PFM ---------------------------------------------------------------------


def read_pfm(buf: bytes) -> DisparityMap:
    if buf[:2] == b"PF":
        raise UnsupportedFormatError("colour PFM ('PF') is not supported", 0)
    if buf[:2] != b"Pf" or (len(buf) > 2 and buf[2] not in _WS):
        raise FormatError(f"bad PFM magic {buf[:2]!r}", 0)
    tokens, start = _header_tokens(buf, 4, comments=False)
    width = _positive_int(*tokens[1], "width")
    height = _positive_int(*tokens[2], "height")
    try:
        scale = float(tokens[3][0])
    except ValueError:
        raise FormatError(f"scale {tokens[3][0]!r} is not a number", tokens[3][1]) from None
    if scale == 0 or not np.isfinite(scale):
        raise FormatError(f"scale must be finite and nonzero, got {scale}", tokens[3][1])
    data = _payload(buf, start, 4 * width * height)
    raw = np.frombuffer(data, dtype="<u4" if scale < 0 else ">u4")
    # integer view keeps NaN payloads bit-for-bit through the byte-order swap
    values = raw.astype("=u4").view(np.float32).reshape(height, width)[::-1].copy()
    return DisparityMap(values)


def write_pfm(d) -> bytes:
    values = d.values if isinstance(d, DisparityMap) else np.asarray(d)
    if values.ndim != 2:
        raise ValueError(f"PFM maps must be 2-D, got shape {values.shape}")
    if values.dtype != np.float32:
        values = values.astype(np.float32)
    h, w = values.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    body = values[::-1].view(np.uint32).astype("<u4").tobytes()
    return header + body


def load_pfm(path) -> DisparityMap:
    return read_pfm(Path(path).read_bytes())


def save_pfm(path, d) -> None:
    Path(path).write_bytes(write_pfm(d))


# --- PNM ---------------------------------------------------------------------


def read_pnm(buf: bytes) -> np.ndarray:
    """Binary PGM/PPM to a ``(C, H, W)`` array in [0, 1]."""
    magic = buf[:2]
    if magic in (b"P1", b"P2", b"P3", b"P4"):
        raise UnsupportedFormatError(f"PNM variant {magic.decode()} is not supported", 0)
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"bad PNM magic {magic!r}", 0)
    tokens, start = _header_tokens(buf, 4, comments=True)
    width = _positive_int(*tokens[1], "width")
    height = _positive_int(*tokens[2], "height")
    maxval = _positive_int(*tokens[3], "maxval")
    if maxval > 255:
        raise UnsupportedFormatError(f"maxval {maxval} > 255 (16-bit PNM)", tokens[3][1])
    channels = 1 if magic == b"P5" else 3
    data = _payload(buf, start, width * height * channels)
    px = np.frombuffer(data, dtype=np.uint8).reshape(height, width, channels)
    return px.transpose(2, 0, 1).astype(np.float64) / maxval


def write_pnm(img, maxval: int = 255) -> bytes:
    """``(1, H, W)`` or ``(H, W)`` becomes P5, ``(3, H, W)`` P6; values are clipped to [0, 1]."""
    if not 0 < maxval <= 255:
        raise ValueError(f"maxval must be in 1..255, got {maxval}")
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3 or a.shape[0] not in (1, 3):
        raise ValueError(f"expected 1 or 3 channels, got shape {a.shape}")
    c, h, w = a.shape
    q = np.rint(np.clip(a, 0.0, 1.0) * maxval).astype(np.uint8)
    header = f"{'P5' if c == 1 else 'P6'}\n{w} {h}\n{maxval}\n".encode("ascii")
    return header + q.transpose(1, 2, 0).tobytes()


def load_pnm(path) -> np.ndarray:
    return read_pnm(Path(path).read_bytes())


def save_pnm(path, img, maxval: int = 255) -> None:
    Path(path).write_bytes(write_pnm(img, maxval))


# --- visualisation -----------------------------------------------------------

# blue -> cyan -> green -> yellow -> red, evenly spaced over [0, max_d]
RAMP = np.array(
    [[0.0, 0.0, 1.0], [0.0, 1.0, 1.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0], [1.0, 0.0, 0.0]]
)


def colorize_disparity(d, max_d: float) -> np.ndarray:
    """``(3, H, W)`` RGB rendering; invalid or non-finite pixels are black."""
    if not max_d > 0:
        raise ValueError(f"max_d must be positive, got {max_d}")
    dm = d if isinstance(d, DisparityMap) else DisparityMap(np.asarray(d))
    valid = dm.valid & np.isfinite(dm.values)
    t = np.clip(np.where(valid, dm.values, 0.0) / max_d, 0.0, 1.0) * (len(RAMP) - 1)
    lo = np.minimum(np.floor(t).astype(int), len(RAMP) - 2)
    frac = (t - lo)[..., None]
    rgb = RAMP[lo] * (1 - frac) + RAMP[lo + 1] * frac
    rgb[~valid] = 0.0
    return rgb.transpose(2, 0, 1)
