"""Forward-only building blocks shared by the seeded networks."""
from __future__ import annotations

import numpy as np

from .core import DTYPE, DimensionError, parallel_map

# Output channels are always computed in blocks of this size, so the thread
# count only changes which worker runs a block, never the arithmetic.
CONV_BLOCK = 32


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None, stride: int = 1,
           threads: int = 1) -> np.ndarray:
    """Zero-padded 'same' convolution of ``(Cin, H, W)`` with ``(Cout, Cin, k, k)``."""
    cin, h, wd = x.shape
    cout, wcin, k, k2 = w.shape
    if wcin != cin or k != k2:
        raise DimensionError(f"kernel {w.shape} does not fit input {x.shape}")
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(1, 2))
    win = win[:, ::stride, ::stride]
    ho, wo = win.shape[1:3]
    cols = np.ascontiguousarray(win.transpose(0, 3, 4, 1, 2)).reshape(cin * k * k, ho * wo)
    wm = w.reshape(cout, cin * k * k)

    def block(start: int) -> np.ndarray:
        return wm[start : start + CONV_BLOCK] @ cols

    out = np.concatenate(parallel_map(block, range(0, cout, CONV_BLOCK), threads))
    out = out.reshape(cout, ho, wo)
    if b is not None:
        out += b[:, None, None]
    return out


def conv3d_single(x: np.ndarray, kernel: np.ndarray, bias: float = 0.0) -> np.ndarray:
    """Zero-padded 'same' 3-D convolution of one ``(A, B, C)`` volume with a ``(3, 3, 3)`` kernel."""
    xp = np.pad(x, 1)
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3, 3))
    return np.einsum("abcijk,ijk->abc", win, kernel, optimize=True) + bias


def _interp_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Row-stochastic linear interpolation weights, half-pixel centres, edge clamp."""
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    m = np.zeros((n_out, n_in), dtype=DTYPE)
    np.add.at(m, (np.arange(n_out), lo), 1 - frac)
    np.add.at(m, (np.arange(n_out), hi), frac)
    return m


def resize(x: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear resize of a ``(C, H, W)`` tensor; each output is a convex mix of inputs."""
    mh = _interp_matrix(size[0], x.shape[1])
    mw = _interp_matrix(size[1], x.shape[2])
    return np.einsum("ph,chw,qw->cpq", mh, x, mw, optimize=True)


def upsample(x: np.ndarray, factor: int) -> np.ndarray:
    return resize(x, (x.shape[1] * factor, x.shape[2] * factor))


def avg_pool(x: np.ndarray, factor: int) -> np.ndarray:
    c, h, w = x.shape
    if h % factor or w % factor:
        raise DimensionError(f"{h}x{w} is not divisible by pool factor {factor}")
    return x.reshape(c, h // factor, factor, w // factor, factor).mean(axis=(2, 4))


def sigmoid(x: np.ndarray) -> np.ndarray:
    # two-branch form avoids overflow in exp for large |x|
    out = np.empty_like(x, dtype=DTYPE)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def pixel_norm(x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Scale every pixel's channel vector to unit RMS (a purely local operation)."""
    return x / np.sqrt(np.mean(x * x, axis=0, keepdims=True) + eps)
