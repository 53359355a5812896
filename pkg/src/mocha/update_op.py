"""Multi-scale convolutional LSTM update operator and disparity head.

One iteration walks three stages: 1/16 -> 1/8 -> 1/4 resolution.  The
hidden and cell state leaving a stage are bilinearly upsampled x2 to seed the
next stage; the 1/4 stage state is average-pooled x4 to seed the next
iteration's 1/16 stage.  Only the 1/4 stage sees correlation lookups.
Disparity enters every stage as ``d / n_disp`` at the stage's resolution.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .core import DTYPE, ConfigError, DimensionError, SeededGenerator, check_finite, he_uniform
from .cost_volume import corr_lookup
from .layers import avg_pool, conv2d, resize, sigmoid

SCALES = (16, 8, 4)


class LSTMStep(NamedTuple):
    h: np.ndarray
    c: np.ndarray
    forget: np.ndarray
    input: np.ndarray
    candidate: np.ndarray
    output: np.ndarray


@dataclass
class UpdateWeights:
    """Per stage ``t`` (1, 2, 3): stacked gate kernels ``(4 * hidden, hidden + x_dim, 3, 3)``
    in f, i, c, o order, plus their biases; and the 1x1 head."""

    gates: list[tuple[np.ndarray, np.ndarray]]
    head_w: np.ndarray
    head_b: np.ndarray

    @property
    def hidden(self) -> int:
        return self.head_w.shape[1]

    @classmethod
    def seeded(cls, seed: int, hidden: int, x_dims: tuple[int, int, int]) -> UpdateWeights:
        root = SeededGenerator(seed).child("update")
        gates = []
        for t, xd in enumerate(x_dims, start=1):
            fan_in = (hidden + xd) * 9
            w = he_uniform(root.child(f"t{t}.w"), (4 * hidden, hidden + xd, 3, 3), fan_in)
            b = he_uniform(root.child(f"t{t}.b"), (4 * hidden,), fan_in)
            gates.append((w, b))
        head_w = he_uniform(root.child("head.w"), (1, hidden, 1, 1), hidden)
        head_b = np.zeros(1, dtype=DTYPE)
        return cls(gates, head_w, head_b)

    @classmethod
    def zeros(cls, hidden: int, x_dims: tuple[int, int, int]) -> UpdateWeights:
        gates = [
            (np.zeros((4 * hidden, hidden + xd, 3, 3)), np.zeros(4 * hidden)) for xd in x_dims
        ]
        return cls(gates, np.zeros((1, hidden, 1, 1)), np.zeros(1))


def x_dims(context_channels: dict[int, int] | int, radius: int) -> tuple[int, int, int]:
    """Input widths of the three stages: context + disparity, plus lookups at 1/4."""
    if isinstance(context_channels, int):
        context_channels = {s: context_channels for s in SCALES}
    return (
        context_channels[16] + 1,
        context_channels[8] + 1,
        context_channels[4] + 2 * radius + 2,
    )


def lstm_step(h_prev, c_prev, x, w: np.ndarray, b: np.ndarray, threads: int = 1) -> LSTMStep:
    hidden = h_prev.shape[0]
    if c_prev.shape != h_prev.shape or x.shape[1:] != h_prev.shape[1:]:
        raise DimensionError(
            f"state {h_prev.shape}/{c_prev.shape} and input {x.shape} are inconsistent"
        )
    if w.shape[:2] != (4 * hidden, hidden + x.shape[0]):
        raise DimensionError(f"gate kernel {w.shape} does not fit [h, x] of {hidden + x.shape[0]}")
    pre = conv2d(np.concatenate([h_prev, x]), w, b, threads=threads)
    f = sigmoid(pre[:hidden])
    i = sigmoid(pre[hidden : 2 * hidden])
    cand = np.tanh(pre[2 * hidden : 3 * hidden])
    o = sigmoid(pre[3 * hidden :])
    c = f * c_prev + i * cand
    h = o * np.tanh(c)
    return LSTMStep(h, c, f, i, cand, o)


def predict_delta(h3: np.ndarray, weights: UpdateWeights) -> np.ndarray:
    """1x1 head: ``(hidden, H, W) -> (H, W)`` disparity increment."""
    return np.einsum("c,chw->hw", weights.head_w[0, :, 0, 0], h3) + weights.head_b[0]


@dataclass
class UpdateState:
    h: np.ndarray
    c: np.ndarray
    disparity: np.ndarray
    iteration: int = 0


Observer = Callable[[int, int, np.ndarray, LSTMStep], None]


def run_refinement(
    volume: np.ndarray,
    context: dict[int, np.ndarray],
    d0: np.ndarray,
    iters: int,
    weights: UpdateWeights,
    radius: int = 4,
    threads: int = 1,
    observer: Observer | None = None,
) -> list[np.ndarray]:
    """Run ``iters`` update iterations from ``d0``; returns ``[d_1, ..., d_iters]``.

    ``observer(k, t, c_in, step)`` is called after every stage with the cell
    state that entered it.
    """
    if iters < 1:
        raise ConfigError(f"iters must be >= 1, got {iters}")
    n_disp = volume.shape[0]
    d = np.asarray(d0, dtype=DTYPE)
    h4, w4 = d.shape
    for s in SCALES:
        if context[s].shape[1:] != (h4 * 4 // s, w4 * 4 // s):
            raise DimensionError(f"context at 1/{s} has shape {context[s].shape}")
    hidden = weights.hidden
    state = UpdateState(
        h=np.zeros((hidden, h4 // 4, w4 // 4)), c=np.zeros((hidden, h4 // 4, w4 // 4)), disparity=d
    )
    out = []
    for k in range(1, iters + 1):
        h, c = state.h, state.c
        for t, s in enumerate(SCALES, start=1):
            factor = s // 4
            if t > 1:
                size = context[s].shape[1:]
                h, c = resize(h, size), resize(c, size)
            d_s = avg_pool(state.disparity[None], factor) if factor > 1 else state.disparity[None]
            parts = [context[s], d_s / factor / n_disp]
            if t == 3:
                parts.insert(1, corr_lookup(volume, state.disparity, radius))
            step = lstm_step(h, c, np.concatenate(parts), *weights.gates[t - 1], threads=threads)
            if observer is not None:
                observer(k, t, c, step)
            h, c = step.h, step.c
        delta = predict_delta(h, weights)
        disparity = state.disparity + delta
        check_finite(disparity, f"disparity at iteration {k}")
        state = UpdateState(avg_pool(h, 4), avg_pool(c, 4), disparity, k)
        out.append(disparity)
    return out
