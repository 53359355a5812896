"""Disparity evaluation: end-point error, bad-pixel ratios, and the sequence loss."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import DTYPE, DimensionError, MochaError

GAMMA = 0.9


class EvaluationError(MochaError, ValueError):
    pass


def _prepare(d, d_gt, mask):
    d = np.asarray(d, dtype=DTYPE)
    d_gt = np.asarray(d_gt, dtype=DTYPE)
    if d.shape != d_gt.shape:
        raise DimensionError(f"prediction {d.shape} and ground truth {d_gt.shape} differ")
    mask = np.ones(d.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != d.shape:
        raise DimensionError(f"mask {mask.shape} does not match {d.shape}")
    if not mask.any():
        raise EvaluationError("evaluation mask selects no pixels")
    return d, d_gt, mask


def epe(d, d_gt, mask=None) -> float:
    d, d_gt, mask = _prepare(d, d_gt, mask)
    return float(np.mean(np.abs(d - d_gt)[mask]))


def bad_ratio(d, d_gt, delta: float, mask=None) -> float:
    """Percentage of masked pixels whose absolute error strictly exceeds ``delta``."""
    d, d_gt, mask = _prepare(d, d_gt, mask)
    err = np.abs(d - d_gt)[mask]
    return 100.0 * np.count_nonzero(err > delta) / err.size


def smooth_l1(x):
    """Elementwise Huber-style penalty with unit threshold; scalars stay scalars."""
    a = np.abs(np.asarray(x, dtype=DTYPE))
    out = np.where(a < 1.0, 0.5 * a * a, a - 0.5)
    return float(out) if out.ndim == 0 else out


def sequence_loss(d0, preds: Sequence, d_gt, gamma: float = GAMMA, mask=None) -> float:
    """Smooth-L1 on the initial disparity plus gamma-weighted L1 on every iteration.

    The last prediction has weight 1 and each earlier one a further factor
    ``gamma``.  Per-term values are means over the masked pixels.
    """
    if len(preds) < 1:
        raise EvaluationError("sequence loss needs at least one iteration")
    d0, d_gt, mask = _prepare(d0, d_gt, mask)
    loss = float(np.mean(smooth_l1((d0 - d_gt)[mask])))
    n = len(preds)
    for k, dk in enumerate(preds, start=1):
        loss += gamma ** (n - k) * epe(dk, d_gt, mask)
    return loss


@dataclass
class EvalReport:
    epe: float
    bad: dict[float, float] = field(default_factory=dict)
    valid_count: int = 0
    loss: float | None = None

    def to_dict(self) -> dict:
        out = {
            "epe": self.epe,
            "bad": {str(float(k)): v for k, v in sorted(self.bad.items())},
            "valid": self.valid_count,
        }
        if self.loss is not None:
            out["loss"] = self.loss
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def evaluate(d, d_gt, thresholds: Iterable[float] = (1.0, 2.0, 3.0), mask=None,
             loss: float | None = None) -> EvalReport:
    d, d_gt, mask = _prepare(d, d_gt, mask)
    return EvalReport(
        epe=epe(d, d_gt, mask),
        bad={float(t): bad_ratio(d, d_gt, t, mask) for t in thresholds},
        valid_count=int(mask.sum()),
        loss=loss,
    )
