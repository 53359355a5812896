"""End-to-end forward pass: encode, motif attention, volumes, iterations, refinement."""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from .core import DTYPE, ConfigError, DimensionError, SeededGenerator, as_tensor3, seeded_uniform
from .cost_volume import (
    VolumeConv,
    combine,
    group_corr,
    init_disparity,
    motif_corr,
    scale4_disparities,
)
from .features import EncoderConfig, ToyEncoder
from .motif_graph import McgaConfig, MotifGraph, Normalization, mcga_apply
from .remp import RempWeights, recon_error, remp_refine, upsample_disparity
from .update_op import UpdateWeights, run_refinement, x_dims

log = logging.getLogger(__name__)

TOGGLES = ("mcg", "wavelet", "remp")


def default_seed() -> int:
    return int(os.environ.get("MOCHA_SEED", "0"))


@dataclass
class PipelineConfig:
    seed: int = field(default_factory=default_seed)
    n_groups: int = 8
    window: int = 3
    normalization: str = Normalization.TOTAL_CHANNELS.value
    wavelet_levels: int = 2
    max_disparity: int = 192
    iterations: int = 22
    gamma: float = 0.9
    disparity_sign: int = -1
    lookup_radius: int = 4
    toggles: dict[str, bool] = field(default_factory=lambda: {t: True for t in TOGGLES})
    feature_channels: int = 32
    context_channels: int = 64
    hidden_channels: int = 64
    threads: int = 1

    def __post_init__(self):
        self.toggles = {**{t: True for t in TOGGLES}, **self.toggles}
        unknown = set(self.toggles) - set(TOGGLES)
        if unknown:
            raise ConfigError(f"unknown toggles {sorted(unknown)}; expected {TOGGLES}")
        if self.feature_channels % self.n_groups:
            raise ConfigError(
                f"feature_channels={self.feature_channels} is not divisible by n_groups={self.n_groups}"
            )
        for name in ("max_disparity", "iterations", "wavelet_levels", "hidden_channels",
                     "context_channels", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.lookup_radius < 0:
            raise ConfigError("lookup_radius must be >= 0")
        if self.disparity_sign not in (-1, 1):
            raise ConfigError("disparity_sign must be -1 or +1")
        Normalization(self.normalization)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PipelineConfig:
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ConfigError(f"unknown config fields {sorted(bad)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> PipelineConfig:
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @property
    def scale4_disparities(self) -> int:
        return scale4_disparities(self.max_disparity)

    def mcga(self) -> McgaConfig:
        return McgaConfig(
            n_groups=self.n_groups,
            window=self.window,
            normalization=Normalization(self.normalization),
            levels=self.wavelet_levels,
            wavelet=self.toggles["wavelet"],
        )


@dataclass
class PipelineResult:
    grouped: np.ndarray
    motif: np.ndarray
    combined: np.ndarray
    d0: np.ndarray
    iterations: list[np.ndarray]
    upsampled: np.ndarray
    disparity: np.ndarray
    graphs: dict[str, list[MotifGraph]] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)


class Pipeline:
    """All seeded weights for one config, reusable across image pairs."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.encoder = ToyEncoder(
            EncoderConfig(seed=cfg.seed, feature_channels=cfg.feature_channels,
                          context_channels=cfg.context_channels)
        )
        self.motif_conv = VolumeConv.seeded(cfg.seed, "motif_conv")
        self.init_conv = VolumeConv.seeded(cfg.seed, "init_conv")
        self.update = UpdateWeights.seeded(
            cfg.seed, cfg.hidden_channels, x_dims(cfg.context_channels, cfg.lookup_radius)
        )
        self.remp = RempWeights.seeded(cfg.seed, mcga=McgaConfig(
            n_groups=2, normalization=Normalization(cfg.normalization),
            levels=cfg.wavelet_levels, wavelet=cfg.toggles["wavelet"]))

    def __call__(self, left, right, collect_graphs: bool = False) -> PipelineResult:
        cfg = self.cfg
        left = as_tensor3(left, "left image")
        right = as_tensor3(right, "right image")
        if left.shape != right.shape:
            raise DimensionError(f"left {left.shape} and right {right.shape} images differ")
        _, h, w = left.shape
        left_p, right_p = pad16(left), pad16(right)
        timings: dict[str, float] = {}
        t0 = time.perf_counter()

        fl = self.encoder(left_p, cfg.threads)
        fr = self.encoder(right_p, cfg.threads)
        timings["encode"] = time.perf_counter() - t0

        n_disp = cfg.scale4_disparities
        groups = cfg.n_groups
        c_g = group_corr(fl.matching, fr.matching, n_disp, groups, cfg.disparity_sign)
        graphs: dict[str, list[MotifGraph]] = {}
        if cfg.toggles["mcg"]:
            mcga = cfg.mcga()
            gl: list[MotifGraph] | None = [] if collect_graphs else None
            gr: list[MotifGraph] | None = [] if collect_graphs else None
            fmc_l = mcga_apply(fl.matching, mcga, gl, cfg.threads)
            fmc_r = mcga_apply(fr.matching, mcga, gr, cfg.threads)
            if collect_graphs:
                graphs = {"left": gl, "right": gr}
            c_c = motif_corr(fmc_l, fmc_r, n_disp, groups, self.motif_conv, cfg.disparity_sign)
        else:
            c_c = np.ones_like(c_g)
        vol = combine(c_g, c_c)
        d0 = init_disparity(vol, self.init_conv)
        t1 = time.perf_counter()
        timings["volume"] = t1 - t0 - timings["encode"]

        preds = run_refinement(vol, fl.context, d0, cfg.iterations, self.update,
                               cfg.lookup_radius, cfg.threads)
        t2 = time.perf_counter()
        timings["update"] = t2 - t1

        d_up = upsample_disparity(preds[-1], 4)
        if cfg.toggles["remp"]:
            err = recon_error(left_p, right_p, np.clip(d_up, 0, None))
            final = remp_refine(d_up, err, self.remp, cfg.max_disparity, cfg.threads)
        else:
            final = d_up
        timings["remp"] = time.perf_counter() - t2
        final = np.clip(final[:h, :w], 0.0, float(cfg.max_disparity))
        log.debug("pipeline timings %s", timings)
        return PipelineResult(c_g, c_c, vol, d0, preds, d_up[:h, :w], final, graphs, timings)


def pad16(img: np.ndarray) -> np.ndarray:
    """Edge-replicate right/bottom so both sides are multiples of 16 (at least 32)."""
    _, h, w = img.shape
    ph = max(32, -(-h // 16) * 16) - h
    pw = max(32, -(-w // 16) * 16) - w
    return np.pad(img, ((0, 0), (0, ph), (0, pw)), mode="edge")


def run_pipeline(left, right, cfg: PipelineConfig | None = None, **kw) -> PipelineResult:
    return Pipeline(cfg or PipelineConfig())(left, right, **kw)


def synthetic_pair(height: int = 96, width: int = 128, disparity: int = 8, seed: int = 0):
    """Textured fronto-parallel plane seen by a rectified pair at constant disparity.

    Returns ``(left, right, ground_truth)``; ground truth is 0 (invalid) in the
    left border where the match falls outside the right image.
    """
    gen = SeededGenerator(seed).child("synthetic")
    wide = width + disparity
    base = seeded_uniform(gen, (3, height, wide))
    # light smoothing gives the texture some spatial structure
    tex = (base + np.roll(base, 1, axis=2) + np.roll(base, 1, axis=1)) / 3.0
    right = tex[:, :, :width]
    left = np.empty_like(right)
    left[:, :, disparity:] = tex[:, :, : width - disparity]
    left[:, :, :disparity] = tex[:, :, width : width + disparity][:, :, ::-1]
    gt = np.full((height, width), float(disparity), dtype=DTYPE)
    gt[:, :disparity] = 0.0
    return left, right, gt
