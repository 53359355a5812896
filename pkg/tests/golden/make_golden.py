"""Regenerate the golden files in this directory.

Run from the repository root: ``python3 tests/golden/make_golden.py``.

``motif_corr_seeded.npz`` is produced by loop oracles only (nested-loop 3-D
convolution and group correlation), so replaying it checks the vectorised
code against an independent computation.  ``pipeline_small.npz`` is a
record-and-replay snapshot of a short seeded end-to-end run, guarding
against unintended numerical drift.
"""
from pathlib import Path

import numpy as np

from mocha import oracles
from mocha.cost_volume import VolumeConv
from mocha.pipeline import Pipeline, PipelineConfig, synthetic_pair

HERE = Path(__file__).parent
SEED = 2024


def conv3d_loops(x, kernel, bias):
    a, b, c = x.shape
    xp = np.pad(x, 1)
    out = np.zeros_like(x)
    for i in range(a):
        for j in range(b):
            for k in range(c):
                acc = 0.0
                for di in range(3):
                    for dj in range(3):
                        for dk in range(3):
                            acc += xp[i + di, j + dj, k + dk] * kernel[di, dj, dk]
                out[i, j, k] = acc + bias
    return out


def motif_corr_inputs():
    r = np.random.default_rng(SEED)
    return r.normal(size=(8, 6, 10)), r.normal(size=(8, 6, 10)), 5, 2


def make_motif_corr():
    fl, fr, d, groups = motif_corr_inputs()
    conv = VolumeConv.seeded(SEED, "golden")
    size = fl.shape[0] // groups
    tl = np.concatenate([conv3d_loops(fl[g * size:(g + 1) * size], conv.kernel, conv.bias)
                         for g in range(groups)])
    tr = np.concatenate([conv3d_loops(fr[g * size:(g + 1) * size], conv.kernel, conv.bias)
                         for g in range(groups)])
    vol = np.array(oracles.group_corr(tl.tolist(), tr.tolist(), d, groups))
    np.savez(HERE / "motif_corr_seeded.npz", volume=vol, f_l=fl, f_r=fr, max_disp=d, groups=groups,
             seed=SEED)


def pipeline_small_config():
    return PipelineConfig(seed=SEED, max_disparity=32, iterations=3, hidden_channels=16,
                          context_channels=16)


def make_pipeline():
    left, right, _ = synthetic_pair(32, 48, 4, SEED)
    cfg = pipeline_small_config()
    res = Pipeline(cfg)(left, right)
    np.savez(HERE / "pipeline_small.npz", config=cfg.to_json(), left=left, right=right, d0=res.d0, combined=res.combined,
             iterations=np.stack(res.iterations), disparity=res.disparity)


if __name__ == "__main__":
    make_motif_corr()
    make_pipeline()
