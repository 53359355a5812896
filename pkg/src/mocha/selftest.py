"""Brute-force oracle suites behind ``mocha selftest``."""
from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np

from . import cost_volume, metrics, motif_graph, oracles, remp, wavelet

Suite = Callable[[int, np.random.Generator], None]


def _random_dims(rng, lo=1, hi=64):
    return int(rng.integers(lo, hi + 1)), int(rng.integers(lo, hi + 1))


def wavelet_roundtrip(trials: int, rng: np.random.Generator) -> None:
    for _ in range(trials):
        x = rng.uniform(-100, 100, _random_dims(rng, 2))
        back = wavelet.idwt2(wavelet.dwt2(x, 2))
        err = np.max(np.abs(back - x))
        assert err <= 1e-5 * (1 + np.max(np.abs(x))), f"round-trip error {err} on {x.shape}"


def wavelet_energy(trials: int, rng: np.random.Generator) -> None:
    for _ in range(trials):
        h, w = (4 * int(v) for v in rng.integers(1, 17, 2))
        x = rng.normal(size=(h, w))
        e_in = float(np.sum(x * x))
        e_out = wavelet.dwt2(x, 2).energy()
        assert abs(e_out - e_in) <= 1e-4 * e_in, f"energy {e_out} vs {e_in} on {x.shape}"


def random_group(rng: np.random.Generator, max_nodes: int = 32) -> np.ndarray:
    """Random sequences; half the draws come from a small integer lattice to force ties."""
    n = int(rng.integers(2, max_nodes + 1))
    if rng.random() < 0.5:
        return rng.uniform(-10, 10, (n, 9))
    return rng.integers(-1, 2, (n, 9)).astype(float) * float(rng.integers(1, 11))


def mcg_oracle(trials: int, rng: np.random.Generator) -> None:
    cfg = motif_graph.McgaConfig(n_groups=1)
    convex = motif_graph.McgaConfig(n_groups=1, normalization="convex_votes")
    for _ in range(trials):
        seqs = random_group(rng)
        n = len(seqs)
        g = motif_graph.build_graph(seqs, cfg)
        w_ref, near_ref, _ = oracles.mcg_votes(seqs.tolist())
        assert int(sum(g.votes)) == n * g.denominator, "vote conservation"
        for got, want in zip(g.votes, w_ref):
            assert got * want.denominator == want.numerator * g.denominator, "exact weights"
        assert [list(x) for x in g.nearest] == near_ref, "nearest-neighbour sets"
        for c, total, div in ((cfg, 3 * n, 3 * n), (convex, None, n)):
            m = motif_graph.extract_motif(g, c, total_channels=total)
            ref = oracles.weighted_motif(seqs.tolist(), w_ref, div)
            assert np.max(np.abs(m - ref)) <= 1e-9, "motif vs oracle"


def series_motif(trials: int, rng: np.random.Generator) -> None:
    for _ in range(trials):
        n = int(rng.integers(12, 60))
        length = int(rng.integers(2, 8))
        t = rng.normal(size=n)
        got = motif_graph.series_motif_pair(t, length)
        want = oracles.series_motif(t.tolist(), length)
        assert got[:2] == want[:2] and math.isclose(got[2], want[2], abs_tol=1e-12), (
            f"1-D motif pair {got} vs {want}"
        )


def correlation_oracles(trials: int, rng: np.random.Generator) -> None:
    for _ in range(trials):
        groups = int(rng.choice([1, 2, 4]))
        c = groups * int(rng.integers(1, 16 // groups + 1))
        hw = int(rng.integers(2, 13))
        d = int(rng.integers(1, 9))
        fl = rng.normal(size=(c, hw, hw))
        fr = rng.normal(size=(c, hw, hw))
        ref = np.array(oracles.group_corr(fl.tolist(), fr.tolist(), d, groups))
        got = cost_volume.group_corr(fl, fr, d, groups)
        assert np.max(np.abs(got - ref)) <= 1e-6, "group_corr vs loop oracle"
        mc = cost_volume.motif_corr(fl, fr, d, groups, cost_volume.VolumeConv.identity())
        assert np.max(np.abs(mc - ref)) <= 1e-6, "motif_corr(identity) vs loop oracle"
        cc = rng.normal(size=ref.shape)
        comb = np.array(oracles.combine(ref.tolist(), cc.tolist()))
        assert np.max(np.abs(cost_volume.combine(got, cc) - comb)) <= 1e-6, "combine vs oracle"
        swap = cost_volume.group_corr(fr, fl, d, groups)
        assert np.array_equal(got[0], swap[0]), "swap symmetry at d=0"


def soft_argmin(trials: int, rng: np.random.Generator) -> None:
    for n_d in range(2, 2 + max(trials, 1)):
        d0 = cost_volume.init_disparity(np.zeros((n_d, 2, 2)))
        assert np.all(d0 == (n_d - 1) / 2), "uniform logits give the midpoint"
    hot = np.zeros((5, 1, 1))
    hot[2] = 100.0
    assert abs(cost_volume.init_disparity(hot)[0, 0] - 2.0) <= 1e-4, "one-hot limit"
    ex = np.array([0.0, math.log(2), 0.0]).reshape(3, 1, 1)
    assert abs(cost_volume.init_disparity(ex)[0, 0] - 1.0) <= 1e-6, "worked example"


def warp_sanity(trials: int, rng: np.random.Generator) -> None:
    h, w = 12, 40
    for delta in (1, 2, 4):
        cols = np.arange(-delta, w, dtype=float)
        f = np.sin(0.7 * cols) + 0.1 * cols
        i_r = np.broadcast_to(f[delta:], (3, h, w)).copy()
        i_l = np.broadcast_to(f[:w], (3, h, w)).copy()
        e = remp.recon_error(i_l, i_r, np.full((h, w), float(delta)))
        interior = np.abs(e.error[:, :, delta:])
        assert interior.mean() <= 1e-6, f"shifted pair error at delta={delta}"
        assert not e.valid[:, :delta].any() and e.valid[:, delta:].all(), "warp mask"


def loss_evaluator(trials: int, rng: np.random.Generator) -> None:
    gt = np.array([[5.0]])
    got = metrics.sequence_loss(gt, [gt + 1, gt], gt, 0.9)
    assert abs(got - 0.9) <= 1e-9, f"hand-evaluated loss {got}"
    for x, want in ((0.0, 0.0), (0.5, 0.125), (1.0, 0.5)):
        assert metrics.smooth_l1(x) == want, f"smooth_l1({x})"
    for _ in range(trials):
        n = int(rng.integers(1, 6))
        shape = (3, 4)
        gt = rng.uniform(0, 10, shape)
        d0 = gt + rng.normal(size=shape)
        preds = [gt + rng.normal(size=shape) for _ in range(n)]
        ref = oracles.sequence_loss(d0.ravel().tolist(), [p.ravel().tolist() for p in preds],
                                    gt.ravel().tolist(), 0.9)
        assert abs(metrics.sequence_loss(d0, preds, gt) - ref) <= 1e-9, "loss vs oracle"


SUITES: dict[str, tuple[Suite, float]] = {
    # name -> (suite, share of --trials)
    "wavelet_roundtrip": (wavelet_roundtrip, 1.0),
    "wavelet_energy": (wavelet_energy, 1.0),
    "mcg_oracle": (mcg_oracle, 1.0),
    "series_motif": (series_motif, 0.2),
    "correlation_oracles": (correlation_oracles, 0.5),
    "soft_argmin": (soft_argmin, 0.1),
    "warp_sanity": (warp_sanity, 0.0),
    "loss_evaluator": (loss_evaluator, 0.5),
}


def run_all(trials: int = 200, seed: int = 0) -> list[dict]:
    results = []
    for name, (suite, share) in SUITES.items():
        rng = np.random.default_rng([seed, len(results)])
        t0 = time.perf_counter()
        try:
            suite(max(1, int(trials * share)), rng)
            passed, detail = True, ""
        except AssertionError as exc:
            passed, detail = False, str(exc) or "assertion failed"
        except Exception as exc:  # a crash is a failure of that property
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append({"name": name, "passed": passed, "detail": detail,
                        "seconds": round(time.perf_counter() - t0, 3)})
    return results
