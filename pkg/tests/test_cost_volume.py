import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mocha import oracles
from mocha.core import ConfigError, DimensionError, FormatError, NumericError
from mocha.cost_volume import (
    VolumeConv,
    combine,
    corr_lookup,
    group_corr,
    init_disparity,
    motif_corr,
    scale4_disparities,
    volume_from_bytes,
    volume_to_bytes,
)

GOLDEN = Path(__file__).parent / "golden"


def test_ones_give_one_at_zero_disparity():
    f = np.ones((8, 4, 5))
    v = group_corr(f, f, 3, 2)
    assert np.all(v[0] == 1.0)
    assert np.all(motif_corr(f, f, 3, 2, VolumeConv.identity())[0] == 1.0)


def test_out_of_frame_is_zero(rng):
    f = rng.normal(size=(4, 3, 5))
    v = group_corr(f, f, 7, 1)
    assert np.all(v[2, :, :2] == 0) and np.all(v[6] == 0)
    assert np.all(group_corr(f, f, 3, 1, sign=+1)[2, :, 3:] == 0)


@given(st.integers(0, 2**32))
def test_matches_loop_oracle(seed):
    r = np.random.default_rng(seed)
    groups = int(r.choice([1, 2, 4]))
    c = groups * int(r.integers(1, 16 // groups + 1))
    hw, d = int(r.integers(2, 13)), int(r.integers(1, 9))
    sign = int(r.choice([-1, 1]))
    fl, fr = r.normal(size=(2, c, hw, hw))
    ref = np.array(oracles.group_corr(fl.tolist(), fr.tolist(), d, groups, sign))
    assert np.max(np.abs(group_corr(fl, fr, d, groups, sign) - ref)) <= 1e-6
    got = motif_corr(fl, fr, d, groups, VolumeConv.identity(), sign)
    assert np.array_equal(got, group_corr(fl, fr, d, groups, sign))


def test_full_size_oracle(rng):
    fl, fr = rng.normal(size=(2, 16, 12, 12))
    ref = np.array(oracles.group_corr(fl.tolist(), fr.tolist(), 8, 4))
    assert np.max(np.abs(group_corr(fl, fr, 8, 4) - ref)) <= 1e-6


@given(st.integers(0, 2**32), st.floats(-3, 3), st.floats(-3, 3))
def test_linear_in_left_features(seed, a, b):
    r = np.random.default_rng(seed)
    x, y, fr = r.normal(size=(3, 8, 6, 7))
    lhs = group_corr(a * x + b * y, fr, 4, 2)
    rhs = a * group_corr(x, fr, 4, 2) + b * group_corr(y, fr, 4, 2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-5


def test_swap_symmetry_at_zero(rng):
    fl, fr = rng.normal(size=(2, 12, 7, 9))
    assert np.array_equal(group_corr(fl, fr, 3, 3)[0], group_corr(fr, fl, 3, 3)[0])


def test_errors(rng):
    f = rng.normal(size=(6, 4, 4))
    with pytest.raises(ConfigError):
        group_corr(f, f, 2, 4)
    with pytest.raises(DimensionError):
        group_corr(f, f[:, :3], 2, 2)
    with pytest.raises(DimensionError):
        combine(np.zeros((2, 3, 3, 2)), np.zeros((2, 3, 3, 1)))


def test_seeded_motif_corr_golden():
    g = np.load(GOLDEN / "motif_corr_seeded.npz")
    conv = VolumeConv.seeded(int(g["seed"]), "golden")
    got = motif_corr(g["f_l"], g["f_r"], int(g["max_disp"]), int(g["groups"]), conv)
    assert np.max(np.abs(got - g["volume"])) <= 1e-6


def test_seeded_conv_is_deterministic():
    a, b = VolumeConv.seeded(5, "x"), VolumeConv.seeded(5, "x")
    assert np.array_equal(a.kernel, b.kernel) and a.bias == b.bias
    assert not np.array_equal(a.kernel, VolumeConv.seeded(6, "x").kernel)


def test_combine_examples(rng):
    assert np.all(combine(np.ones((2, 3, 3, 8)), np.full((2, 3, 3, 8), 0.5)) == 4.0)
    cg = rng.normal(size=(3, 4, 4, 2))
    assert np.all(combine(cg, np.zeros_like(cg)) == 0)
    c1, c2 = rng.normal(size=(2, 3, 4, 4, 1))
    assert np.allclose(combine(c1, c2), (c1 * c2)[..., 0], rtol=0, atol=0)
    ref = np.array(oracles.combine(cg.tolist(), (2 * cg).tolist()))
    assert np.max(np.abs(combine(cg, 2 * cg) - ref)) <= 1e-12


@pytest.mark.parametrize("n_d", [2, 3, 4, 5, 48, 191])
def test_uniform_logits_midpoint(n_d):
    assert np.all(init_disparity(np.zeros((n_d, 3, 2))) == (n_d - 1) / 2)


def test_one_hot_and_worked_example():
    hot = np.zeros((5, 2, 2))
    hot[2] = 100.0
    assert np.max(np.abs(init_disparity(hot) - 2.0)) <= 1e-4
    ex = np.array([0.0, math.log(2), 0.0]).reshape(3, 1, 1)
    assert abs(init_disparity(ex)[0, 0] - 1.0) <= 1e-6


@given(st.integers(0, 2**32))
def test_soft_argmin_range_and_monotone_transfer(seed):
    r = np.random.default_rng(seed)
    logits = r.normal(scale=3, size=(3, 4, 4))
    d0 = init_disparity(logits)
    assert np.all(d0 > 0) and np.all(d0 < 2)
    for target in range(3):
        raised = logits.copy()
        raised[target] += r.uniform(0.1, 5)
        assert np.all(np.abs(init_disparity(raised) - target) <= np.abs(d0 - target) + 1e-12)


def test_init_disparity_errors():
    with pytest.raises(DimensionError):
        init_disparity(np.zeros((1, 2, 2)))
    bad = np.zeros((3, 2, 2))
    bad[1, 0, 0] = np.nan
    with pytest.raises(NumericError):
        init_disparity(bad)


def test_corr_lookup(rng):
    vol = rng.normal(size=(6, 3, 4))
    at = np.full((3, 4), 2.0)
    assert np.array_equal(corr_lookup(vol, at, 0)[0], vol[2])
    half = corr_lookup(vol, np.full((3, 4), 0.5), 0)[0]
    assert np.allclose(half, (vol[0] + vol[1]) / 2, atol=1e-15)
    assert np.array_equal(corr_lookup(vol, np.full((3, 4), -3.0), 0)[0], vol[0])
    win = corr_lookup(vol, at, 2)
    assert win.shape == (5, 3, 4)
    assert np.array_equal(win[4], vol[4]) and np.array_equal(win[0], vol[0])
    assert np.array_equal(corr_lookup(vol, np.full((3, 4), 5.0), 1)[2], vol[5])
    with pytest.raises(ConfigError):
        corr_lookup(vol, at, -1)


def test_scale4_disparities():
    assert scale4_disparities(192) == 48 and scale4_disparities(33) == 9


def test_volume_dump_roundtrip(rng):
    vol = rng.normal(size=(3, 4, 5, 2)).astype(np.float32)
    buf = volume_to_bytes(vol, flags=7)
    assert len(buf) == 32 + 4 * vol.size
    back, flags = volume_from_bytes(buf)
    assert flags == 7 and np.array_equal(back, vol)
    comb, _ = volume_from_bytes(volume_to_bytes(vol[..., 0]))
    assert comb.shape == (3, 4, 5)
    with pytest.raises(FormatError):
        volume_from_bytes(b"NOPE" + buf[4:])
    with pytest.raises(FormatError):
        volume_from_bytes(buf[:-4])
