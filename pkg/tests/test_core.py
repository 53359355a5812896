import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mocha.core import (
    DimensionError,
    DisparityMap,
    FormatError,
    SeededGenerator,
    derive_seed,
    hadamard,
    he_uniform,
    parallel_map,
    seeded_normal,
    seeded_uniform,
    splitmix64,
)

MASK = (1 << 64) - 1


def splitmix_reference(seed, count):
    """Sequential textbook SplitMix64 in plain Python integers."""
    state, out = seed, []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


def test_splitmix_first_draw_seed_zero():
    assert int(splitmix64(0, 0, 1)[0]) == 0xE220A8397B1DCDAF


@pytest.mark.parametrize("seed", [0, 1, 7, 2**63 + 5, MASK])
def test_splitmix_matches_sequential_reference(seed):
    got = [int(v) for v in splitmix64(seed, 0, 50)]
    assert got == splitmix_reference(seed, 50)


def test_stream_positions_are_counter_based():
    full = splitmix64(9, 0, 20)
    assert np.array_equal(splitmix64(9, 5, 15), full[5:])
    gen = SeededGenerator(9)
    a = seeded_uniform(gen, 20)
    assert np.array_equal(seeded_uniform(gen.advance(5), 15), a[5:])


def test_hadamard_examples():
    assert np.array_equal(hadamard(np.ones((2, 2, 2)), np.ones((2, 2))), np.ones((2, 2, 2)))
    a = np.ones((2, 2, 2))
    a[0, 0, 0] = 3
    b = np.ones((2, 2))
    b[0, 0] = 0
    assert hadamard(a, b)[0, 0, 0] == 0
    assert np.array_equal(hadamard(2 * np.ones((2, 3, 4)), 0.5 * np.ones((2, 3, 4))), np.ones((2, 3, 4)))


def test_hadamard_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3, 4\).*\(3, 3\)"):
        hadamard(np.ones((2, 3, 4)), np.ones((3, 3)))


@given(st.integers(0, 2**32), st.integers(1, 4), st.integers(1, 5), st.integers(1, 5))
def test_hadamard_commutative_associative_identity(seed, c, h, w):
    r = np.random.default_rng(seed)
    a, b, d = (r.normal(size=(c, h, w)) for _ in range(3))
    assert np.array_equal(hadamard(a, b), hadamard(b, a))
    assert np.allclose(hadamard(hadamard(a, b), d), hadamard(a, hadamard(b, d)), rtol=1e-15, atol=0)
    assert np.array_equal(hadamard(a, np.ones((h, w))), a)


def test_seeded_normal_determinism_and_seed_sensitivity():
    a = seeded_normal(SeededGenerator(7), (3, 4, 5), 1.0)
    assert np.array_equal(a, seeded_normal(SeededGenerator(7), (3, 4, 5), 1.0))
    assert not np.array_equal(a, seeded_normal(SeededGenerator(8), (3, 4, 5), 1.0))


@pytest.mark.parametrize("scale", [0.0, -1.0])
def test_seeded_normal_rejects_nonpositive_scale(scale):
    with pytest.raises(ValueError):
        seeded_normal(SeededGenerator(7), (2, 2), scale)


def test_seeded_normal_empty_and_moments():
    assert seeded_normal(SeededGenerator(1), (0, 3), 2.0).shape == (0, 3)
    z = seeded_normal(SeededGenerator(3), 200_000, 2.5)
    assert abs(z.mean()) < 0.03 and abs(z.std() - 2.5) < 0.03


def test_uniform_range_and_he_bound():
    u = seeded_uniform(SeededGenerator(5), 10_000)
    assert u.min() >= 0 and u.max() < 1
    w = he_uniform(SeededGenerator(5), 10_000, fan_in=24)
    assert np.abs(w).max() <= np.sqrt(6 / 24)


def test_child_seeds_are_distinct_and_stable():
    assert derive_seed(1, "a") == derive_seed(1, "a")
    assert len({derive_seed(1, t) for t in ("a", "b", "c", "enc.0")}) == 4
    assert SeededGenerator(1).child("x") == SeededGenerator(1).child("x")


def test_parallel_map_preserves_order():
    assert parallel_map(lambda v: v * v, range(50), threads=4) == [v * v for v in range(50)]


def test_disparity_map_mask_and_shape():
    d = DisparityMap(np.array([[1.0, np.nan], [np.inf, 2.0]]))
    assert d.valid.tolist() == [[True, False], [False, True]]
    assert d.shape == (2, 2)
    with pytest.raises(DimensionError):
        DisparityMap(np.zeros(3))
    with pytest.raises(DimensionError):
        DisparityMap(np.zeros((2, 2)), np.ones((3, 3), bool))


def test_format_error_carries_offset():
    e = FormatError("bad", 17)
    assert e.offset == 17 and "17" in str(e)
