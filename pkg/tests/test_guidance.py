import numpy as np
import pytest
from hypothesis import given, strategies as st

from xviewbev.guidance import (
    FootprintMask,
    alpha_from_ratio,
    alpha_lookup,
    block_ratio_grid,
    build_alpha_grid,
    contains,
    round_half_away,
)


def brute_block_ratios(mask):
    """Count pixels per block by walking every pixel; block of index k along an
    axis of length n covers sizes n//3 (+1 for the first n%3 blocks)."""
    h, w = mask.shape

    def owner(n):
        sizes = [n // 3 + (1 if k < n % 3 else 0) for k in range(3)]
        out = []
        for k, size in enumerate(sizes):
            out += [k] * size
        return out

    rows, cols = owner(h), owner(w)
    hits = np.zeros((3, 3))
    totals = np.zeros((3, 3))
    for r in range(h):
        for c in range(w):
            totals[rows[r], cols[c]] += 1
            hits[rows[r], cols[c]] += mask[r, c]
    return np.divide(hits, totals, out=np.zeros((3, 3)), where=totals > 0), totals


def test_all_zero_and_all_one():
    rho, _, _ = block_ratio_grid(FootprintMask(np.zeros((9, 9)), 1.0))
    assert np.all(rho == 0)
    rho, _, _ = block_ratio_grid(FootprintMask(np.ones((9, 9)), 1.0))
    assert np.all(rho == 1)


def test_left_half_256():
    mask = np.zeros((256, 256), dtype=np.uint8)
    mask[:, :128] = 1
    rho, _, _ = block_ratio_grid(FootprintMask(mask, 70 / 256))
    expected, _ = brute_block_ratios(mask)
    np.testing.assert_array_equal(rho, expected)
    # 256 = 86 + 85 + 85: the left column is fully built, the middle one 42/85
    np.testing.assert_array_equal(rho[:, 0], [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(rho[:, 1], [42 / 85] * 3)
    np.testing.assert_array_equal(rho[:, 2], [0.0] * 3)


@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_partition_matches_brute_force(h, w, seed):
    mask = np.random.default_rng(seed).integers(0, 2, size=(h, w))
    rho, row_edges, col_edges = block_ratio_grid(FootprintMask(mask, 1.0))
    expected, totals = brute_block_ratios(mask)
    np.testing.assert_allclose(rho, expected, rtol=0, atol=1e-15)
    assert totals.sum() == h * w
    assert row_edges[0] == 0 and row_edges[-1] == h
    assert col_edges[0] == 0 and col_edges[-1] == w


@pytest.mark.parametrize("rho,expected", [(0.1, 0.0), (0.5, 15.0), (1.0, 25.0), (0.0, 0.0)])
def test_alpha_values(rho, expected):
    assert alpha_from_ratio(rho, 20) == expected


def test_alpha_jump_location():
    just_above = np.nextafter(0.1, 1.0)
    assert alpha_from_ratio(just_above, 20) == pytest.approx(7.0)
    assert alpha_from_ratio(0.1, 20) == 0.0


@pytest.mark.parametrize("rho", [-0.01, 1.01, float("nan")])
def test_alpha_rejects_out_of_range(rho):
    with pytest.raises(ValueError):
        alpha_from_ratio(rho, 20)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 50))
def test_alpha_monotone_in_rho(a, b, t):
    lo, hi = sorted((a, b))
    assert alpha_from_ratio(lo, t) <= alpha_from_ratio(hi, t)


@given(st.floats(0.1, 1, exclude_min=True), st.floats(0, 50), st.floats(0, 50))
def test_alpha_monotone_in_t(rho, t1, t2):
    lo, hi = sorted((t1, t2))
    assert alpha_from_ratio(rho, lo) <= alpha_from_ratio(rho, hi)


def test_lookup_center_of_empty_mask():
    grid = build_alpha_grid(FootprintMask(np.zeros((30, 30)), 1.0))
    assert alpha_lookup(grid, 0.0, 0.0) == 0.0


def test_lookup_full_block_and_clamping():
    mask = np.zeros((30, 30), dtype=np.uint8)
    mask[:10, 20:] = 1  # north-east block fully built
    grid = build_alpha_grid(FootprintMask(mask, 1.0), 20)
    assert grid.rho[0, 2] == 1.0
    assert alpha_lookup(grid, 10.0, 10.0) == 25.0
    # ten tiles away to the north-east clamps onto the same corner block
    assert alpha_lookup(grid, 300.0, 300.0) == 25.0
    assert alpha_lookup(grid, -300.0, -300.0) == 0.0


def test_lookup_vectorized_matches_scalar(rng):
    mask = rng.integers(0, 2, size=(31, 29))
    grid = build_alpha_grid(FootprintMask(mask, 0.7), 20)
    e = rng.uniform(-30, 30, 200)
    n = rng.uniform(-30, 30, 200)
    vec = alpha_lookup(grid, e, n)
    assert [alpha_lookup(grid, a, b) for a, b in zip(e, n)] == vec.tolist()


def test_contains_simple():
    assert contains(FootprintMask(np.ones((5, 5)), 1.0), 0.0, 0.0)
    zero = FootprintMask(np.zeros((5, 5)), 1.0)
    assert not contains(zero, 0.0, 0.0)
    assert not np.any(contains(zero, np.linspace(-3, 3, 50), np.linspace(3, -3, 50)))
    assert not contains(FootprintMask(np.ones((5, 5)), 1.0), 100.0, 0.0)


def test_round_half_away():
    np.testing.assert_array_equal(round_half_away([0.5, 1.5, 2.5, -0.5, -1.5, 0.49]), [1, 2, 3, -1, -2, 0])


def brute_contains(mask, cx, cy, gsd, east, north):
    """Scan every candidate pixel; the nearest centre wins, equal distances go
    to the pixel farther from zero."""
    x = cx + east / gsd
    y = cy - north / gsd

    def nearest(v, n):
        best = None
        for k in range(-3, n + 3):
            key = (abs(v - k), -abs(k))
            if best is None or key < best[0]:
                best = (key, k)
        return best[1]

    r, c = nearest(y, mask.shape[0]), nearest(x, mask.shape[1])
    if 0 <= r < mask.shape[0] and 0 <= c < mask.shape[1]:
        return bool(mask[r, c])
    return False


def test_contains_boundaries_match_brute_force(rng):
    mask = rng.integers(0, 2, size=(16, 16)).astype(np.uint8)
    # gsd 0.5 keeps half-pixel coordinates exact in binary floating point
    fp = FootprintMask(mask, 0.5)
    cx, cy = fp.center
    xs = np.arange(-1.5, 17.0, 0.5)
    ee, nn = [], []
    for x in xs:
        for y in xs:
            ee.append((x - cx) * 0.5)
            nn.append((cy - y) * 0.5)
    ee, nn = np.array(ee), np.array(nn)
    got = contains(fp, ee, nn)
    expected = [brute_contains(mask, cx, cy, 0.5, a, b) for a, b in zip(ee, nn)]
    assert got.tolist() == expected


def test_contains_random_points_match_brute_force(rng):
    for _ in range(5):
        mask = rng.integers(0, 2, size=(16, 16)).astype(np.uint8)
        center = tuple(rng.uniform(0, 15, 2))
        fp = FootprintMask(mask, 0.75, center)
        e = rng.uniform(-15, 15, 300)
        n = rng.uniform(-15, 15, 300)
        expected = [brute_contains(mask, *center, 0.75, a, b) for a, b in zip(e, n)]
        assert contains(fp, e, n).tolist() == expected


def test_mask_validation():
    with pytest.raises(ValueError):
        FootprintMask(np.zeros((0, 4)), 1.0)
    with pytest.raises(ValueError):
        FootprintMask(np.zeros((4, 4)), 0.0)
    with pytest.raises(ValueError):
        FootprintMask(np.zeros((4, 4)), 1.0, (10.0, 1.0))
    fp = FootprintMask(np.array([[0, 255], [7, 0]]), 1.0)
    assert fp.mask.tolist() == [[0, 1], [1, 0]]
