import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from xviewbev.guidance import FootprintMask, build_alpha_grid, contains
from xviewbev.panorama import PanoramaDepth, PointCloud, compute_angle_grid, depth_to_points
from xviewbev.reprojection import (
    MissingGuidanceError,
    Mode,
    ReprojectionConfig,
    offset_direction,
    offset_magnitude,
    reproject,
)


def cloud_from(east, north, depth, up=None):
    east = np.asarray(east, dtype=float)
    n = east.size
    return PointCloud(
        east, np.zeros(n) if up is None else np.asarray(up, float), -np.asarray(north, float),
        np.arange(n, dtype=np.int64), np.zeros(n, dtype=np.int64), np.asarray(depth, float),
        None, (max(n, 1), 1),
    )


def test_magnitude_branches():
    assert offset_magnitude(8.0, 10.0, 15.0) == 0.0
    assert offset_magnitude(10.0, 10.0, 15.0) == 0.0
    assert offset_magnitude(10.0 + math.e - 1.0, 10.0, 15.0) == pytest.approx(15.0, abs=1e-12)


@pytest.mark.parametrize("d", [0.0, -1.0, float("nan")])
def test_magnitude_rejects_nonpositive_depth(d):
    with pytest.raises(ValueError):
        offset_magnitude(d, 10.0, 1.0)


def test_direction():
    assert offset_direction(3.0, 4.0, 0.0, 0.0) == pytest.approx((0.6, 0.8))
    assert offset_direction(0.0, 0.0, 0.0, 0.0) == (0.0, 0.0)
    assert offset_direction(-2.0, 0.0) == (-1.0, 0.0)
    assert offset_direction(5.0, 5.0, 5.0, 5.0) == (0.0, 0.0)


def test_mode_none_is_identity(rng):
    c = cloud_from(rng.normal(size=20), rng.normal(size=20), rng.uniform(1, 40, 20))
    assert reproject(c, ReprojectionConfig(mode=Mode.NONE)) is c


@pytest.mark.parametrize("mode", [Mode.SGR, Mode.DGR, Mode.NONE])
def test_point_at_d0_is_unchanged(mode):
    c = cloud_from([3.0], [4.0], [10.0])
    fp = FootprintMask(np.ones((64, 64)), 1.0)
    out = reproject(c, ReprojectionConfig(mode=mode), build_alpha_grid(fp), fp)
    assert out.x.tolist() == [3.0] and out.z.tolist() == [-4.0]


def test_dgr_worked_example():
    d = 10.0 + math.e - 1.0
    c = cloud_from([6.0], [8.0], [d], up=[1.5])
    out = reproject(c, ReprojectionConfig(mode=Mode.DGR, d0=10.0, fixed_alpha=5.0))
    # independent scalar composition: |(6, 8)| = 10, shift ln(e) * 5 = 5 along (0.6, 0.8)
    shift = math.log(1.0 + d - 10.0) * 5.0
    assert out.east[0] == pytest.approx(6.0 + shift * 0.6, abs=1e-12)
    assert out.north[0] == pytest.approx(8.0 + shift * 0.8, abs=1e-12)
    assert (out.east[0], out.north[0]) == pytest.approx((9.0, 12.0), abs=1e-12)
    assert out.y[0] == 1.5


def test_sgr_requires_guidance():
    c = cloud_from([1.0], [1.0], [20.0])
    with pytest.raises(MissingGuidanceError):
        reproject(c, ReprojectionConfig(mode=Mode.SGR))


def test_dgr_ignores_guidance_and_does_not_clip():
    c = cloud_from([0.0], [20.0], [30.0])
    fp = FootprintMask(np.zeros((16, 16)), 1.0)
    out = reproject(c, ReprojectionConfig(mode="dgr", fixed_alpha=5.0), build_alpha_grid(fp), fp)
    assert len(out) == 1
    assert out.north[0] == pytest.approx(20.0 + 5.0 * math.log(21.0))


def test_zero_guidance_is_identity(rng):
    c = cloud_from(rng.uniform(-30, 30, 500), rng.uniform(-30, 30, 500), rng.uniform(0.5, 60, 500))
    fp = FootprintMask(np.zeros((256, 256)), 70 / 256)
    out = reproject(c, ReprojectionConfig(), build_alpha_grid(fp), fp)
    assert len(out) == len(c)
    assert out.x.tobytes() == c.x.tobytes() and out.z.tobytes() == c.z.tobytes()


def _random_scene(rng):
    h, w = 32, 64
    depth = PanoramaDepth(rng.uniform(1.0, 40.0, (h, w)))
    cloud = depth_to_points(depth, compute_angle_grid(h, w))
    mask = (rng.random((64, 64)) < 0.4).astype(np.uint8)
    fp = FootprintMask(mask, 1.0)
    return cloud, fp


def test_radial_monotonicity_and_clipping_soundness(rng):
    for _ in range(5):
        cloud, fp = _random_scene(rng)
        out = reproject(cloud, ReprojectionConfig(), build_alpha_grid(fp, 20), fp)
        index = {(r, c): k for k, (r, c) in enumerate(zip(cloud.src_row, cloud.src_col))}
        k = np.array([index[(r, c)] for r, c in zip(out.src_row, out.src_col)])
        before = np.hypot(cloud.east[k], cloud.north[k])
        after = np.hypot(out.east, out.north)
        assert np.all(after >= before - 1e-12)
        moved = (out.east != cloud.east[k]) | (out.north != cloud.north[k])
        assert np.all(contains(fp, out.east[moved], out.north[moved]))
        # input order is preserved
        assert np.all(np.diff(k) > 0)


def test_unshifted_points_never_clipped():
    # a road point inside d0 over a bare tile survives SGR clipping
    fp = FootprintMask(np.zeros((64, 64)), 1.0)
    out = reproject(cloud_from([2.0], [2.0], [5.0]), ReprojectionConfig(), build_alpha_grid(fp), fp)
    assert len(out) == 1


@given(st.floats(10.01, 200), st.floats(0.01, 100), st.floats(0.1, 40))
def test_facade_ordering(d1, gap, alpha):
    d2 = d1 + gap
    assert offset_magnitude(d1, 10.0, alpha) < offset_magnitude(d2, 10.0, alpha)


def test_log_damping_is_concave():
    d = np.linspace(10.0, 120.0, 2001)
    delta = offset_magnitude(d, 10.0, 25.0)
    second = delta[2:] - 2 * delta[1:-1] + delta[:-2]
    assert np.all(second <= 1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        ReprojectionConfig(d0=-1.0)
    with pytest.raises(ValueError):
        ReprojectionConfig(fixed_alpha=-1.0)
    with pytest.raises(ValueError):
        ReprojectionConfig(mode="bogus")
    assert ReprojectionConfig().clips
    assert not ReprojectionConfig(mode="dgr").clips
