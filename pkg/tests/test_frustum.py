import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skinkit.frustum import SENTINEL, FrustumModel, project_frame, project_zone

# closed form for the corner zone centre: atan(7/8 * tan(32.5 deg))
CORNER_ZONE_DEG = 29.13689006585194


def test_corner_zone_matches_closed_form():
    m = FrustumModel()
    ang = m.off_axis_deg()
    assert ang[0, 0] == pytest.approx(CORNER_ZONE_DEG, abs=1e-9)
    assert ang.max() == pytest.approx(CORNER_ZONE_DEG, abs=1e-9)
    assert np.all(ang < 32.5)


def test_image_corner_is_half_fov():
    w = FrustumModel().half_extent
    assert math.degrees(math.atan(math.hypot(w, w))) == pytest.approx(32.5, abs=1e-12)


def test_zone_00_direction_frozen():
    d = FrustumModel().zone_direction(0, 0).direction
    assert d == pytest.approx([-0.34428878, -0.34428878, 0.87345891], abs=1e-8)


def test_axes_follow_row_and_col():
    d = FrustumModel().directions
    # columns advance along +x, rows along +y
    assert np.all(np.diff(d[..., 0], axis=1) > 0)
    assert np.all(np.diff(d[..., 1], axis=0) > 0)


def test_symmetry_is_bit_exact():
    d = FrustumModel().directions
    assert np.array_equal(d[:, ::-1, 0], -d[..., 0])
    assert np.array_equal(d[::-1, :, 1], -d[..., 1])
    assert np.array_equal(d[:, ::-1, 2], d[..., 2])
    assert np.array_equal(d[::-1, :, 2], d[..., 2])
    # square grid: transpose swaps x and y
    assert np.array_equal(d.transpose(1, 0, 2)[..., 0], d[..., 1])


def test_directions_are_unit_and_read_only():
    d = FrustumModel().directions
    assert np.allclose(np.linalg.norm(d, axis=-1), 1.0, atol=1e-15)
    with pytest.raises(ValueError):
        d[0, 0, 0] = 1.0


@settings(max_examples=60, deadline=None)
@given(fov=st.floats(1.0, 170.0), rows=st.integers(1, 16), cols=st.integers(1, 16))
def test_all_zones_inside_half_fov(fov, rows, cols):
    ang = FrustumModel(fov, rows, cols).off_axis_deg()
    assert np.all(ang < fov / 2)


def test_validation():
    for bad in [dict(fov_diag=0), dict(fov_diag=180), dict(rows=0), dict(max_range=0.0),
                dict(min_range=5.0)]:
        with pytest.raises(ValueError):
            FrustumModel(**bad)
    with pytest.raises(IndexError):
        FrustumModel().zone_direction(8, 0)


def test_project_zone_radial():
    ray = FrustumModel().zone_direction(3, 4)
    p = project_zone(ray, 1234)
    assert np.linalg.norm(p) == pytest.approx(1.234)
    assert project_zone(ray, SENTINEL) is None


def test_project_frame_masks_sentinel_and_range():
    m = FrustumModel(max_range=4.0, min_range=0.1)
    r = np.full(64, 500)
    r[0] = SENTINEL
    r[1] = 4001   # past max range
    r[2] = 50     # below min range
    r[3] = 4000
    pts, mask = project_frame(m, r)
    assert mask.sum() == 61 and not mask.ravel()[:3].any()
    assert len(pts) == 61
    assert np.linalg.norm(pts, axis=1) == pytest.approx([4.0] + [0.5] * 60)
