"""Rotation algebra, pixel warps, and ray z-factors."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import egorect as eg
from egorect.exceptions import AntipodalInput
from egorect.geometry import pixel_grid, ray_z_factors, warp_points

from conftest import random_units

K100 = eg.CameraIntrinsics(fx=100.0, fy=100.0, cx=160.0, cy=120.0, width=320, height=240)


def test_rotation_between_same_vector_is_identity():
    r = eg.rotation_between([0.0, 0.0, 1.0], [0.0, 0.0, 1.0])
    assert np.allclose(r, np.eye(3), atol=1e-12)


def test_rotation_between_quarter_turn_matrix():
    # closed form evaluated by hand for g = +z, target = +y
    r = eg.rotation_between([0.0, 0.0, 1.0], [0.0, 1.0, 0.0])
    expected = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
    assert np.allclose(r, expected, atol=1e-12)


def test_rotation_between_antipodal_raises():
    with pytest.raises(AntipodalInput):
        eg.rotation_between([0.0, 0.0, 1.0], [0.0, 0.0, -1.0])


def test_rotation_between_rejects_non_unit():
    with pytest.raises(ValueError):
        eg.rotation_between([0.0, 0.0, 2.0], [0.0, 1.0, 0.0])


def test_rotation_between_random_pairs_properties(rng):
    for _ in range(300):
        g, r_t = random_units(rng, 2)
        if 1.0 + g @ r_t <= 1e-6:
            continue
        r = eg.rotation_between(g, r_t)
        assert np.linalg.norm(r @ g - r_t) < 1e-9
        assert np.linalg.norm(r @ r.T - np.eye(3)) < 1e-9
        assert abs(np.linalg.det(r) - 1.0) < 1e-9
        # minimal rotation: axis is g x r_t, so that vector is fixed
        axis = np.cross(g, r_t)
        if np.linalg.norm(axis) > 1e-6:
            axis /= np.linalg.norm(axis)
            assert np.linalg.norm(r @ axis - axis) < 1e-9


def test_rotation_from_gravity_principal_delegates():
    g = np.array([0.0, 0.0, 1.0])
    e = np.array([0.0, 1.0, 0.0])
    assert np.array_equal(
        eg.rotation_from_gravity_principal(g, e), eg.rotation_between(g, e)
    )


def test_principal_direction_round_trip(rng):
    for _ in range(300):
        g, e = random_units(rng, 2)
        if 1.0 + g @ e <= 1e-6:
            continue
        r = eg.rotation_from_gravity_principal(g, e)
        assert np.linalg.norm(eg.principal_direction(r, g) - e) < 1e-9


def test_homography_identity():
    assert np.allclose(eg.homography_from_rotation(K100, np.eye(3)), np.eye(3))


def test_homography_is_rotation_for_identity_intrinsics():
    k = eg.CameraIntrinsics(fx=1.0, fy=1.0, cx=0.0, cy=0.0, width=2, height=2)
    r = eg.axis_angle_rotation([0.0, 1.0, 0.0], 0.3)
    assert np.allclose(eg.homography_from_rotation(k, r), r, atol=1e-12)


def test_homography_roll_fixes_principal_point():
    h = eg.homography_from_rotation(K100, eg.roll_rotation(90.0))
    p = h @ np.array([160.0, 120.0, 1.0])
    assert np.allclose(p[:2] / p[2], [160.0, 120.0], atol=1e-9)


def test_homography_composition(rng):
    for _ in range(50):
        r1 = Rotation.random(random_state=rng).as_matrix()
        r2 = Rotation.random(random_state=rng).as_matrix()
        h12 = eg.homography_from_rotation(K100, r1 @ r2)
        h1 = eg.homography_from_rotation(K100, r1)
        h2 = eg.homography_from_rotation(K100, r2)
        assert np.allclose(h12, h1 @ h2, atol=1e-9)


def test_warp_point_identity():
    assert np.allclose(eg.warp_point([160.0, 120.0], K100, np.eye(3)), [160.0, 120.0])


def test_warp_point_pitch_30_analytic():
    # principal ray pitched 30 degrees lands at cy - fy*tan(30)
    out = eg.warp_point([160.0, 120.0], K100, eg.pitch_rotation(30.0))
    assert out is not None
    assert np.allclose(out, [160.0, 120.0 - 100.0 * np.tan(np.deg2rad(30.0))], atol=1e-9)


def test_warp_point_backward_ray_invalid():
    assert eg.warp_point([160.0, 120.0], K100, eg.pitch_rotation(90.0)) is None


def test_warp_point_round_trip(rng):
    for _ in range(200):
        r = Rotation.from_rotvec(rng.uniform(-0.4, 0.4, size=3)).as_matrix()
        x = rng.uniform([0.0, 0.0], [319.0, 239.0])
        y = eg.warp_point(x, K100, r)
        if y is None:
            continue
        back = eg.warp_point(np.asarray(y), K100, r.T)
        if back is None:
            continue
        assert np.linalg.norm(np.asarray(back) - x) < 1e-6


def test_warp_points_matches_scalar(rng):
    r = eg.pitch_rotation(25.0)
    uv = rng.uniform([0.0, 0.0], [319.0, 239.0], size=(100, 2))
    out, ok = warp_points(uv, K100, r)
    for i in range(100):
        single = eg.warp_point(uv[i], K100, r)
        if single is None:
            assert not ok[i]
        else:
            assert ok[i]
            assert np.allclose(out[i], single, atol=1e-12)


def test_ray_z_factor_identity_exact():
    for x in ([0.0, 0.0], [160.0, 120.0], [319.0, 239.0]):
        assert eg.ray_z_factor(x, K100, np.eye(3)) == 1.0


def test_ray_z_factor_pitch_and_roll():
    pp = [160.0, 120.0]
    assert abs(eg.ray_z_factor(pp, K100, eg.pitch_rotation(30.0)) - np.cos(np.deg2rad(30.0))) < 1e-12
    assert abs(eg.ray_z_factor(pp, K100, eg.roll_rotation(73.0)) - 1.0) < 1e-12


def test_ray_z_factors_matches_scalar(rng):
    r = eg.pitch_rotation(40.0)
    uv = rng.uniform([0.0, 0.0], [319.0, 239.0], size=(50, 2))
    fs = ray_z_factors(uv, K100, r)
    for i in range(50):
        assert abs(fs[i] - eg.ray_z_factor(uv[i], K100, r)) < 1e-12


def test_axis_angle_rotation_matches_scipy(rng):
    for _ in range(100):
        axis = random_units(rng, 1)[0]
        angle = rng.uniform(-np.pi, np.pi)
        expected = Rotation.from_rotvec(axis * angle).as_matrix()
        assert np.allclose(eg.axis_angle_rotation(axis, angle), expected, atol=1e-12)


def test_pitch_and_roll_conventions():
    # pitching down maps the world down-vector toward the optical axis
    assert np.allclose(eg.pitch_rotation(90.0) @ [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], atol=1e-9)
    s, c = np.sin(np.deg2rad(40.0)), np.cos(np.deg2rad(40.0))
    assert np.allclose(eg.roll_rotation(40.0) @ [0.0, 1.0, 0.0], [-s, c, 0.0], atol=1e-12)


def test_geodesic_angle(rng):
    assert eg.geodesic_angle(np.eye(3), np.eye(3)) == 0.0
    for _ in range(50):
        axis = random_units(rng, 1)[0]
        ang = rng.uniform(0.0, np.pi * 0.99)
        r = eg.axis_angle_rotation(axis, ang)
        assert abs(eg.geodesic_angle(np.eye(3), r) - ang) < 1e-7


def test_pixel_grid_layout(k_std):
    grid = pixel_grid(k_std)
    assert grid.shape == (240 * 320, 2)
    assert np.array_equal(grid[0], [0.0, 0.0])
    assert np.array_equal(grid[1], [1.0, 0.0])
    assert np.array_equal(grid[320], [0.0, 1.0])


def test_intrinsics_matrix_inverse(k_std):
    assert np.allclose(k_std.matrix() @ k_std.inverse_matrix(), np.eye(3), atol=1e-12)
