import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ckmloc.geometry import (
    SPEED_OF_LIGHT,
    GeometryError,
    Ray,
    forward_path,
    ray_point,
    scatterer_from_path,
    wrap_angle,
)

C = SPEED_OF_LIGHT


def test_forward_path_isoceles():
    p = forward_path((0, 0), (10, 0), (5, 5))
    assert p.aoa == pytest.approx(math.pi / 4, abs=1e-15)
    assert p.toa == pytest.approx(2 * math.sqrt(50) / C, rel=1e-15)


def test_forward_path_collinear():
    p = forward_path((0, 0), (10, 0), (5, 0))
    assert p.aoa == 0.0
    assert p.toa == pytest.approx(10 / C, rel=1e-15)


def test_forward_path_345():
    p = forward_path((0, 0), (60, 0), (30, 40))
    assert p.aoa == pytest.approx(math.atan2(40, 30), abs=1e-15)
    # 50 m to the BS and 50 m to the UE
    assert p.toa == pytest.approx(100 / C, rel=1e-15)


def test_forward_path_rejects_scatterer_at_bs():
    with pytest.raises(GeometryError):
        forward_path((1, 2), (10, 0), (1, 2))


def test_scatterer_inverts_isoceles():
    s = scatterer_from_path((0, 0), (10, 0), math.pi / 4, 2 * math.sqrt(50) / C)
    np.testing.assert_allclose(s, [5, 5], atol=1e-9)


def test_collinear_delay_is_degenerate():
    # c*toa equals the BS-UE distance: every point of the segment fits, so the
    # inversion refuses instead of picking one
    with pytest.raises(GeometryError):
        scatterer_from_path((0, 0), (10, 0), 0.0, 10 / C)


@pytest.mark.parametrize("toa", [5 / C, 9.999 / C])
def test_infeasible_delay(toa):
    with pytest.raises(GeometryError, match="infeasible"):
        scatterer_from_path((0, 0), (10, 0), 0.3, toa)


def test_roundtrip_random_triples():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        bs, ue, s = rng.uniform(-100, 100, (3, 2))
        p = forward_path(bs, ue, s)
        est = scatterer_from_path(bs, ue, p.aoa, p.toa)
        worst = max(worst, float(np.linalg.norm(est - s)))
    assert worst < 1e-6


@settings(max_examples=200, deadline=None)
@given(
    st.tuples(*[st.floats(-80, 80, allow_nan=False) for _ in range(6)]),
)
def test_inversion_satisfies_both_constraints(coords):
    bs, ue, s = np.reshape(coords, (3, 2))
    if np.linalg.norm(s - bs) < 1e-2 or np.linalg.norm(ue - s) < 1e-2:
        return
    p = forward_path(bs, ue, s)
    try:
        est = scatterer_from_path(bs, ue, p.aoa, p.toa)
    except GeometryError:
        # only near-collinear geometries may be rejected
        u = np.array([math.cos(p.aoa), math.sin(p.aoa)])
        r = ue - bs
        assert C * p.toa - r @ u < 1e-6 * C * p.toa
        return
    length = np.linalg.norm(ue - est) + np.linalg.norm(est - bs)
    assert length == pytest.approx(C * p.toa, rel=1e-9)
    d = (est - bs) @ np.array([math.cos(p.aoa), math.sin(p.aoa)])
    assert d >= 0
    np.testing.assert_allclose(est, bs + d * np.array([math.cos(p.aoa), math.sin(p.aoa)]), atol=1e-9 * max(1, d))
    assert C * p.toa >= np.linalg.norm(ue - bs) * (1 - 1e-12)


@pytest.mark.parametrize(
    "origin, theta, d, expected",
    [
        ((0, 0), 0.0, 5.0, (5, 0)),
        ((0, 0), math.pi / 2, 3.0, (0, 3)),
        ((1, 1), math.pi / 4, math.sqrt(2), (2, 2)),
    ],
)
def test_ray_point(origin, theta, d, expected):
    np.testing.assert_allclose(ray_point(Ray.from_angle(origin, theta), d), expected, atol=1e-12)


def test_ray_point_negative_distance():
    with pytest.raises(ValueError):
        ray_point(Ray.from_angle((0, 0), 0.0), -1.0)


def test_ray_direction_is_unit():
    ray = Ray.from_angle((0, 0), 1.234)
    assert abs(np.linalg.norm(ray.direction) - 1) <= 1e-12
    with pytest.raises(ValueError):
        Ray(np.zeros(2), np.array([1.0, 1.0]))


def test_wrap_angle_range():
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
