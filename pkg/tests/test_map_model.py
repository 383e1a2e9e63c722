"""Tests of lane segments, resampling, cropping and validation."""

from dataclasses import replace

import numpy as np
import pytest
from conftest import line, make_crossing, make_lane

from stalemap.errors import ZeroLengthPolyline
from stalemap.map_model import (
    BoundaryType,
    Fov,
    LocalMap,
    Polyline,
    crop_to_fov,
    resample_polyline,
    validate_map,
)


def rules(violations):
    return sorted(it.rule for it in violations)


def test_boundary_ordinals():
    assert [int(it) for it in BoundaryType] == [0, 1, 2]


def test_resample_straight():
    poly = Polyline(((0.0, 0.0), (9.0, 0.0)))
    result = resample_polyline(poly, 10)
    assert np.allclose(result.array, [(x, 0) for x in range(10)])


def test_resample_endpoints():
    poly = Polyline(((1.0, 2.0), (3.0, 5.0), (-4.0, 7.0)))
    result = resample_polyline(poly, 2)
    assert result.points == ((1.0, 2.0), (-4.0, 7.0))


def test_resample_l_shape():
    poly = Polyline(((0.0, 0.0), (2.0, 0.0), (2.0, 2.0)))
    result = resample_polyline(poly, 5)
    assert np.allclose(
        result.array,
        [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)],
    )


def test_resample_skips_repeated_points():
    poly = Polyline(((0.0, 0.0), (0.0, 0.0), (4.0, 0.0)))
    result = resample_polyline(poly, 5)
    assert np.allclose(result.array[:, 0], [0, 1, 2, 3, 4])


def test_resample_zero_length():
    with pytest.raises(ZeroLengthPolyline):
        resample_polyline(Polyline(((1.0, 1.0), (1.0, 1.0))))


def test_resample_idempotent():
    rng = np.random.default_rng(7)
    for _ in range(20):
        poly = Polyline.from_array(np.cumsum(rng.normal(size=(6, 2)), 0))
        once = resample_polyline(poly)
        twice = resample_polyline(once)
        assert np.allclose(once.array, twice.array, atol=1e-9)


def test_resample_keeps_length_of_sampled_line():
    poly = line(0, 0, 9, 9)
    assert resample_polyline(poly).length == pytest.approx(poly.length)


def test_crop_inside_outside_straddling():
    inside = make_lane("inside")
    outside = make_lane("outside", x0=40, x1=60)
    straddling = make_lane("straddling", x0=20, x1=40)
    local_map = LocalMap("f", (inside, outside, straddling))
    cropped = crop_to_fov(local_map, Fov())
    assert cropped.ids == ("inside", "straddling")
    assert cropped.element("straddling") == straddling


def test_crop_drops_links_to_cropped():
    first = make_lane("first", successors=("second",))
    second = make_lane("second", x0=40, x1=60)
    cropped = crop_to_fov(LocalMap("f", (first, second)), Fov())
    assert cropped.ids == ("first",)
    assert cropped.element("first").successors == ()
    assert validate_map(cropped) == []


def test_crop_malformed_bounds():
    with pytest.raises(ValueError, match="malformed"):
        crop_to_fov(LocalMap("f"), Fov(1, 0, 0, 1))


def test_validate_valid_map(world):
    assert validate_map(world) == []


def test_validate_point_count(lane):
    short = replace(lane, centerline=line(-10, 0, 10, 0, n=9))
    violations = validate_map(LocalMap("f", (short,)))
    assert rules(violations) == ["PointCountViolation"]
    assert violations[0].element_id == "lane-0"


def test_validate_duplicate_id(lane):
    violations = validate_map(LocalMap("f", (lane, lane)))
    assert rules(violations) == ["DuplicateId"]


def test_validate_degenerate(lane):
    flat = replace(lane, right_boundary=lane.left_boundary)
    assert rules(validate_map(LocalMap("f", (flat,)))) == [
        "DegenerateElement",
    ]


def test_validate_outside_and_dangling():
    far = make_lane("far", x0=100, x1=120, successors=("missing",))
    assert rules(validate_map(LocalMap("f", (far,)))) == [
        "DanglingSuccessor",
        "OutsideFov",
    ]


def test_validate_non_finite(lane):
    broken = replace(
        lane,
        centerline=Polyline(((0.0, 0.0), (float("nan"), 1.0))),
    )
    assert "NonFiniteCoordinate" in rules(
        validate_map(LocalMap("f", (broken,))),
    )


def test_validate_malformed_fov(crossing):
    violations = validate_map(LocalMap("f", (crossing,), Fov(0, 0, 0, 0)))
    assert rules(violations) == ["MalformedFov"]


def test_ring_and_transform(crossing):
    rotation = np.array(((0.0, -1.0), (1.0, 0.0)))
    moved = crossing.transformed(rotation, (5.0, 0.0))
    assert np.allclose(moved.centerline.array[0], (8.5, 0.0))
    assert crossing.ring.shape == (20, 2)


def test_local_map_edit(world):
    smaller = world.without({"crossing-0"})
    assert "crossing-0" not in smaller.ids
    assert smaller.extended([make_crossing("x")]).ids[-1] == "x"
    assert len(world.lanes) == 2
    assert len(world.crossings) == 2
