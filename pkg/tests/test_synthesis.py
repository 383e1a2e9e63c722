"""Tests of the stale prior generator."""

import numpy as np
import pytest
from conftest import make_crossing, make_lane

from stalemap.errors import ConfigError, NoHostLane
from stalemap.exchange import save_ground_truth, save_map
from stalemap.frames import ChangeLabel
from stalemap.geometry import element_polygon
from stalemap.map_model import (
    POINT_COUNT,
    BoundaryType,
    ElementClass,
    LaneSegment,
    LocalMap,
    Polyline,
    validate_map,
)
from stalemap.synthesis import (
    PerturbationConfig,
    generate_crossing,
    make_deletion_examples,
    make_insertion_examples,
    make_mixed_examples,
    perturb,
)


def bookkeeping(world, stale, gt):
    inserted = gt.count(ChangeLabel.INSERTED)
    deleted = gt.count(ChangeLabel.DELETED)
    return len(stale.elements) + inserted - deleted == len(world.elements)


def many_crossings(count):
    return LocalMap(
        "big",
        tuple(make_crossing(f"c{i}", x=i * 4.0) for i in range(count)),
    )


def test_config_validation():
    with pytest.raises(ConfigError):
        PerturbationConfig(rng_seed=-1)
    with pytest.raises(ConfigError):
        PerturbationConfig(rng_seed=1, deletion_probability=1.5)
    with pytest.raises(ConfigError):
        PerturbationConfig(rng_seed=1, crossing_length=0)
    with pytest.raises(ConfigError):
        PerturbationConfig(rng_seed=1, target_ratio=0)


def test_insertion_probability_zero(world):
    stale, gt = make_insertion_examples(
        world,
        PerturbationConfig(rng_seed=1, deletion_probability=0),
    )
    assert stale == world
    assert not gt.has_change()


def test_insertion_probability_one(world):
    stale, gt = make_insertion_examples(
        world,
        PerturbationConfig(rng_seed=1, deletion_probability=1),
    )
    assert stale.crossings == ()
    assert stale.lanes == world.lanes
    assert gt.count(ChangeLabel.INSERTED) == 2
    assert {it.segment.element_id for it in gt.changed()} == {
        "crossing-0",
        "crossing-1",
    }


def test_insertion_binomial():
    world = many_crossings(1000)
    _, gt = make_insertion_examples(
        world,
        PerturbationConfig(rng_seed=2024, deletion_probability=0.5),
    )
    sigma = np.sqrt(1000 * 0.25)
    assert abs(gt.count(ChangeLabel.INSERTED) - 500) <= 3 * sigma


def test_deletion_rate_zero(world):
    stale, gt = make_deletion_examples(
        world,
        PerturbationConfig(rng_seed=1, insertion_rate=0),
    )
    assert stale == world
    assert not gt.has_change()


def test_forced_single_deletion(lane):
    world = LocalMap("f", (lane,))
    stale, gt = make_deletion_examples(
        world,
        PerturbationConfig(rng_seed=4, forced_insertions=1),
    )
    assert len(stale.elements) == 2
    (deleted,) = gt.changed()
    assert deleted.label is ChangeLabel.DELETED
    assert deleted.segment in stale.elements
    assert element_polygon(deleted.segment).intersects(
        element_polygon(lane),
    )
    assert validate_map(stale) == []


def test_deletion_determinism(world):
    cfg = PerturbationConfig(rng_seed=99, insertion_rate=3)
    first = make_deletion_examples(world, cfg)
    second = make_deletion_examples(world, cfg)
    assert save_map(first[0]) == save_map(second[0])
    assert save_ground_truth(first[1]) == save_ground_truth(second[1])


def test_no_host_lane(crossing):
    world = LocalMap("f", (crossing,))
    with pytest.raises(NoHostLane):
        make_deletion_examples(
            world,
            PerturbationConfig(rng_seed=1, forced_insertions=1),
        )
    # nothing requested, nothing to host
    stale, _ = make_deletion_examples(
        world,
        PerturbationConfig(rng_seed=1, forced_insertions=0),
    )
    assert stale == world


def test_mixed_target_ratio():
    world = many_crossings(10).extended([make_lane("host", x0=0, x1=40)])
    stale, gt = make_mixed_examples(
        world,
        PerturbationConfig(
            rng_seed=3,
            deletion_probability=1,
            target_ratio=5,
        ),
    )
    assert gt.count(ChangeLabel.INSERTED) == 10
    assert gt.count(ChangeLabel.DELETED) == 2
    assert bookkeeping(world, stale, gt)


def test_bookkeeping_over_seeds(world):
    for seed in range(40):
        for mode in ("insertions", "deletions", "mixed"):
            cfg = PerturbationConfig(
                rng_seed=seed,
                deletion_probability=0.5,
                insertion_rate=1.5,
            )
            stale, gt = perturb(world, cfg, mode)
            assert bookkeeping(world, stale, gt)
            labels = [it.segment.element_id for it in gt.elements]
            assert len(labels) == len(set(labels))
            for it in gt.elements:
                if it.label is ChangeLabel.UNCHANGED:
                    assert stale.element(it.segment.element_id) == it.segment


def test_unknown_mode(world):
    with pytest.raises(ValueError, match="unknown"):
        perturb(world, PerturbationConfig(rng_seed=1), "shift")


def test_generate_crossing_straight():
    host = make_lane("host", x0=0, x1=20, y=1.75)
    crossing = generate_crossing(host, 0.5, 4.0)
    assert crossing.element_class is ElementClass.PEDESTRIAN_CROSSING
    assert crossing.left_type is BoundaryType.NON_VISIBLE
    assert all(len(it) == POINT_COUNT for it in crossing.polylines)
    shape = element_polygon(crossing)
    assert shape.area == pytest.approx(14.0)
    assert shape.bounds == pytest.approx((8.0, 0.0, 12.0, 3.5))


def test_generate_crossing_clamped_start():
    host = make_lane("host", x0=0, x1=20, y=1.75)
    shape = element_polygon(generate_crossing(host, 0.0, 4.0))
    assert shape.bounds[0] == pytest.approx(0.0)
    assert shape.centroid.x == pytest.approx(2.0)


def test_generate_crossing_curved():
    angles = np.linspace(0, np.pi / 4, POINT_COUNT)
    radius, width = 30.0, 3.5

    def arc(r):
        return Polyline.from_array(
            np.column_stack((r * np.sin(angles), radius - r * np.cos(angles))),
        )

    host = LaneSegment(
        "curve",
        ElementClass.LANE,
        arc(radius),
        arc(radius - width / 2),
        arc(radius + width / 2),
    )
    crossing = generate_crossing(host, 0.4, 3.0)
    assert element_polygon(crossing).area == pytest.approx(
        3.0 * width,
        rel=0.1,
    )


def test_generate_crossing_preconditions(lane, crossing):
    with pytest.raises(ValueError, match="not a lane"):
        generate_crossing(crossing, 0.5, 3)
    with pytest.raises(ValueError, match="length"):
        generate_crossing(lane, 0.5, 0)
    with pytest.raises(ValueError, match="fraction"):
        generate_crossing(lane, 1.5, 3)
