"""Synthetic stale priors with known pedestrian crossing changes.

Insertion examples remove crossings from the prior, the world gained them.
Deletion examples add synthetic crossings to the prior, the world lost them.
"""

from __future__ import annotations

from dataclasses import dataclass
from logging import getLogger
from math import isfinite

import numpy as np
from shapely.geometry import LineString, Point

from stalemap.errors import ConfigError, NoHostLane
from stalemap.frames import ChangeLabel, FrameGroundTruth, LabeledElement
from stalemap.map_model import (
    POINT_COUNT,
    BoundaryType,
    ElementClass,
    LaneSegment,
    LocalMap,
    Polyline,
)

SEED_LIMIT = 2**64

log = getLogger(__name__)


@dataclass(frozen=True)
class PerturbationConfig:
    """Parameters of the stale prior generator.

    ``target_ratio`` is the wanted insertion:deletion balance of mixed mode,
    ``forced_insertions`` replaces the Poisson draw of synthetic crossings.
    """

    rng_seed: int
    deletion_probability: float = 0.5
    insertion_rate: float = 0.0
    crossing_length: float = 3.5
    target_ratio: float | None = None
    forced_insertions: int | None = None

    def __post_init__(self):
        if (
            isinstance(self.rng_seed, bool)
            or not isinstance(self.rng_seed, int)
            or not 0 <= self.rng_seed < SEED_LIMIT
        ):
            msg = f"rng_seed must be 64 bit unsigned, got {self.rng_seed}"
            raise ConfigError(msg)
        if not 0.0 <= self.deletion_probability <= 1.0:
            msg = "deletion_probability must be in [0, 1]"
            raise ConfigError(msg)
        if not (isfinite(self.insertion_rate) and self.insertion_rate >= 0):
            msg = "insertion_rate must not be negative"
            raise ConfigError(msg)
        if not (isfinite(self.crossing_length) and self.crossing_length > 0):
            msg = "crossing_length must be positive"
            raise ConfigError(msg)
        if self.target_ratio is not None and not self.target_ratio > 0:
            msg = "target_ratio must be positive"
            raise ConfigError(msg)
        if self.forced_insertions is not None and self.forced_insertions < 0:
            msg = "forced_insertions must not be negative"
            raise ConfigError(msg)

    def rng(self):
        """Return fresh generator of this configuration."""
        return np.random.default_rng(self.rng_seed)


def _arclength(points):
    steps = np.hypot(*np.diff(points, axis=0).T)
    return np.concatenate(([0.0], np.cumsum(steps)))


def _normal_offset(boundary, origin, normal):
    line = LineString(boundary.array)
    nearest = line.interpolate(line.project(Point(origin)))
    return float(np.dot(np.asarray(nearest.coords[0]) - origin, normal))


def generate_crossing(
    host: LaneSegment,
    s: float,
    length: float,
    element_id: str | None = None,
) -> LaneSegment:
    """Return crossing spanning host lane at arclength fraction s.

    The crossing center is clamped so the whole crossing stays on the host.
    Its centerline runs from the right to the left boundary.
    """
    if not host.is_lane:
        msg = f"host `{host.element_id}' is not a lane"
        raise ValueError(msg)
    if not (isfinite(length) and length > 0):
        msg = f"crossing length must be positive, got {length}"
        raise ValueError(msg)
    if not 0.0 <= s <= 1.0:
        msg = f"arclength fraction {s} not in [0, 1]"
        raise ValueError(msg)

    points = host.centerline.array
    arclength = _arclength(points)
    total = float(arclength[-1])
    half = length / 2
    if total <= length:
        center = total / 2
    else:
        center = min(max(s * total, half), total - half)

    # step containing center, repeated points skipped
    moving = np.flatnonzero(np.diff(arclength) > 0)
    found = np.searchsorted(arclength[moving], center, side="right")
    index = moving[max(0, found - 1)]
    tangent = points[index + 1] - points[index]
    tangent = tangent / np.hypot(*tangent)
    normal = np.array((-tangent[1], tangent[0]))
    origin = np.array(
        (
            np.interp(center, arclength, points[:, 0]),
            np.interp(center, arclength, points[:, 1]),
        ),
    )

    left = _normal_offset(host.left_boundary, origin, normal)
    right = _normal_offset(host.right_boundary, origin, normal)
    offsets = np.linspace(right, left, POINT_COUNT)[:, None]
    centerline = origin + offsets * normal
    shift = tangent * half

    if element_id is None:
        element_id = f"{host.element_id}-crossing-{center:.2f}"
    return LaneSegment(
        element_id=element_id,
        element_class=ElementClass.PEDESTRIAN_CROSSING,
        centerline=Polyline.from_array(centerline),
        left_boundary=Polyline.from_array(centerline - shift),
        right_boundary=Polyline.from_array(centerline + shift),
        left_type=BoundaryType.NON_VISIBLE,
        right_type=BoundaryType.NON_VISIBLE,
    )


def _labeled(world, removed, synthetic):
    elements = [
        LabeledElement(
            it,
            ChangeLabel.INSERTED
            if it.element_id in removed
            else ChangeLabel.UNCHANGED,
        )
        for it in world.elements
    ]
    elements.extend(
        LabeledElement(it, ChangeLabel.DELETED) for it in synthetic
    )
    return FrameGroundTruth(world.frame_id, tuple(elements), world.fov)


def _remove_crossings(world, cfg, rng):
    return {
        it.element_id
        for it in world.crossings
        if rng.random() < cfg.deletion_probability
    }


def _synthetic_crossings(world, cfg, rng, count):
    if not count:
        return []
    lanes = world.lanes
    if not lanes:
        msg = f"frame `{world.frame_id}' has no lane to host a crossing"
        raise NoHostLane(msg)

    taken = set(world.ids)
    crossings = []
    for _ in range(count):
        host = lanes[int(rng.integers(len(lanes)))]
        s = float(rng.random())
        number = len(crossings)
        element_id = f"synthetic-{world.frame_id}-{number}"
        while element_id in taken:
            number += 1
            element_id = f"synthetic-{world.frame_id}-{number}"
        taken.add(element_id)
        crossings.append(
            generate_crossing(host, s, cfg.crossing_length, element_id),
        )
    return crossings


def _insertion_count(cfg, rng):
    if cfg.forced_insertions is not None:
        return cfg.forced_insertions
    return int(rng.poisson(cfg.insertion_rate))


def make_insertion_examples(world: LocalMap, cfg, rng=None):
    """Remove every crossing from prior with deletion_probability.

    Return (stale, ground truth), removed crossings are labeled inserted.
    """
    rng = cfg.rng() if rng is None else rng
    removed = _remove_crossings(world, cfg, rng)
    log.debug("%s: %d crossings removed", world.frame_id, len(removed))
    return world.without(removed), _labeled(world, removed, ())


def make_deletion_examples(world: LocalMap, cfg, rng=None):
    """Add synthetic crossings to prior, they are labeled deleted."""
    rng = cfg.rng() if rng is None else rng
    count = _insertion_count(cfg, rng)
    synthetic = _synthetic_crossings(world, cfg, rng, count)
    log.debug("%s: %d crossings added", world.frame_id, len(synthetic))
    return world.extended(synthetic), _labeled(world, (), synthetic)


def make_mixed_examples(world: LocalMap, cfg, rng=None):
    """Remove and add crossings on one frame.

    With ``target_ratio`` the synthetic crossing count follows the number of
    removed crossings divided by the ratio.
    """
    rng = cfg.rng() if rng is None else rng
    removed = _remove_crossings(world, cfg, rng)
    if cfg.forced_insertions is None and cfg.target_ratio is not None:
        count = round(len(removed) / cfg.target_ratio)
    else:
        count = _insertion_count(cfg, rng)
    synthetic = _synthetic_crossings(world, cfg, rng, count)
    stale = world.without(removed).extended(synthetic)
    return stale, _labeled(world, removed, synthetic)


MODES = {
    "insertions": {
        "key": "insertions",
        "title": "Crossings removed from prior",
        "function": make_insertion_examples,
    },
    "deletions": {
        "key": "deletions",
        "title": "Synthetic crossings added to prior",
        "function": make_deletion_examples,
    },
    "mixed": {
        "key": "mixed",
        "title": "Both directions on one frame",
        "function": make_mixed_examples,
    },
}


def perturb(world: LocalMap, cfg, mode="insertions", rng=None):
    """Run perturbation of registered mode."""
    if mode not in MODES:
        msg = f"unknown perturbation mode `{mode}'"
        raise ValueError(msg)
    return MODES[mode]["function"](world, cfg, rng)
