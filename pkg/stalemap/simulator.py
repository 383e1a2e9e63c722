"""Simulated change detector and synthetic evaluation datasets.

The detector turns ground truth into predictions under controlled noise,
worlds are procedurally generated roads with lanes and crossings.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from logging import getLogger
from math import isfinite

import numpy as np

from stalemap.errors import ConfigError
from stalemap.frames import (
    ChangeLabel,
    Dataset,
    Frame,
    FrameGroundTruth,
    FramePrediction,
    LabeledElement,
    PredictedElement,
    Sequence,
)
from stalemap.map_model import (
    POINT_COUNT,
    BoundaryType,
    ElementClass,
    Fov,
    LaneSegment,
    LocalMap,
    Polyline,
    crop_to_fov,
    element_footprint,
    prune_successors,
)
from stalemap.synthesis import SEED_LIMIT, PerturbationConfig, perturb

FLAG_ON = 1.0
FLAG_OFF = 0.0
STRAIGHT = 1e-9

REFERENCE_STATS = {
    "sequences": 37,
    "frames_per_sequence": 103,
    "change_sequences": 33,
    "deletions": 46,
    "insertions": 20,
}

log = getLogger(__name__)


def _check_seed(seed):
    if (
        isinstance(seed, bool)
        or not isinstance(seed, int)
        or not 0 <= seed < SEED_LIMIT
    ):
        msg = f"rng_seed must be 64 bit unsigned, got {seed}"
        raise ConfigError(msg)


@dataclass(frozen=True)
class NoiseConfig:
    """Corruption of the simulated detector.

    Score parameters are (alpha, beta) of a Beta distribution, None gives
    every element the score 1.0.
    """

    rng_seed: int
    miss_rate: float = 0.0
    clutter_rate: float = 0.0
    jitter_sigma: float = 0.0
    flag_flip_rate: float = 0.0
    false_flag_rate: float = 0.0
    score_true: tuple[float, float] | None = (8.0, 2.0)
    score_clutter: tuple[float, float] | None = (2.0, 8.0)
    clutter_offset: tuple[float, float] = (5.0, 10.0)

    def __post_init__(self):
        _check_seed(self.rng_seed)
        for name in ("miss_rate", "flag_flip_rate", "false_flag_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                msg = f"{name} must be in [0, 1], got {value}"
                raise ConfigError(msg)
        if not (isfinite(self.clutter_rate) and self.clutter_rate >= 0):
            msg = "clutter_rate must not be negative"
            raise ConfigError(msg)
        if not (isfinite(self.jitter_sigma) and self.jitter_sigma >= 0):
            msg = "jitter_sigma must not be negative"
            raise ConfigError(msg)
        for name in ("score_true", "score_clutter"):
            value = getattr(self, name)
            if value is not None and (
                len(value) != 2 or min(value) <= 0  # noqa: PLR2004
            ):
                msg = f"{name} must be two positive numbers"
                raise ConfigError(msg)
        low, high = self.clutter_offset
        if not 0 <= low <= high:
            msg = "clutter_offset must be 0 <= low <= high"
            raise ConfigError(msg)

    @classmethod
    def identity(cls, rng_seed=0) -> NoiseConfig:
        """Return noise free detector with perfect scores."""
        return cls(rng_seed, score_true=None, score_clutter=None)

    def rng(self, *keys):
        """Return generator of base seed mixed with keys."""
        return np.random.default_rng(
            np.random.SeedSequence([self.rng_seed, *keys]),
        )


def _score(rng, params):
    if params is None:
        return 1.0
    return float(rng.beta(*params))


def _jittered(segment, rng, sigma):
    noise = rng.normal(0.0, 1.0, size=(3, len(segment.centerline), 2))
    if sigma == 0:
        return segment
    polylines = [
        Polyline.from_array(poly.array + sigma * delta)
        for poly, delta in zip(segment.polylines, noise)
    ]
    return replace(
        segment,
        centerline=polylines[0],
        left_boundary=polylines[1],
        right_boundary=polylines[2],
    )


def _flags(label, rng, cfg):
    """Return (ins_prob, del_prob) of element with ground truth label."""
    flip = rng.random() < cfg.flag_flip_rate
    false_flag = rng.random() < cfg.false_flag_rate
    direction = rng.random() < 0.5  # noqa: PLR2004
    if label is ChangeLabel.INSERTED:
        return (FLAG_OFF if flip else FLAG_ON), FLAG_OFF
    if label is ChangeLabel.DELETED:
        return FLAG_OFF, (FLAG_OFF if flip else FLAG_ON)
    if false_flag:
        return (FLAG_ON, FLAG_OFF) if direction else (FLAG_OFF, FLAG_ON)
    return FLAG_OFF, FLAG_OFF


def _clutter(gt, rng, cfg):
    count = int(rng.poisson(cfg.clutter_rate))
    if not count or not gt.elements:
        return []
    elements = []
    for k in range(count):
        source = gt.elements[int(rng.integers(gt.m_gt))].segment
        angle = rng.uniform(0.0, 2 * np.pi)
        distance = rng.uniform(*cfg.clutter_offset)
        segment = _jittered(source, rng, cfg.jitter_sigma).translated(
            distance * np.cos(angle),
            distance * np.sin(angle),
        )
        ins_prob, del_prob = _flags(ChangeLabel.UNCHANGED, rng, cfg)
        elements.append(
            PredictedElement(
                replace(segment, element_id=f"clutter-{k}", successors=()),
                score=_score(rng, cfg.score_clutter),
                ins_prob=ins_prob,
                del_prob=del_prob,
            ),
        )
    return elements


def simulate_predictions(
    gt: FrameGroundTruth,
    stale: LocalMap,
    cfg: NoiseConfig,
    rng=None,
) -> FramePrediction:
    """Return detector output for one frame.

    Deleted elements are seen only in the prior, so their predictions copy
    the stale geometry. Every element takes the same number of draws, so
    one noise rate does not shift the draws of another.
    """
    rng = cfg.rng() if rng is None else rng
    elements = []
    for labeled in gt.elements:
        segment = labeled.segment
        if labeled.label is ChangeLabel.DELETED:
            segment = stale.element(segment.element_id) or segment
        missed = rng.random() < cfg.miss_rate
        score = _score(rng, cfg.score_true)
        ins_prob, del_prob = _flags(labeled.label, rng, cfg)
        segment = _jittered(segment, rng, cfg.jitter_sigma)
        if missed:
            continue
        elements.append(
            PredictedElement(
                segment,
                score=score,
                ins_prob=ins_prob,
                del_prob=del_prob,
            ),
        )
    elements.extend(_clutter(gt, rng, cfg))
    return FramePrediction(gt.frame_id, tuple(elements), gt.fov)


@dataclass(frozen=True)
class WorldConfig:
    """Procedural road of one driving sequence."""

    lanes: int = 2
    lane_width: float = 3.5
    segment_length: float = 25.0
    road_length: float = 400.0
    max_curvature: float = 0.004
    crossings: int = 2
    crossing_length: float = 3.5
    fov_half_size: float = 25.0

    def __post_init__(self):
        if self.lanes < 1:
            msg = "lanes must be at least 1"
            raise ConfigError(msg)
        if self.crossings < 0:
            msg = "crossings must not be negative"
            raise ConfigError(msg)
        for name in (
            "lane_width",
            "segment_length",
            "road_length",
            "crossing_length",
            "fov_half_size",
        ):
            value = getattr(self, name)
            if not (isfinite(value) and value > 0):
                msg = f"{name} must be positive, got {value}"
                raise ConfigError(msg)
        if not (isfinite(self.max_curvature) and self.max_curvature >= 0):
            msg = "max_curvature must not be negative"
            raise ConfigError(msg)

    @property
    def fov(self) -> Fov:
        """Return ego field of view."""
        half = self.fov_half_size
        return Fov(-half, -half, half, half)


class Road:
    """Reference line of constant curvature starting at the origin."""

    def __init__(self, curvature, cfg: WorldConfig):
        self.curvature = curvature
        self.cfg = cfg

    def heading(self, s):
        """Return heading at arclength s."""
        return self.curvature * np.asarray(s, dtype=float)

    def point(self, s):
        """Return reference points at arclength s."""
        s = np.asarray(s, dtype=float)
        kappa = self.curvature
        if abs(kappa) < STRAIGHT:
            return np.stack((s, np.zeros_like(s)), axis=-1)
        return np.stack(
            (np.sin(kappa * s) / kappa, (1 - np.cos(kappa * s)) / kappa),
            axis=-1,
        )

    def offset(self, s, lateral):
        """Return points shifted to the left of reference line."""
        heading = self.heading(s)
        normal = np.stack((-np.sin(heading), np.cos(heading)), axis=-1)
        return self.point(s) + np.asarray(lateral)[..., None] * normal

    def lane_offset(self, lane):
        """Return lateral offset of lane center, lane 0 is the rightmost."""
        return (lane - (self.cfg.lanes - 1) / 2) * self.cfg.lane_width

    def lane_segment(self, lane, index, s0, s1) -> LaneSegment:
        """Return one piece of lane between arclengths s0 and s1."""
        cfg = self.cfg
        s = np.linspace(s0, s1, POINT_COUNT)
        center = self.lane_offset(lane)
        half = cfg.lane_width / 2
        pieces = int(np.ceil(cfg.road_length / cfg.segment_length))
        successors = ()
        if index + 1 < pieces:
            successors = (f"lane-{lane}-{index + 1}",)
        return LaneSegment(
            element_id=f"lane-{lane}-{index}",
            element_class=ElementClass.LANE,
            centerline=Polyline.from_array(self.offset(s, center)),
            left_boundary=Polyline.from_array(self.offset(s, center + half)),
            right_boundary=Polyline.from_array(
                self.offset(s, center - half),
            ),
            left_type=(
                BoundaryType.SOLID
                if lane == cfg.lanes - 1
                else BoundaryType.DASHED
            ),
            right_type=(
                BoundaryType.SOLID if lane == 0 else BoundaryType.DASHED
            ),
            successors=successors,
        )

    def crossing(self, number, s) -> LaneSegment:
        """Return crossing over the whole road at arclength s."""
        cfg = self.cfg
        half_width = cfg.lanes * cfg.lane_width / 2
        heading = float(self.heading(s))
        tangent = np.array((np.cos(heading), np.sin(heading)))
        centerline = self.offset(
            np.full(POINT_COUNT, s),
            np.linspace(-half_width, half_width, POINT_COUNT),
        )
        shift = tangent * cfg.crossing_length / 2
        return LaneSegment(
            element_id=f"crossing-{number}",
            element_class=ElementClass.PEDESTRIAN_CROSSING,
            centerline=Polyline.from_array(centerline),
            left_boundary=Polyline.from_array(centerline - shift),
            right_boundary=Polyline.from_array(centerline + shift),
        )

    def ego_transform(self, s):
        """Return (rotation, offset) of world to ego frame at arclength s."""
        heading = float(self.heading(s))
        cos, sin = np.cos(heading), np.sin(heading)
        rotation = np.array(((cos, sin), (-sin, cos)))
        return rotation, -rotation @ self.point(s)


def generate_world(world_id, cfg: WorldConfig, rng) -> tuple[Road, LocalMap]:
    """Return road and its map in world coordinates."""
    road = Road(float(rng.uniform(-cfg.max_curvature, cfg.max_curvature)), cfg)
    bounds = np.append(
        np.arange(0.0, cfg.road_length, cfg.segment_length),
        cfg.road_length,
    )
    elements = [
        road.lane_segment(lane, index, s0, s1)
        for lane in range(cfg.lanes)
        for index, (s0, s1) in enumerate(zip(bounds[:-1], bounds[1:]))
    ]
    spacing = cfg.road_length / (cfg.crossings + 1)
    elements.extend(
        road.crossing(number, spacing * (number + 1))
        for number in range(cfg.crossings)
    )
    return road, LocalMap(world_id, tuple(elements))


def _crop_ground_truth(gt, fov):
    window = fov.window()
    kept = [
        it for it in gt.elements
        if element_footprint(it.segment).intersects(window)
    ]
    segments = prune_successors([it.segment for it in kept])
    return FrameGroundTruth(
        gt.frame_id,
        tuple(
            replace(it, segment=segment)
            for it, segment in zip(kept, segments)
        ),
        fov,
    )


def _near(segments, point, radius):
    """Return mask of segments with a vertex closer than radius to point."""
    return [
        bool((np.hypot(*(it.ring - point).T) < radius).any())
        for it in segments
    ]


def _ego_frames(road, stale, gt, frame_count, index, cfg, noise):
    sequence_id = gt.frame_id
    # vertices are at most a lane piece apart, so this keeps every
    # element that can reach the field of view
    radius = cfg.fov_half_size * np.sqrt(2) + cfg.segment_length
    frames = []
    positions = np.linspace(0.0, cfg.road_length, frame_count)
    for number, s in enumerate(positions):
        frame_id = f"{sequence_id}-{number:03d}"
        rotation, offset = road.ego_transform(s)
        ego = road.point(s)
        near_stale = _near(stale, ego, radius)
        near_gt = _near(gt.segments, ego, radius)
        ego_stale = crop_to_fov(
            LocalMap(
                frame_id,
                tuple(
                    it.transformed(rotation, offset)
                    for it, near in zip(stale, near_stale)
                    if near
                ),
            ),
            cfg.fov,
        )
        ego_gt = _crop_ground_truth(
            FrameGroundTruth(
                frame_id,
                tuple(
                    LabeledElement(
                        it.segment.transformed(rotation, offset),
                        it.label,
                    )
                    for it, near in zip(gt.elements, near_gt)
                    if near
                ),
            ),
            cfg.fov,
        )
        prediction = simulate_predictions(
            ego_gt,
            ego_stale,
            noise,
            noise.rng(index, number),
        )
        frames.append(Frame(ego_stale, ego_gt, prediction))
    return frames


def _unchanged(world):
    return FrameGroundTruth(
        world.frame_id,
        tuple(LabeledElement(it) for it in world.elements),
        world.fov,
    )


def build_sequence(
    index,
    frame_count,
    world: WorldConfig,
    perturbation: PerturbationConfig | None,
    noise: NoiseConfig,
    mode="mixed",
) -> Sequence:
    """Return one synthetic driving sequence.

    Changes are made on the whole road once, so every frame of the sequence
    sees the same stale prior.
    """
    sequence_id = f"seq-{index:03d}"
    seed = 0 if perturbation is None else perturbation.rng_seed
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    road, world_map = generate_world(sequence_id, world, rng)
    if perturbation is None:
        stale, gt = world_map, _unchanged(world_map)
    else:
        stale, gt = perturb(world_map, perturbation, mode, rng)
    frames = _ego_frames(
        road,
        stale.elements,
        gt,
        frame_count,
        index,
        world,
        noise,
    )
    return Sequence(sequence_id, tuple(frames))


def build_synthetic_dataset(
    n_sequences,
    frames_per_seq,
    world: WorldConfig | None = None,
    perturbation: PerturbationConfig | None = None,
    noise: NoiseConfig | None = None,
    mode="mixed",
) -> Dataset:
    """Return dataset of generated sequences.

    Without perturbation every element is unchanged, without noise the
    detector is perfect.
    """
    if n_sequences < 1 or frames_per_seq < 1:
        msg = "sequence and frame counts must be at least 1"
        raise ValueError(msg)
    world = world or WorldConfig()
    noise = noise or NoiseConfig.identity()
    sequences = []
    for index in range(n_sequences):
        log.info("sequence %d of %d", index + 1, n_sequences)
        sequences.append(
            build_sequence(
                index,
                frames_per_seq,
                world,
                perturbation,
                noise,
                mode,
            ),
        )
    return Dataset(tuple(sequences))


def reference_stats_plan(seed=0):
    """Return (insertions, deletions) planned for every sequence.

    Change sequences get at least one change each, the remaining sequences
    stay unchanged. Which sequence gets what is shuffled by seed.
    """
    stats = REFERENCE_STATS
    changed = stats["change_sequences"]
    deletions = [stats["deletions"] // changed] * changed
    for i in range(stats["deletions"] % changed):
        deletions[i] += 1
    insertions = [0] * changed
    for i in range(stats["insertions"]):
        insertions[changed - 1 - i % changed] += 1
    plan = list(zip(insertions, deletions))
    plan += [(0, 0)] * (stats["sequences"] - changed)
    order = np.random.default_rng(seed).permutation(len(plan))
    return [plan[it] for it in order]


def reference_stats_dataset(
    seed=0,
    noise: NoiseConfig | None = None,
    world: WorldConfig | None = None,
    frames_per_seq=None,
) -> Dataset:
    """Return 37 sequences with 46 deletions and 20 insertions.

    Insertions come from removing every road crossing of the prior, the
    deletions are forced synthetic crossings. Unchanged sequences keep one
    crossing.
    """
    world = world or WorldConfig()
    noise = noise or NoiseConfig.identity(seed)
    frames_per_seq = frames_per_seq or REFERENCE_STATS["frames_per_sequence"]
    sequences = []
    plan = reference_stats_plan(seed)
    for index, (insertions, deletions) in enumerate(plan):
        changed = insertions or deletions
        perturbation = PerturbationConfig(
            rng_seed=seed,
            deletion_probability=1.0 if changed else 0.0,
            forced_insertions=deletions,
        )
        sequences.append(
            build_sequence(
                index,
                frames_per_seq,
                replace(world, crossings=insertions if changed else 1),
                perturbation,
                noise,
                "mixed",
            ),
        )
    return Dataset(tuple(sequences))
