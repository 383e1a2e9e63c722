"""Shared fixtures and element builders."""

import numpy as np
import pytest

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
    LaneSegment,
    LocalMap,
    Polyline,
)
from stalemap.simulator import NoiseConfig, simulate_predictions


def line(x0, y0, x1, y1, n=POINT_COUNT):
    """Return straight polyline of n points."""
    return Polyline.from_array(
        np.column_stack((np.linspace(x0, x1, n), np.linspace(y0, y1, n))),
    )


def make_lane(eid, x0=-10.0, x1=10.0, y=0.0, width=3.5, successors=()):
    """Return straight lane along x centered at y."""
    half = width / 2
    return LaneSegment(
        element_id=eid,
        element_class=ElementClass.LANE,
        centerline=line(x0, y, x1, y),
        left_boundary=line(x0, y + half, x1, y + half),
        right_boundary=line(x0, y - half, x1, y - half),
        left_type=BoundaryType.SOLID,
        right_type=BoundaryType.DASHED,
        successors=tuple(successors),
    )


def make_crossing(eid, x=0.0, y0=-3.5, y1=3.5, length=3.0):
    """Return rectangular crossing over x = const from y0 to y1."""
    half = length / 2
    return LaneSegment(
        element_id=eid,
        element_class=ElementClass.PEDESTRIAN_CROSSING,
        centerline=line(x, y0, x, y1),
        left_boundary=line(x - half, y0, x - half, y1),
        right_boundary=line(x + half, y0, x + half, y1),
    )


def ground_truth(frame_id, *items):
    """Return ground truth of (segment, label) pairs or bare segments."""
    elements = []
    for item in items:
        if isinstance(item, LaneSegment):
            item = (item, ChangeLabel.UNCHANGED)
        elements.append(LabeledElement(*item))
    return FrameGroundTruth(frame_id, tuple(elements))


def prediction(frame_id, *items):
    """Return prediction of (segment, score, ins_prob, del_prob) tuples."""
    elements = []
    for item in items:
        if isinstance(item, LaneSegment):
            item = (item,)
        elements.append(PredictedElement(*item))
    return FramePrediction(frame_id, tuple(elements))


def identity_frame(frame_id, gt_items, stale_elements=None):
    """Return frame whose prediction reproduces ground truth exactly."""
    gt = ground_truth(frame_id, *gt_items)
    pred = FramePrediction(
        frame_id,
        tuple(
            PredictedElement(
                it.segment,
                1.0,
                1.0 if it.label is ChangeLabel.INSERTED else 0.0,
                1.0 if it.label is ChangeLabel.DELETED else 0.0,
            )
            for it in gt.elements
        ),
    )
    if stale_elements is None:
        stale_elements = [
            it.segment
            for it in gt.elements
            if it.label is not ChangeLabel.INSERTED
        ]
    return Frame(LocalMap(frame_id, tuple(stale_elements)), gt, pred)


def verdict_frame(frame_id, changed, flagged, score=1.0):
    """Return frame with given change truth and detector verdict."""
    lane = make_lane(f"{frame_id}-lane")
    label = ChangeLabel.INSERTED if changed else ChangeLabel.UNCHANGED
    gt = ground_truth(frame_id, (lane, label))
    pred = prediction(frame_id, (lane, score, 1.0 if flagged else 0.0, 0.0))
    return Frame(LocalMap(frame_id, ()), gt, pred)


def dataset(*sequences):
    """Return dataset of sequences given as lists of frames."""
    return Dataset(
        tuple(
            Sequence(f"s{i}", tuple(frames))
            for i, frames in enumerate(sequences)
        ),
    )


LABEL_CYCLE = (
    ChangeLabel.UNCHANGED,
    ChangeLabel.INSERTED,
    ChangeLabel.DELETED,
)


def noisy_dataset(seed, frames=30, **noise):
    """Return one sequence of simulated frames cycling through labels.

    Every frame holds a lane and one crossing, two of three frames carry a
    single change.
    """
    cfg = NoiseConfig(rng_seed=seed, **noise)
    built = []
    for i in range(frames):
        frame_id = f"f{i}"
        crossing = make_crossing("c", x=float(i % 5))
        gt = ground_truth(
            frame_id,
            make_lane("l"),
            (crossing, LABEL_CYCLE[i % len(LABEL_CYCLE)]),
        )
        pred = simulate_predictions(gt, LocalMap(frame_id), cfg, cfg.rng(i))
        built.append(Frame(LocalMap(frame_id), gt, pred))
    return dataset(built)


@pytest.fixture
def lane():
    """Straight lane along x."""
    return make_lane("lane-0")


@pytest.fixture
def crossing():
    """Crossing over the lane at x = 0."""
    return make_crossing("crossing-0")


@pytest.fixture
def world(lane, crossing):
    """Map of two lanes and two crossings."""
    return LocalMap(
        "frame-0",
        (
            lane,
            make_lane("lane-1", y=3.5),
            crossing,
            make_crossing("crossing-1", x=8.0, y0=-1.75, y1=5.25),
        ),
    )


@pytest.fixture
def perfect_dataset(lane, crossing):
    """Two sequences with identity predictions, one of them changed."""
    return dataset(
        [
            identity_frame("a0", [lane, (crossing, ChangeLabel.INSERTED)]),
            identity_frame("a1", [lane, crossing]),
        ],
        [
            identity_frame("b0", [lane, (crossing, ChangeLabel.DELETED)]),
            identity_frame("b1", [lane]),
        ],
        [
            identity_frame("c0", [lane, crossing]),
        ],
    )
