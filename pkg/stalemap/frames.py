"""Frame level ground truth, predictions and datasets."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import isfinite

from stalemap.map_model import Fov, LaneSegment, LocalMap

FLAG_CUT = 0.5


class ChangeLabel(Enum):
    """Change status of one element relative to the stale prior."""

    UNCHANGED = "unchanged"
    INSERTED = "inserted"
    DELETED = "deleted"


class ChangeType(Enum):
    """Change direction used by type aware strategies."""

    INSERTION = "insertion"
    DELETION = "deletion"

    @property
    def label(self) -> ChangeLabel:
        """Return ground truth label of this change direction."""
        if self is ChangeType.INSERTION:
            return ChangeLabel.INSERTED
        return ChangeLabel.DELETED


@dataclass(frozen=True)
class LabeledElement:
    """Ground truth element with its change label."""

    segment: LaneSegment
    label: ChangeLabel = ChangeLabel.UNCHANGED

    @property
    def is_changed(self) -> bool:
        """Return True for inserted or deleted elements."""
        return self.label is not ChangeLabel.UNCHANGED

    def matches(self, change_type: ChangeType | None) -> bool:
        """Return True if the element is a change of given direction.

        None means any direction.
        """
        if change_type is None:
            return self.is_changed
        return self.label is change_type.label


@dataclass(frozen=True)
class FrameGroundTruth:
    """Change labeled map of one frame.

    Deleted elements keep the geometry of the stale element.
    """

    frame_id: str
    elements: tuple[LabeledElement, ...] = ()
    fov: Fov = Fov()

    @property
    def m_gt(self) -> int:
        """Return element count."""
        return len(self.elements)

    @property
    def segments(self) -> tuple[LaneSegment, ...]:
        """Return geometry of all elements."""
        return tuple(it.segment for it in self.elements)

    def changed(self, change_type=None) -> tuple[LabeledElement, ...]:
        """Return changed elements, optionally of one direction."""
        return tuple(it for it in self.elements if it.matches(change_type))

    def has_change(self, change_type=None) -> bool:
        """Return single frame change truth."""
        return any(it.matches(change_type) for it in self.elements)

    def count(self, label: ChangeLabel) -> int:
        """Return number of elements with label."""
        return sum(1 for it in self.elements if it.label is label)

    def world_map(self) -> LocalMap:
        """Return the up to date map, deleted elements left out."""
        return LocalMap(
            self.frame_id,
            tuple(
                it.segment
                for it in self.elements
                if it.label is not ChangeLabel.DELETED
            ),
            self.fov,
        )


def _check_unit(name, value):
    if not (isfinite(value) and 0.0 <= value <= 1.0):
        msg = f"{name} must be in [0, 1], got {value}"
        raise ValueError(msg)


@dataclass(frozen=True)
class PredictedElement:
    """Detector output for one element.

    The change flags are the head probabilities binarized at ``FLAG_CUT``.
    """

    segment: LaneSegment
    score: float = 1.0
    ins_prob: float = 0.0
    del_prob: float = 0.0

    def __post_init__(self):
        _check_unit("score", self.score)
        _check_unit("ins_prob", self.ins_prob)
        _check_unit("del_prob", self.del_prob)

    @property
    def ins_flag(self) -> bool:
        """Return binarized insertion head."""
        return self.ins_prob >= FLAG_CUT

    @property
    def del_flag(self) -> bool:
        """Return binarized deletion head."""
        return self.del_prob >= FLAG_CUT

    def flagged(self, change_type: ChangeType | None = None) -> bool:
        """Return True if a head of given direction signals a change."""
        if change_type is None:
            return self.ins_flag or self.del_flag
        if change_type is ChangeType.INSERTION:
            return self.ins_flag
        return self.del_flag

    @property
    def status(self) -> ChangeLabel:
        """Return three way change status, deletion wins a head conflict."""
        if self.del_flag:
            return ChangeLabel.DELETED
        if self.ins_flag:
            return ChangeLabel.INSERTED
        return ChangeLabel.UNCHANGED

    @property
    def conflict(self) -> bool:
        """Return True when both heads fire."""
        return self.ins_flag and self.del_flag


@dataclass(frozen=True)
class FramePrediction:
    """All predicted elements of one frame."""

    frame_id: str
    elements: tuple[PredictedElement, ...] = ()
    fov: Fov = Fov()

    @property
    def m_pred(self) -> int:
        """Return element count."""
        return len(self.elements)

    @property
    def segments(self) -> tuple[LaneSegment, ...]:
        """Return geometry of all elements."""
        return tuple(it.segment for it in self.elements)

    def detections(self, epsilon, change_type=None):
        """Return (index, element) of flagged elements with score >= eps."""
        return [
            (i, it)
            for i, it in enumerate(self.elements)
            if it.flagged(change_type) and it.score >= epsilon
        ]


@dataclass(frozen=True)
class Frame:
    """Stale prior, ground truth and prediction of one frame."""

    stale: LocalMap
    ground_truth: FrameGroundTruth
    prediction: FramePrediction

    def __post_init__(self):
        ids = {
            self.stale.frame_id,
            self.ground_truth.frame_id,
            self.prediction.frame_id,
        }
        if len(ids) != 1:
            msg = f"frame ids do not align: {sorted(ids)}"
            raise ValueError(msg)

    @property
    def frame_id(self) -> str:
        """Return shared frame id."""
        return self.ground_truth.frame_id

    def has_change(self, change_type=None) -> bool:
        """Return single frame change truth."""
        return self.ground_truth.has_change(change_type)


@dataclass(frozen=True)
class Sequence:
    """Driving sequence, an ordered run of frames."""

    sequence_id: str
    frames: tuple[Frame, ...] = ()

    def __post_init__(self):
        ids = [it.frame_id for it in self.frames]
        if len(set(ids)) != len(ids):
            msg = f"duplicate frame ids in sequence `{self.sequence_id}'"
            raise ValueError(msg)

    def has_change(self, change_type=None) -> bool:
        """Return multi frame change truth."""
        return any(it.has_change(change_type) for it in self.frames)

    def changed_ids(self, label: ChangeLabel) -> list[str]:
        """Return sorted unique ids of elements with label."""
        return sorted(
            {
                element.segment.element_id
                for frame in self.frames
                for element in frame.ground_truth.elements
                if element.label is label
            },
        )


@dataclass(frozen=True)
class Dataset:
    """Evaluation dataset of driving sequences."""

    sequences: tuple[Sequence, ...] = ()

    @property
    def s(self) -> int:
        """Return sequence count."""
        return len(self.sequences)

    @property
    def frame_counts(self) -> tuple[int, ...]:
        """Return frame count of every sequence."""
        return tuple(len(it.frames) for it in self.sequences)

    @property
    def frame_count(self) -> int:
        """Return total frame count."""
        return sum(self.frame_counts)

    def frames(self):
        """Yield every frame in sequence order."""
        for sequence in self.sequences:
            yield from sequence.frames
