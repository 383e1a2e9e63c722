"""Vectorized local maps made of lane segments.

Coordinates are meters in the ego frame: x forward, y left. Every polyline of
a canonical lane segment has exactly ``POINT_COUNT`` points.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from functools import cached_property
from logging import getLogger

import numpy as np
from shapely import make_valid
from shapely.geometry import Polygon, box

from stalemap.errors import ZeroLengthPolyline

POINT_COUNT = 10
FOV_HALF_SIZE = 25.0
MIN_AREA = 1e-6

log = getLogger(__name__)


class BoundaryType(IntEnum):
    """Lane boundary marking. Ordinals are serialized, do not renumber."""

    NON_VISIBLE = 0
    DASHED = 1
    SOLID = 2


class ElementClass(Enum):
    """Map element class."""

    LANE = "lane"
    PEDESTRIAN_CROSSING = "pedestrian_crossing"


@dataclass(frozen=True)
class Polyline:
    """Ordered immutable point sequence."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.points) < 2:  # noqa: PLR2004
            msg = f"polyline needs at least 2 points, got {len(self.points)}"
            raise ValueError(msg)

    @classmethod
    def from_array(cls, array) -> Polyline:
        """Create polyline from any (n, 2) array like."""
        data = np.asarray(array, dtype=float).reshape(-1, 2)
        return cls(tuple((float(x), float(y)) for x, y in data))

    @cached_property
    def array(self) -> np.ndarray:
        """Return read-only (n, 2) array of points."""
        data = np.array(self.points, dtype=float).reshape(-1, 2)
        data.flags.writeable = False
        return data

    def __len__(self):
        """Return number of points."""
        return len(self.points)

    @property
    def length(self) -> float:
        """Return total arclength."""
        steps = np.diff(self.array, axis=0)
        return float(np.hypot(steps[:, 0], steps[:, 1]).sum())

    @property
    def is_finite(self) -> bool:
        """Return True if no coordinate is NaN or infinite."""
        return bool(np.isfinite(self.array).all())

    def transformed(self, rotation, offset) -> Polyline:
        """Apply ``p @ rotation.T + offset`` to every point."""
        rotation = np.asarray(rotation, dtype=float)
        return Polyline.from_array(self.array @ rotation.T + offset)

    def translated(self, dx, dy) -> Polyline:
        """Return polyline moved by (dx, dy)."""
        return Polyline.from_array(self.array + (dx, dy))


@dataclass(frozen=True)
class LaneSegment:
    """Lane or pedestrian crossing element."""

    element_id: str
    element_class: ElementClass
    centerline: Polyline
    left_boundary: Polyline
    right_boundary: Polyline
    left_type: BoundaryType = BoundaryType.NON_VISIBLE
    right_type: BoundaryType = BoundaryType.NON_VISIBLE
    successors: tuple[str, ...] = ()

    @property
    def is_lane(self) -> bool:
        """Return True for lane class elements."""
        return self.element_class is ElementClass.LANE

    @property
    def is_crossing(self) -> bool:
        """Return True for pedestrian crossings."""
        return self.element_class is ElementClass.PEDESTRIAN_CROSSING

    @property
    def polylines(self) -> tuple[Polyline, Polyline, Polyline]:
        """Return centerline, left and right boundary."""
        return (self.centerline, self.left_boundary, self.right_boundary)

    @property
    def boundary_points(self) -> np.ndarray:
        """Return both boundaries as one point set."""
        return np.vstack((self.left_boundary.array, self.right_boundary.array))

    @property
    def ring(self) -> np.ndarray:
        """Return left boundary followed by reversed right boundary."""
        return np.vstack(
            (self.left_boundary.array, self.right_boundary.array[::-1]),
        )

    def transformed(self, rotation, offset) -> LaneSegment:
        """Return element with rigid motion applied to all polylines."""
        return replace(
            self,
            centerline=self.centerline.transformed(rotation, offset),
            left_boundary=self.left_boundary.transformed(rotation, offset),
            right_boundary=self.right_boundary.transformed(rotation, offset),
        )

    def translated(self, dx, dy) -> LaneSegment:
        """Return element moved by (dx, dy)."""
        return replace(
            self,
            centerline=self.centerline.translated(dx, dy),
            left_boundary=self.left_boundary.translated(dx, dy),
            right_boundary=self.right_boundary.translated(dx, dy),
        )


@dataclass(frozen=True)
class Fov:
    """Axis aligned field of view bounds in meters."""

    xmin: float = -FOV_HALF_SIZE
    ymin: float = -FOV_HALF_SIZE
    xmax: float = FOV_HALF_SIZE
    ymax: float = FOV_HALF_SIZE

    @property
    def well_formed(self) -> bool:
        """Return True when min < max on both axes."""
        return self.xmin < self.xmax and self.ymin < self.ymax

    def as_list(self) -> list[float]:
        """Return [xmin, ymin, xmax, ymax]."""
        return [self.xmin, self.ymin, self.xmax, self.ymax]

    def window(self):
        """Return bounds as shapely box."""
        return box(self.xmin, self.ymin, self.xmax, self.ymax)


@dataclass(frozen=True)
class LocalMap:
    """Local map of one frame, or the stale prior of that frame."""

    frame_id: str
    elements: tuple[LaneSegment, ...] = ()
    fov: Fov = Fov()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def ids(self) -> tuple[str, ...]:
        """Return element ids in map order."""
        return tuple(it.element_id for it in self.elements)

    @property
    def lanes(self) -> tuple[LaneSegment, ...]:
        """Return lane elements."""
        return tuple(it for it in self.elements if it.is_lane)

    @property
    def crossings(self) -> tuple[LaneSegment, ...]:
        """Return pedestrian crossing elements."""
        return tuple(it for it in self.elements if it.is_crossing)

    def element(self, element_id) -> LaneSegment | None:
        """Return element by id or None."""
        for it in self.elements:
            if it.element_id == element_id:
                return it
        return None

    def without(self, element_ids) -> LocalMap:
        """Return copy without elements of given ids."""
        element_ids = set(element_ids)
        return replace(
            self,
            elements=tuple(
                it for it in self.elements if it.element_id not in element_ids
            ),
        )

    def extended(self, elements) -> LocalMap:
        """Return copy with elements appended."""
        return replace(self, elements=self.elements + tuple(elements))


@dataclass(frozen=True)
class Violation:
    """One broken map invariant."""

    rule: str
    element_id: str | None = None
    detail: str = ""

    def __str__(self):
        """Return human readable form."""
        where = f"`{self.element_id}' " if self.element_id is not None else ""
        detail = f": {self.detail}" if self.detail else ""
        return f"{self.rule} {where}{detail}".strip()


def resample_polyline(poly: Polyline, n: int = POINT_COUNT) -> Polyline:
    """Return n points equally spaced along the arclength of poly.

    First and last points are kept exactly. Repeated points are skipped
    before interpolation.
    """
    if n < 2:  # noqa: PLR2004
        msg = f"cannot resample to {n} points"
        raise ValueError(msg)
    points = poly.array
    steps = np.hypot(*np.diff(points, axis=0).T)
    keep = np.concatenate(([True], steps > 0))
    points, steps = points[keep], steps[steps > 0]
    if not steps.size or not np.isfinite(steps).all():
        msg = "polyline has zero arclength"
        raise ZeroLengthPolyline(msg)

    arclength = np.concatenate(([0.0], np.cumsum(steps)))
    targets = np.linspace(0.0, arclength[-1], n)
    resampled = np.column_stack(
        (
            np.interp(targets, arclength, points[:, 0]),
            np.interp(targets, arclength, points[:, 1]),
        ),
    )
    resampled[0] = points[0]
    resampled[-1] = points[-1]
    return Polyline.from_array(resampled)


def element_footprint(segment: LaneSegment):
    """Return shapely geometry covering the element.

    Self intersecting rings are repaired, collapsed rings end up as lines.
    """
    shape = Polygon(segment.ring)
    if not shape.is_valid:
        shape = make_valid(shape)
    return shape


def ring_area(segment: LaneSegment) -> float:
    """Return area enclosed by the element ring."""
    return float(Polygon(segment.ring).area)


def prune_successors(elements) -> tuple[LaneSegment, ...]:
    """Return elements with successors outside the collection dropped."""
    known = {it.element_id for it in elements}
    return tuple(
        it if known.issuperset(it.successors)
        else replace(
            it,
            successors=tuple(s for s in it.successors if s in known),
        )
        for it in elements
    )


def crop_to_fov(local_map: LocalMap, bounds: Fov) -> LocalMap:
    """Keep whole elements whose footprint intersects bounds.

    Geometry is never clipped, so point counts stay canonical. Successor
    links to elements left out are dropped.
    """
    if not bounds.well_formed:
        msg = f"malformed field of view {bounds.as_list()}"
        raise ValueError(msg)
    window = bounds.window()
    kept = tuple(
        it for it in local_map.elements
        if element_footprint(it).intersects(window)
    )
    return replace(local_map, elements=prune_successors(kept), fov=bounds)


def _element_violations(segment, known_ids, window):
    violations = []
    eid = segment.element_id
    names = ("centerline", "left_boundary", "right_boundary")
    finite = True
    for name, poly in zip(names, segment.polylines):
        if len(poly) != POINT_COUNT:
            violations.append(
                Violation(
                    "PointCountViolation",
                    eid,
                    f"{name} has {len(poly)} points",
                ),
            )
        if not poly.is_finite:
            finite = False
            violations.append(Violation("NonFiniteCoordinate", eid, name))
        elif poly.length <= 0:
            violations.append(Violation("ZeroLengthPolyline", eid, name))

    if finite:
        area = ring_area(segment)
        if not area >= MIN_AREA:
            violations.append(
                Violation("DegenerateElement", eid, f"area {area:.3g} m2"),
            )
        elif window is not None and not element_footprint(
            segment,
        ).intersects(window):
            violations.append(Violation("OutsideFov", eid))

    violations.extend(
        Violation("DanglingSuccessor", eid, successor)
        for successor in segment.successors
        if successor not in known_ids
    )
    return violations


def validate_map(local_map: LocalMap) -> list[Violation]:
    """Return all invariant violations of the map, empty when valid."""
    violations = []
    window = None
    if local_map.fov.well_formed:
        window = local_map.fov.window()
    else:
        violations.append(
            Violation("MalformedFov", None, str(local_map.fov.as_list())),
        )

    counts = Counter(local_map.ids)
    violations.extend(
        Violation("DuplicateId", eid, f"{count} elements")
        for eid, count in counts.items()
        if count > 1
    )
    known = set(counts)
    for segment in local_map.elements:
        violations.extend(_element_violations(segment, known, window))
    return violations
