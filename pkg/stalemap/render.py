"""SVG change maps.

Inserted elements are green, deleted ones dashed red and unchanged ones grey.
The ego x axis points up, y to the left.
"""

from __future__ import annotations

from dataclasses import dataclass
from html import escape
from logging import getLogger
from math import isfinite

from stalemap.errors import ConfigError, DegenerateElement
from stalemap.frames import ChangeLabel, FrameGroundTruth, FramePrediction
from stalemap.geometry import element_polygon

log = getLogger(__name__)


@dataclass(frozen=True)
class RenderStyle:
    """Colors, strokes and canvas scale of change maps."""

    inserted: str = "#2ca02c"
    deleted: str = "#d62728"
    unchanged: str = "#9e9e9e"
    deleted_dash: str = "6 4"
    background: str = "#ffffff"
    stroke_width: float = 2.0
    centerline_width: float = 1.0
    scale: float = 12.0
    margin: float = 10.0

    def __post_init__(self):
        for name in ("stroke_width", "centerline_width", "scale"):
            value = getattr(self, name)
            if not (isfinite(value) and value > 0):
                msg = f"{name} must be positive, got {value}"
                raise ConfigError(msg)
        if not (isfinite(self.margin) and self.margin >= 0):
            msg = "margin must not be negative"
            raise ConfigError(msg)
        looks = {self.stroke(it) for it in ChangeLabel}
        if len(looks) != len(ChangeLabel):
            msg = "change labels must have distinct styles"
            raise ConfigError(msg)

    def stroke(self, label: ChangeLabel) -> tuple[str, str | None]:
        """Return (color, dash array) of label."""
        if label is ChangeLabel.INSERTED:
            return self.inserted, None
        if label is ChangeLabel.DELETED:
            return self.deleted, self.deleted_dash
        return self.unchanged, None


@dataclass(frozen=True)
class RenderResult:
    """SVG document and ids of elements left out."""

    svg: str
    warnings: tuple[str, ...] = ()


def labeled_segments(frame):
    """Return (segment, label) of ground truth, prediction or plain map."""
    if isinstance(frame, FrameGroundTruth):
        return [(it.segment, it.label) for it in frame.elements]
    if isinstance(frame, FramePrediction):
        return [(it.segment, it.status) for it in frame.elements]
    return [(it, ChangeLabel.UNCHANGED) for it in frame.elements]


class Canvas:
    """Ego frame to pixel projection."""

    def __init__(self, fov, style: RenderStyle):
        self.fov = fov
        self.style = style
        self.width = (fov.ymax - fov.ymin) * style.scale + 2 * style.margin
        self.height = (fov.xmax - fov.xmin) * style.scale + 2 * style.margin

    def points(self, array) -> str:
        """Return SVG points attribute of ego frame points."""
        style, fov = self.style, self.fov
        return " ".join(
            f"{style.margin + (fov.ymax - y) * style.scale:.2f},"
            f"{style.margin + (fov.xmax - x) * style.scale:.2f}"
            for x, y in array
        )


def _element(canvas, segment, label):
    style = canvas.style
    color, dash = style.stroke(label)
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    name = label.value
    return [
        f'<g class="element {name}" id="{escape(segment.element_id)}" '
        f'data-class="{segment.element_class.value}">',
        f'<polygon class="outline {name}" '
        f'points="{canvas.points(segment.ring)}" fill="none" '
        f'stroke="{color}" stroke-width="{style.stroke_width:g}"'
        f"{dash_attr}/>",
        f'<polyline class="centerline {name}" '
        f'points="{canvas.points(segment.centerline.array)}" fill="none" '
        f'stroke="{color}" stroke-width="{style.centerline_width:g}"'
        f"{dash_attr}/>",
        "</g>",
    ]


def render_change_map(frame, style: RenderStyle | None = None):
    """Return RenderResult with standalone SVG of frame.

    Elements are drawn sorted by id, elements without area are skipped and
    reported in warnings.
    """
    style = style or RenderStyle()
    canvas = Canvas(frame.fov, style)
    body = []
    warnings = []
    items = sorted(
        labeled_segments(frame),
        key=lambda it: it[0].element_id,
    )
    for segment, label in items:
        try:
            element_polygon(segment)
        except DegenerateElement as err:
            log.warning("%s: %s, not drawn", frame.frame_id, err)
            warnings.append(str(err))
            continue
        body.extend(_element(canvas, segment, label))

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{canvas.width:.2f}" height="{canvas.height:.2f}" '
        f'viewBox="0 0 {canvas.width:.2f} {canvas.height:.2f}">',
        f"<title>{escape(frame.frame_id)}</title>",
        f'<rect width="100%" height="100%" fill="{style.background}"/>',
        *body,
        "</svg>",
    ]
    return RenderResult("\n".join(lines) + "\n", tuple(warnings))
